import math

import numpy as np
import pytest

from games_lab.exceptions import BudgetExceededError, NonProductDistributionError, ZeroProbabilityError
from games_lab.games import DeterministicStrategy, Game, chsh, constant_game, product_game
from games_lab.multireg import probabilities, reduced_state
from games_lab.repetition import (
    REPORT_COLUMNS,
    build_theta,
    condition_success,
    coordinate_success,
    embed_single_game,
    lemma3_check,
    lemma7_budget,
    lemma8_scan,
    report_rows,
    theorem_bound,
)
from games_lab.strategies import (
    EntangledStrategy,
    from_deterministic,
    outcome_distribution,
    product_strategy,
    random_strategy,
    simulate,
    tsirelson_chsh,
)

COS2 = math.cos(math.pi / 8) ** 2


@pytest.fixture(scope="module")
def chsh_theta():
    game = chsh()
    s = product_strategy(tsirelson_chsh(), 2)
    return game, s, build_theta(game, 2, s, [1])


def random_instance(seed, d=2):
    rng = np.random.default_rng([99, seed])
    mu = np.outer(rng.dirichlet([1, 1]), rng.dirichlet([1, 1]))
    game = Game(mu, rng.random((2, 2, 2, 2)) < 0.6)
    return game, random_strategy(4, 4, 4, 4, d, rng)


def mixed_qubit_game():
    """k = 1 game won iff a = b = 0, played on |+>|+> measured in the computational
    basis by both players: Pr[a = b = 0] = 1/4."""
    e = np.stack([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    pred = np.zeros((1, 1, 2, 2), bool)
    pred[0, 0, 0, 0] = True
    s = EntangledStrategy(np.full(4, 0.5), e[None], e[None])
    return Game(np.ones((1, 1)), pred), s


def mc_split(game, draws, k):
    """Split flat k-fold question/answer indices into per-coordinate columns."""
    shape = lambda n: (n,) * k
    out = {}
    for col, n, key in ((0, game.nx, "x"), (1, game.ny, "y"), (2, game.na, "a"), (3, game.nb, "b")):
        parts = np.unravel_index(draws[:, col], shape(n))
        for i in range(k):
            out[f"{key}{i + 1}"] = parts[i]
    return out


def wins_on(game, cols, i):
    return game.predicate[cols[f"x{i}"], cols[f"y{i}"], cols[f"a{i}"], cols[f"b{i}"]]


# --- theta ----------------------------------------------------------------

def test_question_registers_are_uniform_copies(chsh_theta):
    game, _, theta = chsh_theta
    names = ["Xt1", "Xt2", "X1", "X2", "Yt1", "Yt2", "Y1", "Y2"]
    p = probabilities(theta, names)
    support = np.argwhere(p > 1e-15)
    assert support.shape[0] == 16
    np.testing.assert_allclose(p[tuple(support.T)], 1 / 16, atol=1e-12)
    for row in support:
        assert tuple(row[0:2]) == tuple(row[2:4]) and tuple(row[4:6]) == tuple(row[6:8])


def test_single_coordinate_statistics_match_born_rule(chsh_theta):
    game, _, theta = chsh_theta
    p = probabilities(theta, ["X1", "Y1", "A1", "B1"])
    oracle = game.mu[:, :, None, None] * outcome_distribution(tsirelson_chsh())
    np.testing.assert_allclose(p, oracle, atol=1e-12)


def test_classical_registers_are_diagonal(chsh_theta):
    game, _, theta = chsh_theta
    phi = condition_success(theta, game, [1]).phi
    rho = reduced_state(phi, ["X1", "Y1", "A1", "B1"]).matrix
    assert np.max(np.abs(rho - np.diag(np.diag(rho)))) <= 1e-12


def test_question_copies_are_coherent(chsh_theta):
    # X and its tilde copy are correlated coherently, so the joint block keeps off-diagonal weight
    game, _, theta = chsh_theta
    rho = reduced_state(theta, ["X1", "Xt1"]).matrix
    np.testing.assert_allclose(np.diag(rho).real, [0.5, 0, 0, 0.5], atol=1e-12)
    assert abs(rho[0, 3]) > 0.1


def test_non_product_mu_is_rejected():
    g = Game(np.array([[0.5, 0.0], [0.0, 0.5]]), np.ones((2, 2, 2, 2), bool))
    s = product_strategy(tsirelson_chsh(), 1)
    with pytest.raises(NonProductDistributionError) as exc:
        build_theta(g, 1, s)
    assert exc.value.residual == pytest.approx(1.0)


def test_budget_is_enforced():
    with pytest.raises(BudgetExceededError):
        build_theta(chsh(), 2, product_strategy(tsirelson_chsh(), 2), budget=1000)


# --- conditioning -----------------------------------------------------------

def test_q_matches_single_game_oracle(chsh_theta):
    game, _, theta = chsh_theta
    assert condition_success(theta, game, [1]).q == pytest.approx(COS2, abs=1e-9)
    assert condition_success(theta, game, [1, 2]).q == pytest.approx(COS2 ** 2, abs=1e-9)
    assert condition_success(theta, game, []).q == pytest.approx(1.0, abs=1e-12)


def test_trivial_predicate_deterministic_answers():
    g = constant_game(2, 2, 2, 2, True)
    s = from_deterministic(g, DeterministicStrategy((0, 1), (1, 1)))
    theta = build_theta(g, 1, s, [1])
    cgs = condition_success(theta, g, [1])
    assert cgs.q == pytest.approx(1.0)
    lhs, rhs = lemma7_budget(cgs, g)
    assert lhs == pytest.approx(0.0, abs=1e-9) and rhs == pytest.approx(2.0)


def test_trivial_predicate_pays_answer_entropy():
    # phi equals theta, yet the budget term still charges H(A_C B_C | X_C Y_C)
    g = constant_game(2, 2, 2, 2, True)
    s = product_strategy(tsirelson_chsh(), 1)
    theta = build_theta(g, 1, s, [1])
    cgs = condition_success(theta, g, [1])
    assert cgs.q == pytest.approx(1.0)
    np.testing.assert_allclose(cgs.phi.amplitudes, theta.amplitudes, atol=1e-12)
    lhs, rhs = lemma7_budget(cgs, g)
    p = outcome_distribution(s)
    h = float(np.mean([-(p[x, y] * np.log2(p[x, y])).sum() for x in range(2) for y in range(2)]))
    assert h == pytest.approx(1 - COS2 * math.log2(COS2) - (1 - COS2) * math.log2(1 - COS2))
    assert lhs == pytest.approx(h, abs=1e-9) and lhs <= rhs == pytest.approx(2.0)


def test_never_winning_raises():
    g = constant_game(2, 2, 2, 2, False)
    theta = build_theta(g, 1, product_strategy(tsirelson_chsh(), 1))
    with pytest.raises(ZeroProbabilityError):
        condition_success(theta, g, [1])


@pytest.mark.parametrize("seed", range(3))
def test_q_matches_monte_carlo(seed):
    game, s = random_instance(seed)
    theta = build_theta(game, 2, s)
    shots = 100_000
    cols = mc_split(game, simulate(product_game(game, 2), s, shots, seed), 2)
    for C in ([1], [2], [1, 2]):
        q = condition_success(theta, game, C).q
        hits = np.ones(shots, bool)
        for i in C:
            hits &= wins_on(game, cols, i)
        sigma = math.sqrt(q * (1 - q) / shots)
        assert abs(hits.mean() - q) <= 3 * sigma + 1e-12


# --- budget and min-entropy invariants ----------------------------------------

def test_entropy_budget_for_chsh(chsh_theta):
    game, _, theta = chsh_theta
    lhs, rhs = lemma7_budget(condition_success(theta, game, [1]), game)
    assert rhs == pytest.approx(-math.log2(COS2) + 2, abs=1e-9)
    assert lhs <= rhs


def test_entropy_budget_rhs_with_quarter_success():
    game, s = mixed_qubit_game()
    cgs = condition_success(build_theta(game, 1, s, [1]), game, [1])
    assert cgs.q == pytest.approx(0.25)
    lhs, rhs = lemma7_budget(cgs, game)
    assert rhs == pytest.approx(2 + 2)
    assert lhs <= rhs


@pytest.mark.parametrize("seed", range(4))
def test_entropy_budget_and_min_entropy_on_random_instances(seed):
    game, s = random_instance(seed)
    theta = build_theta(game, 2, s)
    for C in ([1], [2], [1, 2]):
        cgs = condition_success(theta, game, C)
        lhs, rhs = lemma7_budget(cgs, game)
        assert lhs <= rhs + 1e-9
        d_inf, bound = lemma3_check(cgs)
        assert d_inf <= bound + 1e-7


# --- coordinate success -----------------------------------------------------------

def test_coordinate_success_product_strategy(chsh_theta):
    game, s, theta = chsh_theta
    cgs = condition_success(theta, game, [1])
    assert coordinate_success(cgs, game, s, 2) == pytest.approx(COS2, abs=1e-9)
    with pytest.raises(ValueError):
        coordinate_success(cgs, game, s, 1)


def test_coordinate_success_correlated_strategy_matches_sampling():
    game, s = random_instance(7)
    cgs = condition_success(build_theta(game, 2, s), game, [1])
    omega = coordinate_success(cgs, game, s, 2)
    shots = 100_000
    cols = mc_split(game, simulate(product_game(game, 2), s, shots, 1), 2)
    first = wins_on(game, cols, 1)
    estimate = wins_on(game, cols, 2)[first].mean()
    assert abs(estimate - omega) <= 0.01


# --- embedding protocol -----------------------------------------------------------

def test_embedding_product_strategy_has_no_degradation(chsh_theta):
    game, _, theta = chsh_theta
    dg = embed_single_game(condition_success(theta, game, [1]), game, 2)
    assert max(dg.eps_x, dg.eps_y, dg.gamma, dg.tau, dg.kappa) <= 1e-7
    assert dg.p4_value == pytest.approx(COS2, abs=1e-9)
    assert dg.exact


def test_embedding_trivial_game_wins_always():
    g = constant_game(2, 2, 2, 2, True)
    s = product_strategy(tsirelson_chsh(), 2)
    cgs = condition_success(build_theta(g, 2, s), g, [1])
    assert embed_single_game(cgs, g, 2).p4_value == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_embedding_chain_on_correlated_strategies(seed):
    game, s = random_instance(seed)
    theta = build_theta(game, 2, s)
    for C, j in (([1], 2), ([2], 1), ([], 2)):
        dg = embed_single_game(condition_success(theta, game, C), game, j)
        for v in (dg.eps_x, dg.eps_y, dg.gamma, dg.tau, dg.kappa):
            assert math.isfinite(v) and v >= -1e-12
        assert 0.0 <= dg.p4_value <= 1.0 and 0.0 <= dg.omega_j <= 1.0
        assert dg.p4_value >= dg.bound_rhs - 1e-9


def test_embedding_sampled_value_matches_exact():
    game, s = random_instance(2)
    cgs = condition_success(build_theta(game, 2, s), game, [1])
    exact = embed_single_game(cgs, game, 2)
    sampled = embed_single_game(cgs, game, 2, rng_seed=3, shots=50_000)
    assert abs(sampled.p4_value - exact.p4_value) <= 4 * sampled.p4_stderr
    assert sampled.eps_x == pytest.approx(exact.eps_x)


def test_embedding_coin_sampling_mode():
    game, s = random_instance(4)
    cgs = condition_success(build_theta(game, 2, s), game, [1])
    exact = embed_single_game(cgs, game, 2)
    sampled = embed_single_game(cgs, game, 2, shots=20_000, max_enumeration=1)
    assert not sampled.exact
    assert abs(sampled.p4_value - exact.p4_value) <= 4 * sampled.p4_stderr + 0.01


@pytest.mark.parametrize("seed", range(3))
def test_embedded_value_respects_tsirelson_ceiling(seed):
    rng = np.random.default_rng([5, seed])
    s = random_strategy(4, 4, 4, 4, 2, rng)
    game = chsh()
    cgs = condition_success(build_theta(game, 2, s), game, [1])
    assert embed_single_game(cgs, game, 2).p4_value <= 0.853554 + 1e-9


def test_embedding_rejects_coordinate_in_c(chsh_theta):
    game, _, theta = chsh_theta
    with pytest.raises(ValueError):
        embed_single_game(condition_success(theta, game, [1]), game, 1)


# --- theorem bound and scan -----------------------------------------------------------

def test_decay_bound_values():
    assert theorem_bound(0.25, 384000, 2, 2) == 0.875
    assert theorem_bound(0.25, 0, 2, 2) == 1.0
    assert theorem_bound(0.25, 768000, 2, 2) == pytest.approx(0.765625, abs=1e-12)
    with pytest.raises(ValueError):
        theorem_bound(1.5, 3, 2, 2)
    with pytest.raises(ValueError):
        theorem_bound(0.25, 3, 1, 1)


def test_decay_bound_monotone():
    ks = np.linspace(1, 10 ** 7, 12).astype(int)
    eps = np.linspace(0.05, 0.95, 12)
    vk = [theorem_bound(0.3, int(k), 2, 3) for k in ks]
    ve = [theorem_bound(float(e), 10 ** 6, 2, 3) for e in eps]
    assert all(b < a for a, b in zip(vk, vk[1:]))
    assert all(b < a for a, b in zip(ve, ve[1:]))


def test_scan_product_tsirelson():
    game = chsh()
    s = product_strategy(tsirelson_chsh(), 2)
    rep = lemma8_scan(game, 2, s, 0.01, 0.01, omega_star=COS2, embed=False)
    assert [st.j for st in rep.steps] == [1, 2]
    for st in rep.steps:
        assert st.omega_j == pytest.approx(COS2, abs=1e-9)
    assert rep.all_hold and not rep.halted
    rows = report_rows(rep.steps)
    assert len(rows[0]) == len(REPORT_COLUMNS)


def test_scan_never_winning_halts():
    g = constant_game(2, 2, 2, 2, False)
    rep = lemma8_scan(g, 2, product_strategy(tsirelson_chsh(), 2), 0.01, 0.01, omega_star=0.0, embed=False)
    assert rep.halted
    assert rep.steps[0].omega_j == 0.0
    assert rep.steps[-1].q == 0.0


def test_scan_random_instance_with_monte_carlo_chain():
    game, s = random_instance(11)
    rep = lemma8_scan(game, 2, s, 0.01, 0.01, omega_star=0.9, embed=False)
    assert rep.all_hold
    first = rep.steps[0]
    shots = 100_000
    cols = mc_split(game, simulate(product_game(game, 2), s, shots, 2), 2)
    # first step: unconditioned success of the chosen coordinate
    assert abs(wins_on(game, cols, first.j).mean() - first.omega_j) <= 0.01
    second = rep.steps[1]
    mask = wins_on(game, cols, first.j)
    assert abs(mask.mean() - second.q) <= 0.01
    assert abs(wins_on(game, cols, second.j)[mask].mean() - second.omega_j) <= 0.01
