import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from games_lab.exceptions import DimensionMismatchError, InvalidStateError, UnsupportedArityError
from games_lab.games import Game, chsh, classical_value, product_game
from games_lab.strategies import (
    EntangledStrategy,
    evaluate,
    from_deterministic,
    load_strategy,
    outcome_distribution,
    product_strategy,
    random_strategy,
    save_strategy,
    seesaw,
    simulate,
    strategy_from_dict,
    strategy_to_dict,
    tsirelson_chsh,
)

TSIRELSON = math.cos(math.pi / 8) ** 2


def born_oracle(s):
    """Outcome probabilities from explicit Kronecker products."""
    nx, ny, na, nb = s.shape
    rho = np.outer(s.shared, s.shared.conj())
    p = np.zeros((nx, ny, na, nb))
    for x, y, a, b in np.ndindex(nx, ny, na, nb):
        p[x, y, a, b] = np.trace(np.kron(s.alice_povms[x, a], s.bob_povms[y, b]) @ rho).real
    return p


def test_tsirelson_value():
    assert evaluate(chsh(), tsirelson_chsh()) == pytest.approx(TSIRELSON, abs=1e-12)


def test_outcome_distribution_matches_kron_oracle(rng):
    s = random_strategy(2, 3, 3, 2, 2, rng)
    np.testing.assert_allclose(outcome_distribution(s), born_oracle(s), atol=1e-12)
    np.testing.assert_allclose(outcome_distribution(s).sum(axis=(2, 3)), 1.0, atol=1e-12)


def test_strategy_validation():
    s = tsirelson_chsh()
    bad = s.alice_povms.copy()
    bad[0, 0] *= 2
    with pytest.raises(InvalidStateError):
        EntangledStrategy(s.shared, bad, s.bob_povms)
    with pytest.raises((InvalidStateError, DimensionMismatchError)):
        EntangledStrategy(np.ones(3) / math.sqrt(3), s.alice_povms, s.bob_povms)


def test_evaluate_rejects_mismatched_game():
    with pytest.raises(DimensionMismatchError):
        evaluate(product_game(chsh(), 2), tsirelson_chsh())


def test_deterministic_embedding_reproduces_classical_value():
    v, det = classical_value(chsh())
    assert evaluate(chsh(), from_deterministic(chsh(), det)) == pytest.approx(v)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_product_strategy_value_multiplies(seed):
    rng = np.random.default_rng(seed)
    g = Game(rng.dirichlet(np.ones(4)).reshape(2, 2), rng.random((2, 2, 2, 2)) < 0.5)
    s = random_strategy(2, 2, 2, 2, 2, rng)
    assert evaluate(product_game(g, 2), product_strategy(s, 2)) == pytest.approx(evaluate(g, s) ** 2, abs=1e-9)


def test_product_strategy_three_fold():
    v = evaluate(product_game(chsh(), 3), product_strategy(tsirelson_chsh(), 3))
    assert v == pytest.approx(TSIRELSON ** 3, abs=1e-10)


def test_simulate_agrees_with_evaluate():
    shots = 100_000
    draws = simulate(chsh(), tsirelson_chsh(), shots, 3)
    wins = chsh().predicate[draws[:, 0], draws[:, 1], draws[:, 2], draws[:, 3]].mean()
    sigma = math.sqrt(TSIRELSON * (1 - TSIRELSON) / shots)
    assert abs(wins - TSIRELSON) <= 4 * sigma


def test_seesaw_reaches_tsirelson_and_is_monotone():
    s, rep = seesaw(chsh(), 2, rng_seed=42)
    assert rep.final_value == pytest.approx(TSIRELSON, abs=1e-6)
    assert evaluate(chsh(), s) == pytest.approx(rep.final_value, abs=1e-12)
    assert np.all(np.diff(rep.value_trace) >= -1e-10)


def test_seesaw_dimension_one_is_classical():
    _, rep = seesaw(chsh(), 1, rng_seed=42)
    assert rep.final_value <= 0.75 + 1e-9


def test_seesaw_is_deterministic():
    a = seesaw(chsh(), 2, restarts=3, rng_seed=7)[1]
    b = seesaw(chsh(), 2, restarts=3, rng_seed=7)[1]
    assert a.value_trace == b.value_trace


def test_seesaw_three_answers_uses_ascent_fallback(rng):
    g = Game(np.full((2, 2), 0.25), rng.random((2, 2, 3, 3)) < 0.5)
    s, rep = seesaw(g, 2, iters=100, restarts=2, rng_seed=1)
    assert 0.0 <= rep.final_value <= 1.0
    # a lower bound can never beat the trivial value 1 and should reach the classical value
    assert rep.final_value >= classical_value(g)[0] - 1e-3
    with pytest.raises(UnsupportedArityError):
        seesaw(g, 2, ascent_fallback=False)


def test_seesaw_rejects_bad_config():
    with pytest.raises(ValueError):
        seesaw(chsh(), 2, restarts=0)


def test_serialization_round_trip(tmp_path, rng):
    s = random_strategy(2, 2, 3, 2, 2, rng)
    t = strategy_from_dict(strategy_to_dict(s))
    np.testing.assert_allclose(t.alice_povms, s.alice_povms)
    np.testing.assert_allclose(t.shared, s.shared)
    path = tmp_path / "s.json"
    save_strategy(s, path)
    u = load_strategy(path)
    np.testing.assert_allclose(u.bob_povms, s.bob_povms)
