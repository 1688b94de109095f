import itertools
import json

import numpy as np
import pytest

from games_lab.exceptions import BudgetExceededError, GameFormatError
from games_lab.games import (
    DeterministicStrategy,
    Game,
    chsh,
    classical_value,
    constant_game,
    evaluate_deterministic,
    game_from_dict,
    game_to_dict,
    load_game,
    marginals,
    product_game,
    save_game,
)


def brute_force_value(game):
    """Independent oracle: loop over every deterministic pair."""
    best = -1.0
    for f in itertools.product(range(game.na), repeat=game.nx):
        for g in itertools.product(range(game.nb), repeat=game.ny):
            v = sum(
                game.mu[x, y] * game.predicate[x, y, f[x], g[y]]
                for x in range(game.nx)
                for y in range(game.ny)
            )
            best = max(best, v)
    return best


def random_game(rng, nx=2, ny=2, na=2, nb=2):
    mu = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
    return Game(mu, rng.random((nx, ny, na, nb)) < 0.5)


def test_chsh_value_and_strategy():
    v, s = classical_value(chsh())
    assert v == 0.75
    assert evaluate_deterministic(chsh(), s) == 0.75


@pytest.mark.parametrize("sizes", [(2, 2, 2, 2), (3, 2, 2, 3), (2, 3, 3, 2), (3, 3, 2, 2)])
def test_classical_value_matches_brute_force(sizes):
    rng = np.random.default_rng(sum(sizes))
    for _ in range(5):
        g = random_game(rng, *sizes)
        v, s = classical_value(g)
        assert v == pytest.approx(brute_force_value(g), abs=1e-12)
        assert evaluate_deterministic(g, s) == pytest.approx(v, abs=1e-12)


def test_classical_value_threads_do_not_change_result(monkeypatch):
    g = product_game(chsh(), 2)
    monkeypatch.setenv("GAMES_LAB_THREADS", "4")
    v4, s4 = classical_value(g, chunk=16)
    monkeypatch.setenv("GAMES_LAB_THREADS", "1")
    v1, s1 = classical_value(g)
    assert v4 == v1 == 0.625
    assert s4 == s1


def test_constant_games():
    assert classical_value(constant_game(2, 3, 2, 2, True))[0] == pytest.approx(1.0, abs=1e-12)
    assert classical_value(constant_game(2, 3, 2, 2, False))[0] == 0.0


def test_budget():
    with pytest.raises(BudgetExceededError) as exc:
        classical_value(product_game(chsh(), 2), budget=1000)
    assert exc.value.required == 65536


def test_product_game_structure():
    g2 = product_game(chsh(), 2)
    assert g2.sizes == (4, 4, 4, 4)
    base = chsh().predicate
    for x1, x2, y1, y2, a1, a2, b1, b2 in itertools.product(range(2), repeat=8):
        x, y = x1 * 2 + x2, y1 * 2 + y2
        a, b = a1 * 2 + a2, b1 * 2 + b2
        assert g2.predicate[x, y, a, b] == (base[x1, y1, a1, b1] and base[x2, y2, a2, b2])
    np.testing.assert_allclose(g2.mu, np.full((4, 4), 1 / 16))


def test_classical_value_supermultiplicative(rng):
    for _ in range(10):
        g = random_game(rng)
        assert classical_value(product_game(g, 2))[0] >= classical_value(g)[0] ** 2 - 1e-12


def test_marginals_product_witness():
    w = marginals(chsh())
    assert w.is_product()
    corr = Game(np.array([[0.5, 0.0], [0.0, 0.5]]), np.ones((2, 2, 2, 2), bool))
    assert marginals(corr).residual == pytest.approx(1.0)
    assert not marginals(corr).is_product()


def test_game_validation():
    with pytest.raises(ValueError):
        Game(np.array([[0.5, 0.6], [0.0, 0.0]]), np.ones((2, 2, 2, 2), bool))
    with pytest.raises(ValueError):
        Game(np.full((2, 2), 0.25), np.ones((2, 3, 2, 2), bool))


def test_round_trip(tmp_path, rng):
    g = random_game(rng, 2, 3, 3, 2)
    assert game_from_dict(game_to_dict(g)).same_as(g)
    path = tmp_path / "g.json"
    save_game(g, path)
    assert load_game(path).same_as(g)
    assert load_game("CHSH").same_as(chsh())


def test_format_errors_name_the_field(tmp_path):
    doc = game_to_dict(chsh())
    bad = dict(doc, mu=[[0.5, 0.5]])
    with pytest.raises(GameFormatError, match="mu"):
        game_from_dict(bad)
    bad = dict(doc, predicate=[[0, 0, 5, 0]])
    with pytest.raises(GameFormatError, match="predicate"):
        game_from_dict(bad)
    bad = dict(doc, sizes={"nx": 2})
    with pytest.raises(GameFormatError, match="sizes"):
        game_from_dict(bad)
    path = tmp_path / "broken.json"
    path.write_text('{"sizes": {"nx": 2,\n "ny": }')
    with pytest.raises(GameFormatError, match="line 2"):
        load_game(path)
    with pytest.raises(GameFormatError):
        load_game(tmp_path / "missing.json")


def test_game_file_is_plain_json(tmp_path):
    path = tmp_path / "g.json"
    save_game(chsh(), path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"sizes", "mu", "predicate"}
    assert len(doc["predicate"]) == 8


def test_deterministic_strategy_must_be_total():
    with pytest.raises(ValueError):
        evaluate_deterministic(chsh(), DeterministicStrategy((0,), (0, 0)))
