"""Two-player one-round games, k-fold products and exact classical values.

Product-set indices are coordinate-major: for ``x = (x_1, ..., x_k)`` the
flat index is ``numpy.ravel_multi_index(x, (nx,) * k)``, so the first
coordinate is the most significant digit.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._linalg import DEFAULT_TOL, n_threads
from .exceptions import BudgetExceededError, GameFormatError

DEFAULT_STRATEGY_BUDGET = 2 ** 26
DEFAULT_SIZE_BUDGET = 2 ** 26


@dataclass(frozen=True, eq=False)
class Game:
    """A game ``(mu, X, Y, A, B, V)`` with ``mu`` of shape ``(nx, ny)`` and
    ``predicate`` a boolean array of shape ``(nx, ny, na, nb)``."""

    mu: np.ndarray
    predicate: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        pred = np.array(self.predicate, dtype=bool)
        if mu.ndim != 2:
            raise ValueError(f"mu must be a matrix, got shape {mu.shape}")
        if pred.ndim != 4 or pred.shape[:2] != mu.shape:
            raise ValueError(f"predicate shape {pred.shape} does not match mu shape {mu.shape}")
        if np.any(mu < -self.tol) or abs(mu.sum() - 1.0) > self.tol:
            raise ValueError("mu must be a probability distribution")
        mu = np.clip(mu, 0.0, None)
        mu.setflags(write=False)
        pred.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "predicate", pred)

    @property
    def nx(self):
        return self.predicate.shape[0]

    @property
    def ny(self):
        return self.predicate.shape[1]

    @property
    def na(self):
        return self.predicate.shape[2]

    @property
    def nb(self):
        return self.predicate.shape[3]

    @property
    def sizes(self):
        return self.nx, self.ny, self.na, self.nb

    def same_as(self, other):
        return (
            self.sizes == other.sizes
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.predicate, other.predicate)
        )


@dataclass(frozen=True)
class ProductDistributionWitness:
    mu_x: np.ndarray
    mu_y: np.ndarray
    residual: float

    def is_product(self, tol=DEFAULT_TOL):
        return self.residual <= tol


@dataclass(frozen=True)
class DeterministicStrategy:
    f: tuple
    g: tuple


def chsh():
    """CHSH: uniform questions on {0,1}^2, win iff ``a XOR b == x AND y``."""
    x, y, a, b = np.indices((2, 2, 2, 2))
    return Game(np.full((2, 2), 0.25), (a ^ b) == (x & y))


def constant_game(nx, ny, na, nb, win):
    """Uniform-question game whose predicate is identically ``win``."""
    mu = np.full((nx, ny), 1.0 / (nx * ny))
    return Game(mu, np.full((nx, ny, na, nb), bool(win)))


def marginals(game):
    mu_x = game.mu.sum(axis=1)
    mu_y = game.mu.sum(axis=0)
    residual = float(np.abs(game.mu - np.outer(mu_x, mu_y)).sum())
    return ProductDistributionWitness(mu_x, mu_y, residual)


def evaluate_deterministic(game, s):
    """Winning probability ``sum_{x,y} mu(x,y) V(x, y, f(x), g(y))``."""
    f = np.asarray(s.f, dtype=int)
    g = np.asarray(s.g, dtype=int)
    if f.shape != (game.nx,) or g.shape != (game.ny,):
        raise ValueError("strategy maps must be total on X and Y")
    x, y = np.indices((game.nx, game.ny))
    return float(np.sum(game.mu * game.predicate[x, y, f[x], g[y]]))


def _best_response_block(game, fs):
    # payoff[F, y, b] = sum_x mu(x,y) V(x, y, f(x), b)
    payoff = np.zeros((fs.shape[0], game.ny, game.nb))
    for x in range(game.nx):
        payoff += game.mu[x][None, :, None] * game.predicate[x][:, fs[:, x], :].transpose(1, 0, 2)
    best_b = payoff.argmax(axis=2)
    values = payoff.max(axis=2).sum(axis=1)
    return values, best_b


def classical_value(game, budget=DEFAULT_STRATEGY_BUDGET, chunk=4096):
    """Exact classical value by enumerating Alice's maps with Bob best-responding.

    For each ``f`` the optimal ``g`` decouples over ``y``, so this equals the
    maximum over all ``na**nx * nb**ny`` deterministic pairs. Ties resolve to
    the lexicographically smallest ``(f, g)``.

    Returns:
        (value, DeterministicStrategy)

    Raises:
        BudgetExceededError: the pair count exceeds ``budget``.
    """
    required = game.na ** game.nx * game.nb ** game.ny
    if required > budget:
        raise BudgetExceededError(
            f"classical search needs {required} strategy pairs, budget is {budget}", required, budget
        )
    n_f = game.na ** game.nx
    starts = list(range(0, n_f, chunk))

    def block(start):
        idx = np.arange(start, min(n_f, start + chunk))
        fs = np.stack(np.unravel_index(idx, (game.na,) * game.nx), axis=1) if game.nx else np.zeros((idx.size, 0), int)
        vals, best_b = _best_response_block(game, fs)
        return idx, vals, best_b

    workers = min(n_threads(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(block, starts))
    else:
        parts = [block(s) for s in starts]
    # reduce after the fact so the tie-break does not depend on scheduling
    values = np.concatenate([p[1] for p in parts])
    best = values.max()
    pos = int(np.flatnonzero(values >= best - 1e-12)[0])
    for idx, _, best_b in parts:
        if idx[0] <= pos <= idx[-1]:
            g = tuple(int(b) for b in best_b[pos - idx[0]])
            break
    f = tuple(int(a) for a in np.unravel_index(pos, (game.na,) * game.nx)) if game.nx else ()
    s = DeterministicStrategy(f, g)
    return evaluate_deterministic(game, s), s


def product_game(game, k, budget=DEFAULT_SIZE_BUDGET):
    """The k-fold parallel repetition ``G^k``: product questions, win iff every coordinate wins."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    size = (game.nx * game.ny * game.na * game.nb) ** k
    if size > budget:
        raise BudgetExceededError(f"G^{k} has {size} predicate entries, budget is {budget}", size, budget)
    mu, pred = game.mu, game.predicate
    for _ in range(k - 1):
        mu = np.kron(mu, game.mu)
        nx, ny, na, nb = pred.shape
        pred = np.einsum("ijkl,mnop->imjnkolp", pred, game.predicate).reshape(
            nx * game.nx, ny * game.ny, na * game.na, nb * game.nb
        )
    return Game(mu, pred, game.tol)


def game_to_dict(game):
    x, y, a, b = np.nonzero(game.predicate)
    return {
        "sizes": {"nx": game.nx, "ny": game.ny, "na": game.na, "nb": game.nb},
        "mu": game.mu.tolist(),
        "predicate": [[int(i), int(j), int(k), int(l)] for i, j, k, l in zip(x, y, a, b)],
    }


def game_from_dict(doc):
    """Build a Game from the structured game document.

    Raises:
        GameFormatError: with the offending field in the message.
    """
    if not isinstance(doc, dict):
        raise GameFormatError("game document must be an object")
    try:
        sizes = doc["sizes"]
        nx, ny, na, nb = (int(sizes[k]) for k in ("nx", "ny", "na", "nb"))
    except (KeyError, TypeError, ValueError) as exc:
        raise GameFormatError(f"field 'sizes': expected integers nx, ny, na, nb ({exc})") from None
    if min(nx, ny, na, nb) < 1:
        raise GameFormatError("field 'sizes': all sizes must be positive")
    try:
        mu = np.array(doc["mu"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise GameFormatError(f"field 'mu': expected a nested numeric array ({exc})") from None
    if mu.shape != (nx, ny):
        raise GameFormatError(f"field 'mu': shape {mu.shape}, expected ({nx}, {ny})")
    pred = np.zeros((nx, ny, na, nb), dtype=bool)
    quads = doc.get("predicate")
    if not isinstance(quads, list):
        raise GameFormatError("field 'predicate': expected a list of [x, y, a, b] quadruples")
    for n, q in enumerate(quads):
        try:
            i, j, k, l = (int(v) for v in q)
            if not (0 <= i < nx and 0 <= j < ny and 0 <= k < na and 0 <= l < nb):
                raise ValueError("index out of range")
        except (TypeError, ValueError) as exc:
            raise GameFormatError(f"field 'predicate', entry {n}: {q!r} ({exc})") from None
        pred[i, j, k, l] = True
    try:
        return Game(mu, pred)
    except ValueError as exc:
        raise GameFormatError(f"field 'mu': {exc}") from None


BUILTIN_GAMES = {"chsh": chsh}


def load_game(source):
    """Load a built-in game by name or a JSON game file.

    Raises:
        GameFormatError: unreadable file, bad JSON (with line/column) or bad fields.
    """
    if str(source).lower() in BUILTIN_GAMES:
        return BUILTIN_GAMES[str(source).lower()]()
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise GameFormatError(f"cannot read game file {source!r}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return game_from_dict(doc)


def save_game(game, path):
    Path(path).write_text(json.dumps(game_to_dict(game), indent=1) + "\n")
