"""Finite-dimensional entangled strategies and see-saw lower bounds on the entangled value.

Values found here are lower bounds on the entangled value at a fixed local
dimension ``d`` ("omega*_d lower bound"); nothing in this module certifies
an upper bound.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._linalg import DEFAULT_TOL, canonical_eigh, check_random_state, haar_unitary, hermitian_part, psd_sqrt
from .exceptions import BudgetExceededError, DimensionMismatchError, InvalidStateError, UnsupportedArityError

logger = logging.getLogger(__name__)

DEFAULT_STRATEGY_SIZE_BUDGET = 2 ** 26
CONVERGENCE_GAIN = 1e-10


@dataclass(frozen=True, eq=False)
class EntangledStrategy:
    """Shared pure state on ``C^da (x) C^db`` plus one POVM per question.

    ``alice_povms`` has shape ``(nx, na, da, da)`` and ``bob_povms`` shape
    ``(ny, nb, db, db)``; ``shared`` is row-major with Alice's index first.
    """

    shared: np.ndarray
    alice_povms: np.ndarray
    bob_povms: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        a = np.array(self.alice_povms, dtype=complex)
        b = np.array(self.bob_povms, dtype=complex)
        psi = np.array(self.shared, dtype=complex).ravel()
        for name, m in (("alice_povms", a), ("bob_povms", b)):
            if m.ndim != 4 or m.shape[2] != m.shape[3]:
                raise DimensionMismatchError(f"{name} must have shape (questions, answers, d, d), got {m.shape}")
            _check_povms(m, self.tol, name)
        if psi.size != a.shape[2] * b.shape[2]:
            raise DimensionMismatchError(f"shared state of length {psi.size} for local dims {a.shape[2]}, {b.shape[2]}")
        nrm = np.linalg.norm(psi)
        if abs(nrm - 1.0) > self.tol:
            raise InvalidStateError(f"shared state has norm {nrm!r}")
        for m in (a, b, psi):
            m.setflags(write=False)
        object.__setattr__(self, "alice_povms", a)
        object.__setattr__(self, "bob_povms", b)
        object.__setattr__(self, "shared", psi)

    @property
    def da(self):
        return self.alice_povms.shape[2]

    @property
    def db(self):
        return self.bob_povms.shape[2]

    @property
    def shape(self):
        """``(nx, ny, na, nb)`` implied by the POVM arrays."""
        return self.alice_povms.shape[0], self.bob_povms.shape[0], self.alice_povms.shape[1], self.bob_povms.shape[1]


def _check_povms(m, tol, name):
    d = m.shape[2]
    herm = np.max(np.abs(m - m.conj().swapaxes(-1, -2))) if m.size else 0.0
    if herm > tol:
        raise InvalidStateError(f"{name}: element not Hermitian ({herm:.3e})")
    lo = np.linalg.eigvalsh(hermitian_part_batch(m)).min() if m.size else 0.0
    if lo < -tol:
        raise InvalidStateError(f"{name}: element with negative eigenvalue {lo:.3e}")
    err = np.max(np.abs(m.sum(axis=1) - np.eye(d)[None]))
    if err > tol:
        raise InvalidStateError(f"{name}: POVM elements do not sum to identity ({err:.3e})")


def hermitian_part_batch(m):
    return 0.5 * (m + m.conj().swapaxes(-1, -2))


@dataclass
class SeesawReport:
    value_trace: list = field(default_factory=list)
    final_value: float = 0.0
    restarts_used: int = 0
    converged: bool = False
    best_restart: int = 0


def _check_shapes(game, s):
    if s.shape != game.sizes:
        raise DimensionMismatchError(f"strategy is for sizes {s.shape}, game has {game.sizes}")


def outcome_distribution(s):
    """``p[x, y, a, b] = <psi| A^x_a (x) B^y_b |psi>``."""
    psi = s.shared.reshape(s.da, s.db)
    p = np.einsum("ij,xaik,kl,ybjl->xyab", psi.conj(), s.alice_povms, psi, s.bob_povms, optimize=True)
    return np.clip(p.real, 0.0, None)


def evaluate(game, s):
    """Winning probability of ``s`` on ``game``, clamped to [0, 1]."""
    _check_shapes(game, s)
    p = outcome_distribution(s)
    v = float(np.einsum("xy,xyab,xyab->", game.mu, game.predicate, p))
    return min(1.0, max(0.0, v))


def from_deterministic(game, strategy):
    """Embed a deterministic strategy at local dimensions 1."""
    a = np.zeros((game.nx, game.na, 1, 1))
    b = np.zeros((game.ny, game.nb, 1, 1))
    a[np.arange(game.nx), list(strategy.f), 0, 0] = 1.0
    b[np.arange(game.ny), list(strategy.g), 0, 0] = 1.0
    return EntangledStrategy(np.ones(1), a, b)


def _qubit_basis_projectors(theta):
    v0 = np.array([np.cos(theta), np.sin(theta)])
    v1 = np.array([-np.sin(theta), np.cos(theta)])
    return np.stack([np.outer(v0, v0), np.outer(v1, v1)])


def tsirelson_chsh():
    """Optimal CHSH strategy: maximally entangled qubits, Alice at 0 and pi/4, Bob at +-pi/8."""
    phi_plus = np.array([1, 0, 0, 1]) / np.sqrt(2)
    alice = np.stack([_qubit_basis_projectors(0.0), _qubit_basis_projectors(np.pi / 4)])
    bob = np.stack([_qubit_basis_projectors(np.pi / 8), _qubit_basis_projectors(-np.pi / 8)])
    return EntangledStrategy(phi_plus, alice, bob)


def _kron_povms(p, q):
    n1, m1, d1, _ = p.shape
    n2, m2, d2, _ = q.shape
    return np.einsum("xaij,ybkl->xyabikjl", p, q).reshape(n1 * n2, m1 * m2, d1 * d2, d1 * d2)


def product_strategy(s, k, budget=DEFAULT_STRATEGY_SIZE_BUDGET):
    """Play ``s`` independently on each of ``k`` coordinates (coordinate-major indices)."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    nx, ny, na, nb = s.shape
    size = max((nx * na * s.da ** 2) ** k, (ny * nb * s.db ** 2) ** k)
    if size > budget:
        raise BudgetExceededError(f"{k}-fold strategy needs {size} POVM entries, budget is {budget}", size, budget)
    psi = s.shared.reshape(s.da, s.db)
    a, b, state = s.alice_povms, s.bob_povms, psi
    for _ in range(k - 1):
        a = _kron_povms(a, s.alice_povms)
        b = _kron_povms(b, s.bob_povms)
        d1a, d1b = state.shape
        state = np.einsum("ij,kl->ikjl", state, psi).reshape(d1a * s.da, d1b * s.db)
    return EntangledStrategy(state.ravel(), a, b, s.tol)


def simulate(game, s, shots, rng):
    """Sample ``shots`` rounds: questions from ``mu``, answers by the Born rule.

    Returns:
        int array of shape ``(shots, 4)`` with columns x, y, a, b.
    """
    rng = check_random_state(rng)
    _check_shapes(game, s)
    p = outcome_distribution(s)
    p = p / p.sum(axis=(2, 3), keepdims=True)
    q = game.mu.ravel() / game.mu.sum()
    cells = rng.choice(q.size, size=shots, p=q)
    out = np.empty((shots, 4), dtype=int)
    out[:, 0], out[:, 1] = np.unravel_index(cells, game.mu.shape)
    for c in np.unique(cells):
        rows = np.flatnonzero(cells == c)
        x, y = np.unravel_index(c, game.mu.shape)
        pab = p[x, y].ravel()
        draws = rng.choice(pab.size, size=rows.size, p=pab / pab.sum())
        out[rows, 2], out[rows, 3] = np.unravel_index(draws, p.shape[2:])
    return out


def _random_projective(n_questions, n_answers, d, rng):
    out = np.zeros((n_questions, n_answers, d, d), dtype=complex)
    for x in range(n_questions):
        u = haar_unitary(d, rng)
        for c in range(d):
            out[x, c % n_answers] += np.outer(u[:, c], u[:, c].conj())
    return out


def random_povms(n_questions, n_answers, d, rng):
    """General POVMs ``S^{-1/2} G_a S^{-1/2}`` from random Wishart elements ``G_a``."""
    out = np.zeros((n_questions, n_answers, d, d), dtype=complex)
    for x in range(n_questions):
        g = rng.normal(size=(n_answers, d, d)) + 1j * rng.normal(size=(n_answers, d, d))
        g = g @ g.conj().transpose(0, 2, 1)
        w, v = np.linalg.eigh(g.sum(axis=0))
        inv = (v / np.sqrt(w)) @ v.conj().T
        out[x] = hermitian_part_batch(inv @ g @ inv)
    return out


def random_strategy(nx, ny, na, nb, d, rng):
    """Random strategy with local dimension ``d``: a Gaussian shared state and random POVMs."""
    rng = check_random_state(rng)
    psi = rng.normal(size=d * d) + 1j * rng.normal(size=d * d)
    return EntangledStrategy(
        psi / np.linalg.norm(psi), random_povms(nx, na, d, rng), random_povms(ny, nb, d, rng)
    )


def _game_operator(game, a, b):
    w = np.einsum("xy,xyab,xaij,ybkl->ikjl", game.mu, game.predicate.astype(float), a, b, optimize=True)
    d = a.shape[2] * b.shape[2]
    return hermitian_part(w.reshape(d, d))


def _state_step(game, a, b):
    _, v = canonical_eigh(_game_operator(game, a, b))
    return v[:, 0]


def _effective_alice(game, psi, b):
    # R[x, a] = Tr_B[(I (x) Q^x_a) |psi><psi|], Q^x_a = sum_{y,b: V} mu(x,y) B^y_b
    q = np.einsum("xy,xyab,ybkl->xakl", game.mu, game.predicate.astype(float), b, optimize=True)
    r = np.einsum("ij,xalj,kl->xaik", psi, q, psi.conj(), optimize=True)
    return hermitian_part_batch(r)


def _effective_bob(game, psi, a):
    p = np.einsum("xy,xyab,xaij->ybij", game.mu, game.predicate.astype(float), a, optimize=True)
    r = np.einsum("ij,ybki,kl->ybjl", psi, p, psi.conj(), optimize=True)
    return hermitian_part_batch(r)


def _binary_update(r):
    out = np.empty_like(r)
    d = r.shape[-1]
    for x in range(r.shape[0]):
        w, v = canonical_eigh(r[x, 0] - r[x, 1])
        keep = w >= 0
        p0 = v[:, keep] @ v[:, keep].conj().T
        out[x, 0] = p0
        out[x, 1] = np.eye(d) - p0
    return out


def _povm_objective(povm, r):
    return float(np.einsum("aij,aji->", povm, r).real)


def _retract(m):
    # PSD part of each element, renormalised to sum to the identity
    w, v = np.linalg.eigh(hermitian_part_batch(m))
    pos = np.einsum("aij,aj,akj->aik", v, np.clip(w, 0.0, None), v.conj())
    t = pos.sum(axis=0)
    t_inv_half = np.linalg.pinv(psd_sqrt(t), hermitian=True)
    return hermitian_part_batch(np.einsum("ij,ajk,kl->ail", t_inv_half, pos, t_inv_half))


def _projective_candidates(r):
    """Projective measurements built from eigenbases of ``R_a`` and ``R_a - R_b``.

    Each basis vector goes to the outcome with the largest weight on it;
    constant answers are included, so a deterministic reply is always
    available to the ascent.
    """
    n, d = r.shape[0], r.shape[-1]
    bases = [np.linalg.eigh(r[a])[1] for a in range(n)]
    bases += [np.linalg.eigh(r[a] - r[b])[1] for a in range(n) for b in range(a + 1, n)]
    out = []
    for u in bases:
        weights = np.einsum("ic,aij,jc->ca", u.conj(), r, u).real
        best = weights.argmax(axis=1)
        m = np.zeros_like(r)
        for c in range(d):
            m[best[c]] += np.outer(u[:, c], u[:, c].conj())
        out.append(m)
    for a in range(n):
        m = np.zeros_like(r)
        m[a] = np.eye(d)
        out.append(m)
    return out


def _ascent_update(current, r, max_steps=200):
    out = current.copy()
    for x in range(r.shape[0]):
        povm = current[x]
        val = _povm_objective(povm, r[x])
        for cand in _projective_candidates(r[x]):
            cval = _povm_objective(cand, r[x])
            if cval > val + CONVERGENCE_GAIN:
                povm, val = cand, cval
        eta = 1.0
        for _ in range(max_steps):
            cand = _retract(povm + eta * r[x])
            cval = _povm_objective(cand, r[x])
            if cval > val + CONVERGENCE_GAIN:
                povm, val = cand, cval
            else:
                eta *= 0.5
                if eta < 1e-12:
                    break
        out[x] = povm
    return out


def _update(r, current, binary):
    return _binary_update(r) if binary else _ascent_update(current, r)


def _one_restart(game, d, iters, rng):
    a = _random_projective(game.nx, game.na, d, rng)
    b = _random_projective(game.ny, game.nb, d, rng)
    binary_a, binary_b = game.na == 2, game.nb == 2
    trace = []
    converged = False
    psi = _state_step(game, a, b).reshape(d, d)
    for _ in range(iters):
        a = _update(_effective_alice(game, psi, b), a, binary_a)
        b = _update(_effective_bob(game, psi, a), b, binary_b)
        psi = _state_step(game, a, b).reshape(d, d)
        s = EntangledStrategy(psi.ravel(), a, b)
        trace.append(evaluate(game, s))
        if len(trace) > 1 and trace[-1] - trace[-2] < CONVERGENCE_GAIN:
            converged = True
            break
    return s, trace, converged


def seesaw(game, d, iters=500, restarts=10, rng_seed=42, ascent_fallback=True):
    """See-saw ascent for a lower bound on the entangled value at local dimension ``d``.

    Each iteration sets the shared state to the top eigenvector of the game
    operator, then re-optimises Alice's POVMs with Bob's fixed, then Bob's.
    With two answers the measurement update is exact (projector onto the
    nonnegative eigenspace of ``R_0 - R_1``); with more answers a
    step-halving ascent is used and the result is heuristic only.

    Restart ``r`` is seeded with ``rng_seed + r``; the best restart wins,
    lowest index first on ties.

    Returns:
        (EntangledStrategy, SeesawReport)
    """
    if d < 1 or iters < 1 or restarts < 1:
        raise ValueError("d, iters and restarts must be positive")
    if (game.na > 2 or game.nb > 2) and not ascent_fallback:
        raise UnsupportedArityError(
            f"exact see-saw updates need binary answers, got na={game.na}, nb={game.nb}"
        )
    best = None
    for r in range(restarts):
        s, trace, converged = _one_restart(game, d, iters, np.random.default_rng(rng_seed + r))
        logger.debug("restart %d: value %.12f after %d iterations", r, trace[-1], len(trace))
        if best is None or trace[-1] > best[1][-1]:
            best = (s, trace, converged, r)
    s, trace, converged, r = best
    return s, SeesawReport(trace, trace[-1], restarts, converged, r)


def _encode_matrix(m):
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _decode_matrix(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def strategy_to_dict(s):
    return {
        "da": s.da,
        "db": s.db,
        "shared": [[float(z.real), float(z.imag)] for z in s.shared],
        "alice_povms": [[_encode_matrix(m) for m in povm] for povm in s.alice_povms],
        "bob_povms": [[_encode_matrix(m) for m in povm] for povm in s.bob_povms],
    }


def strategy_from_dict(doc, tol=DEFAULT_TOL):
    shared = np.array([complex(re, im) for re, im in doc["shared"]])
    a = np.array([[_decode_matrix(m) for m in povm] for povm in doc["alice_povms"]])
    b = np.array([[_decode_matrix(m) for m in povm] for povm in doc["bob_povms"]])
    if a.shape[2] != doc["da"] or b.shape[2] != doc["db"]:
        raise DimensionMismatchError("declared dimensions do not match the POVM matrices")
    return EntangledStrategy(shared, a, b, tol)


def save_strategy(s, path):
    Path(path).write_text(json.dumps(strategy_to_dict(s)) + "\n")


def load_strategy(path, tol=DEFAULT_TOL):
    return strategy_from_dict(json.loads(Path(path).read_text()), tol)
