"""Quantum-information functionals on finite-dimensional density operators.

All logarithms are base 2, so entropies and relative entropies are in bits.
The trace norm carries no 1/2 factor: ``trace_norm_distance`` ranges over
[0, 2].
"""

import math
from dataclasses import dataclass

import numpy as np

from ._linalg import (
    DEFAULT_TOL,
    SUPPORT_RTOL,
    canonical_eigh,
    fix_phase,
    hermitian_part,
)
from .exceptions import DimensionMismatchError, InvalidStateError

__all__ = [
    "DensityOperator",
    "ClassicalQuantumState",
    "PurificationPair",
    "trace_norm_distance",
    "fidelity",
    "von_neumann_entropy",
    "shannon_entropy",
    "relative_entropy",
    "relative_min_entropy",
    "mutual_information",
    "conditional_mutual_information",
    "partial_trace",
    "purify",
    "uhlmann_unitary",
    "purification_overlap",
    "states_on_joint_support",
]


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A PSD, unit-trace complex matrix, validated to within ``tol``."""

    matrix: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise InvalidStateError(f"density matrix must be square and non-empty, got shape {m.shape}")
        herm_err = float(np.max(np.abs(m - m.conj().T)))
        if herm_err > self.tol:
            raise InvalidStateError(f"matrix is not Hermitian (max |M - M^dag| = {herm_err:.3e})")
        m = hermitian_part(m)
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > self.tol:
            raise InvalidStateError(f"trace {tr!r} differs from 1 by more than {self.tol}")
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -self.tol:
            raise InvalidStateError(f"matrix has negative eigenvalue {lo:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @classmethod
    def from_vector(cls, vec, tol=DEFAULT_TOL):
        v = np.asarray(vec, dtype=complex).ravel()
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > tol:
            raise InvalidStateError(f"state vector has norm {nrm!r}")
        return cls(np.outer(v, v.conj()), tol)

    @classmethod
    def from_probabilities(cls, p, tol=DEFAULT_TOL):
        return cls(np.diag(np.asarray(p, dtype=float)), tol)

    @classmethod
    def maximally_mixed(cls, d):
        return cls(np.eye(d) / d)

    def eigenvalues(self):
        """Eigenvalues in descending order."""
        return np.linalg.eigvalsh(self.matrix)[::-1]

    def kron(self, other):
        return DensityOperator(np.kron(self.matrix, other.matrix), max(self.tol, other.tol))


@dataclass(frozen=True, eq=False)
class ClassicalQuantumState:
    """``sum_x weights[x] |x><x| (x) blocks[x]``."""

    weights: np.ndarray
    blocks: tuple
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if np.any(w < -self.tol) or abs(w.sum() - 1.0) > self.tol:
            raise InvalidStateError("weights must be a probability vector")
        blocks = tuple(b if isinstance(b, DensityOperator) else DensityOperator(b) for b in self.blocks)
        if len(blocks) != w.size:
            raise InvalidStateError(f"{w.size} weights but {len(blocks)} blocks")
        if len({b.dim for b in blocks}) > 1:
            raise InvalidStateError("all blocks must share one dimension")
        object.__setattr__(self, "weights", np.clip(w, 0.0, None))
        object.__setattr__(self, "blocks", blocks)

    @property
    def block_dim(self):
        return self.blocks[0].dim

    def to_density(self):
        """Block-diagonal density operator with the classical register first."""
        n, d = self.weights.size, self.block_dim
        m = np.zeros((n * d, n * d), dtype=complex)
        for x, (w, b) in enumerate(zip(self.weights, self.blocks)):
            m[x * d:(x + 1) * d, x * d:(x + 1) * d] = w * b.matrix
        return DensityOperator(m, self.tol)


@dataclass(frozen=True, eq=False)
class PurificationPair:
    """Unit vector on ``system (x) purifier``, stored row-major (system index slowest)."""

    state: np.ndarray
    system_dim: int
    purifier_dim: int
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        v = np.asarray(self.state, dtype=complex).ravel()
        if v.size != self.system_dim * self.purifier_dim:
            raise DimensionMismatchError(
                f"vector of length {v.size} does not match {self.system_dim} x {self.purifier_dim}"
            )
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > self.tol:
            raise InvalidStateError(f"purification has norm {nrm!r}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "state", v)

    @classmethod
    def from_matrix(cls, m, tol=DEFAULT_TOL):
        m = np.asarray(m, dtype=complex)
        return cls(m.ravel(), m.shape[0], m.shape[1], tol)

    @property
    def matrix(self):
        return self.state.reshape(self.system_dim, self.purifier_dim)

    def reduced(self):
        m = self.matrix
        return DensityOperator(m @ m.conj().T, self.tol)

    def padded(self, purifier_dim):
        if purifier_dim < self.purifier_dim:
            raise DimensionMismatchError("cannot shrink a purifier")
        m = np.zeros((self.system_dim, purifier_dim), dtype=complex)
        m[:, :self.purifier_dim] = self.matrix
        return PurificationPair.from_matrix(m, self.tol)

    def apply_purifier_unitary(self, u):
        """Return ``(I (x) u)|state>``."""
        return PurificationPair.from_matrix(self.matrix @ np.asarray(u).T, self.tol)


def _check_same_dim(rho, sigma):
    if rho.dim != sigma.dim:
        raise DimensionMismatchError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")


def trace_norm_distance(rho, sigma):
    """``||rho - sigma||_1``, the sum of singular values of the difference."""
    _check_same_dim(rho, sigma)
    return float(np.sum(np.abs(np.linalg.eigvalsh(rho.matrix - sigma.matrix))))


def fidelity(rho, sigma):
    """``F(rho, sigma) = ||sqrt(rho) sqrt(sigma)||_1`` (not squared)."""
    _check_same_dim(rho, sigma)
    # eigenvalues below the eigensolver's absolute accuracy are round-off;
    # keeping them would add O(sqrt(machine eps)) to the result
    s = np.linalg.svd(_sqrt_factor(rho).conj().T @ _sqrt_factor(sigma), compute_uv=False)
    return float(min(1.0, np.sum(s)))


def _sqrt_factor(rho):
    w, v = np.linalg.eigh(rho.matrix)
    keep = w > 10 * rho.dim * np.finfo(float).eps * max(w[-1], 1e-300)
    return v[:, keep] * np.sqrt(w[keep])


def shannon_entropy(p):
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def _spectrum(rho):
    w = np.clip(np.linalg.eigvalsh(rho.matrix), 0.0, None)
    return w[w > SUPPORT_RTOL * max(w.max(), 1e-300)]


def von_neumann_entropy(rho):
    """``S(rho) = -Tr rho log2 rho``; zero eigenvalues contribute nothing."""
    w = _spectrum(rho)
    return float(max(0.0, -np.sum(w * np.log2(w))))


def _support(sigma):
    w, v = np.linalg.eigh(sigma.matrix)
    keep = w > SUPPORT_RTOL * w.max()
    return w[keep], v[:, keep]


def relative_entropy(rho, sigma):
    """``D(rho || sigma)`` in bits, ``math.inf`` when supp(rho) is not inside supp(sigma)."""
    _check_same_dim(rho, sigma)
    ws, vs = _support(sigma)
    diag = np.einsum("ij,jk,ki->i", vs.conj().T, rho.matrix, vs).real
    outside = float(np.trace(rho.matrix).real - diag.sum())
    if outside > max(rho.tol, sigma.tol):
        return math.inf
    wr = _spectrum(rho)
    d = float(np.sum(wr * np.log2(wr)) - np.sum(diag * np.log2(ws)))
    return max(0.0, d)


def relative_min_entropy(rho, sigma):
    """``min{lam : rho <= 2**lam sigma}`` computed on supp(sigma); ``math.inf`` on support violation."""
    _check_same_dim(rho, sigma)
    ws, vs = _support(sigma)
    r = vs.conj().T @ rho.matrix @ vs
    outside = float(np.trace(rho.matrix).real - np.trace(r).real)
    if outside > max(rho.tol, sigma.tol):
        return math.inf
    s = 1.0 / np.sqrt(ws)
    m = hermitian_part(s[:, None] * r * s[None, :])
    return float(np.log2(np.linalg.eigvalsh(m)[-1]))


def partial_trace(state, keep, dims=None):
    """Reduce ``state`` to the subsystems in ``keep``.

    Args:
        state: a DensityOperator (then ``dims`` lists its tensor factors and
            ``keep`` holds factor indices) or a LabeledPureState (``keep``
            holds register names).
        keep: subsystems to keep; the result is ordered by factor order.
        dims: factor dimensions for a DensityOperator.

    Returns:
        DensityOperator over the kept factors.
    """
    if hasattr(state, "layout"):
        from .multireg import reduced_state

        return reduced_state(state, keep)
    if dims is None:
        raise ValueError("dims is required for a DensityOperator")
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != state.dim:
        raise DimensionMismatchError(f"factors {dims} do not multiply to {state.dim}")
    keep = sorted(set(keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"unknown subsystem index in {keep}")
    traced = [i for i in range(len(dims)) if i not in keep]
    n = len(dims)
    t = state.matrix.reshape(dims + dims)
    t = t.transpose(keep + traced + [n + i for i in keep] + [n + i for i in traced])
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    dt = int(np.prod([dims[i] for i in traced])) if traced else 1
    m = np.einsum("ajbj->ab", t.reshape(dk, dt, dk, dt))
    return DensityOperator(m, state.tol)


def mutual_information(rho, dims):
    """``I(X:Y) = S(X) + S(Y) - S(XY)`` for ``rho`` on ``X (x) Y``, ``dims = (dX, dY)``."""
    dx, dy = dims
    if dx * dy != rho.dim:
        raise DimensionMismatchError(f"bipartition {dx} x {dy} does not factor dimension {rho.dim}")
    rx = partial_trace(rho, [0], [dx, dy])
    ry = partial_trace(rho, [1], [dx, dy])
    i = von_neumann_entropy(rx) + von_neumann_entropy(ry) - von_neumann_entropy(rho)
    return max(0.0, i)


def conditional_mutual_information(cq, dims):
    """``I(X:Z|Y)`` where Y is the classical alphabet of ``cq`` and each block lives on ``X (x) Z``."""
    return float(sum(w * mutual_information(b, dims) for w, b in zip(cq.weights, cq.blocks) if w > 0))


def purify(rho):
    """Canonical purification ``sum_i sqrt(lam_i) |v_i>|i>`` with the purifier of full dimension."""
    w, v = canonical_eigh(rho.matrix)
    m = v * np.sqrt(np.clip(w, 0.0, None))[None, :]
    m = m / np.linalg.norm(m)
    return PurificationPair.from_matrix(m, rho.tol)


def purification_overlap(psi, phi, u=None):
    """``<phi|(I (x) u)|psi>``; ``u`` defaults to the identity."""
    a = psi.matrix if u is None else psi.matrix @ np.asarray(u).T
    return complex(np.vdot(phi.matrix.ravel(), a.ravel()))


def uhlmann_unitary(psi, phi):
    """Unitary ``U`` on psi's purifier maximising ``|<phi|(I (x) U)|psi>|``.

    The maximum equals ``fidelity`` of the two reduced states. When the
    purifiers differ in size the smaller one is padded with zero-weight
    dimensions first, and ``U`` acts on the padded space.
    """
    if psi.system_dim != phi.system_dim:
        raise DimensionMismatchError(f"system dimensions differ: {psi.system_dim} vs {phi.system_dim}")
    p = max(psi.purifier_dim, phi.purifier_dim)
    a = psi.matrix if psi.purifier_dim == p else psi.padded(p).matrix
    b = phi.matrix if phi.purifier_dim == p else phi.padded(p).matrix
    k = b.conj().T @ a
    left, s, right_h = np.linalg.svd(k)
    right = right_h.conj().T
    for i in range(p):
        q = fix_phase(right[:, i])
        nz = np.flatnonzero(np.abs(right[:, i]) > 1e-12)
        if nz.size:
            ph = q[nz[0]] / right[nz[0], i]
            right[:, i] = q
            left[:, i] = left[:, i] * ph
    w = right @ left.conj().T
    return w.T


def states_on_joint_support(*factors, tol=DEFAULT_TOL):
    """Compress states given as factors ``F`` (``rho = F F^dag``) onto their joint support.

    Every functional in this module is invariant under the isometry onto
    the joint column span, so large low-rank states can be compared at the
    cost of their rank.
    """
    from ._linalg import orthonormal_span

    q = orthonormal_span([np.asarray(f) for f in factors])
    out = []
    for f in factors:
        g = q.conj().T @ f
        m = g @ g.conj().T
        out.append(DensityOperator(m / np.trace(m).real, tol))
    return out
