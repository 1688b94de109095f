"""Small dense linear-algebra helpers with reproducible eigenvector choices."""

import os

import numpy as np

DEFAULT_TOL = 1e-9
SUPPORT_RTOL = 1e-10


def n_threads():
    """Worker cap taken from ``GAMES_LAB_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("GAMES_LAB_THREADS", "1")))
    except ValueError:
        return 1


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator`` (PCG64).

    Passing a Generator returns it unchanged, so callers own the stream.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit integer seed or Generator is required")
    return np.random.default_rng(seed)


def hermitian_part(m):
    return 0.5 * (m + m.conj().T)


def fix_phase(v, atol=1e-12):
    """Rotate ``v`` so its first entry above ``atol`` in modulus is real positive."""
    idx = np.flatnonzero(np.abs(v) > atol)
    if idx.size == 0:
        return v
    z = v[idx[0]]
    return v * (abs(z) / z)


def _canonical_basis(q, atol=1e-8):
    # Gram-Schmidt of the projector's columns taken in index order; depends on
    # span(q) only, and the pivots come out in ascending order.
    proj = q @ q.conj().T
    m = q.shape[1]
    basis = []
    for i in range(proj.shape[0]):
        v = proj[:, i].copy()
        for b in basis:
            v -= b * (b.conj() @ v)
        nrm = np.linalg.norm(v)
        if nrm > atol:
            basis.append(fix_phase(v / nrm))
            if len(basis) == m:
                break
    return np.column_stack(basis)


def canonical_eigh(h, rtol=1e-10):
    """Eigendecomposition with a deterministic basis.

    Eigenvalues are sorted in descending order. Inside a degenerate cluster
    (relative gap below ``rtol``) the eigenvectors are re-chosen from the
    eigenspace itself, ordered by ascending pivot index, and every vector's
    first nonzero entry is made real positive.

    Returns:
        (w, v): eigenvalues, eigenvectors as columns.
    """
    h = hermitian_part(np.asarray(h, dtype=complex))
    w, v = np.linalg.eigh(h)
    w = w[::-1]
    v = v[:, ::-1]
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    out = np.empty_like(v)
    i = 0
    n = w.size
    while i < n:
        j = i + 1
        while j < n and abs(w[j] - w[i]) <= rtol * scale:
            j += 1
        if j - i == 1:
            out[:, i] = fix_phase(v[:, i])
        else:
            out[:, i:j] = _canonical_basis(v[:, i:j])
        i = j
    return w, out


def psd_sqrt(m):
    """Matrix square root of a Hermitian PSD matrix; tiny negative eigenvalues clamp to 0."""
    w, v = np.linalg.eigh(hermitian_part(m))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def orthonormal_span(mats, rtol=1e-12):
    """Orthonormal basis (columns) for the joint column span of ``mats``."""
    stacked = np.hstack(mats)
    u, s, _ = np.linalg.svd(stacked, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return u[:, :0]
    keep = s > rtol * s[0]
    return u[:, keep]


def haar_unitary(d, rng):
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_unit_vector(d, rng):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_distribution(n, rng):
    """Squared-Gaussian weights normalised to 1 (full support almost surely)."""
    g = rng.normal(size=n) ** 2 + 1e-12
    return g / g.sum()
