"""Seeded random ensembles and drivers that check the information-theoretic toolkit numerically.

Every verifier returns a :class:`VerificationReport`. Slack is always
``rhs - lhs`` for an inequality ``lhs <= rhs`` and ``-|lhs - rhs|`` for an
equality; a trial is a violation when its slack drops below
``VIOLATION_TOL``. Trial ``t`` of a run with seed ``s`` draws from
``numpy.random.default_rng([s, t])``, so any row can be replayed alone.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._linalg import haar_unitary, random_distribution, random_unit_vector
from .multireg import LabeledPureState, Register, RegisterLayout, condition_on, entropy_of
from .qit import (
    ClassicalQuantumState,
    DensityOperator,
    PurificationPair,
    fidelity,
    mutual_information,
    partial_trace,
    purification_overlap,
    relative_entropy,
    relative_min_entropy,
    trace_norm_distance,
    uhlmann_unitary,
)

VIOLATION_TOL = -1e-7
UHLMANN_TOL = 1e-8
CSV_COLUMNS = ("trial", "seed", "lhs", "rhs", "slack")


@dataclass(frozen=True)
class RandomStateSpec:
    dim: int
    rank: int
    seed: int

    def __post_init__(self):
        if self.dim < 1 or not 1 <= self.rank <= self.dim:
            raise ValueError(f"need 1 <= rank <= dim, got rank={self.rank}, dim={self.dim}")


@dataclass
class VerificationReport:
    name: str
    trials: int = 0
    violations: int = 0
    worst_slack: float = math.inf
    rows: list = field(default_factory=list)
    skipped: int = 0
    informational: bool = False
    extra: dict = field(default_factory=dict)

    def add(self, trial, seed, lhs, rhs, equality=False):
        slack = -abs(lhs - rhs) if equality else rhs - lhs
        self.rows.append((trial, seed, float(lhs), float(rhs), float(slack)))
        self.trials += 1
        self.worst_slack = min(self.worst_slack, slack)
        if not slack >= VIOLATION_TOL:
            self.violations += 1

    @property
    def passed(self):
        return self.violations == 0

    def summary(self):
        tag = " (informational)" if self.informational else ""
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{self.name}{tag}: {status} trials={self.trials} violations={self.violations} "
            f"worst_slack={self.worst_slack:.3e}"
        )


def trial_rng(seed, trial):
    return np.random.default_rng([seed, trial])


def _random_factor(d, rank, rng):
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    return g / np.linalg.norm(g)


def random_density(spec, rng=None):
    """Rank-``spec.rank`` state ``G G^dag`` from a Gaussian purification.

    Args:
        spec: dimension, rank and seed.
        rng: optional Generator overriding ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    g = _random_factor(spec.dim, spec.rank, rng)
    return DensityOperator(g @ g.conj().T)


def _rand_state(d, rng, rank=None):
    rank = d if rank is None else rank
    return random_density(RandomStateSpec(d, rank, 0), rng)


def _pure_distance(a, b):
    return trace_norm_distance(DensityOperator.from_vector(a), DensityOperator.from_vector(b))


# ---------------------------------------------------------------------------
# one-sided and two-sided unitary simulation of a measurement

def lemma5_trial(nx, dims, rng, identical=False):
    """One instance of the one-sided simulation bound.

    Builds ``sum_x sqrt(mu(x)) |x x> |psi_x>`` on ``Xt X A B``, extracts
    ``U_x`` on ``Xt X A`` by Uhlmann and returns
    ``(lhs, rhs, uhlmann_gap)`` with ``lhs = E_x ||phi_x - U_x phi U_x^dag||_1``
    and ``rhs = 4 sqrt(I(X:B))``.
    """
    da, db = dims
    mu = random_distribution(nx, rng)
    base = random_unit_vector(da * db, rng)
    psis = [base if identical else random_unit_vector(da * db, rng) for _ in range(nx)]
    layout = RegisterLayout((Register("Xt", nx, True), Register("X", nx, True), Register("A", da), Register("B", db)))
    t = np.zeros((nx, nx, da * db), dtype=complex)
    for x in range(nx):
        t[x, x] = math.sqrt(mu[x]) * psis[x]
    phi = LabeledPureState.from_tensor(layout, t)
    eps = max(0.0, entropy_of(phi, ["X"]) + entropy_of(phi, ["B"]) - entropy_of(phi, ["X", "B"]))
    pair = PurificationPair.from_matrix(phi.matrix(["B"]))
    lhs, gap = 0.0, 0.0
    for x in range(nx):
        phi_x = condition_on(phi, {"X": x})[0]
        target = PurificationPair.from_matrix(phi_x.matrix(["B"]))
        u = uhlmann_unitary(pair, target)
        moved = pair.apply_purifier_unitary(u)
        gap = max(gap, abs(abs(purification_overlap(pair, target, u)) - fidelity(pair.reduced(), target.reduced())))
        lhs += mu[x] * _pure_distance(target.state, moved.state)
    return lhs, 4 * math.sqrt(eps), gap


def _two_sided_state(nx, ny, da, db, rng, correlated, product_state):
    if correlated:
        mu = random_distribution(nx * ny, rng).reshape(nx, ny)
    else:
        mu = np.outer(random_distribution(nx, rng), random_distribution(ny, rng))
    layout = RegisterLayout((
        Register("Xt", nx, True), Register("X", nx, True), Register("A", da),
        Register("Yt", ny, True), Register("Y", ny, True), Register("B", db),
    ))
    if product_state:
        alpha = [random_unit_vector(da, rng) for _ in range(nx)]
        beta = [random_unit_vector(db, rng) for _ in range(ny)]
    t = np.zeros((nx, nx, da, ny, ny, db), dtype=complex)
    for x in range(nx):
        for y in range(ny):
            if product_state:
                psi = np.outer(alpha[x], beta[y])
            else:
                psi = random_unit_vector(da * db, rng).reshape(da, db)
            t[x, x, :, y, y, :] = math.sqrt(mu[x, y]) * psi
    return mu, LabeledPureState.from_tensor(layout, t)


def lemma6_trial(nx, ny, dims, rng, correlated=False, product_state=False):
    """One instance of the two-sided simulation bound.

    Alice holds ``Xt X A`` and Bob ``Yt Y B``. ``U_x`` is Uhlmann's unitary
    towards the state with ``X`` measured to ``x``, ``V_y`` likewise for
    ``Y``. Returns ``(lhs, rhs, uhlmann_gap, product_gap)`` with
    ``rhs = 8 sqrt(eps) + 2 ||mu - mu_X mu_Y||_1``.
    """
    da, db = dims
    mu, phi = _two_sided_state(nx, ny, da, db, rng, correlated, product_state)
    alice, bob = ["Xt", "X", "A"], ["Yt", "Y", "B"]
    eps = max(
        entropy_of(phi, ["X"]) + entropy_of(phi, bob) - entropy_of(phi, ["X"] + bob),
        entropy_of(phi, ["Y"]) + entropy_of(phi, alice) - entropy_of(phi, ["Y"] + alice),
        0.0,
    )
    prod_gap = float(np.abs(mu - np.outer(mu.sum(axis=1), mu.sum(axis=0))).sum())
    m = phi.matrix(bob)  # rows: Bob (Yt Y B), columns: Alice (Xt X A)
    pair_b = PurificationPair.from_matrix(m)
    pair_a = PurificationPair.from_matrix(m.T)
    gap = 0.0
    us, vs = [], []
    for x in range(nx):
        target = PurificationPair.from_matrix(condition_on(phi, {"X": x})[0].matrix(bob))
        us.append(uhlmann_unitary(pair_b, target))
        gap = max(gap, abs(abs(purification_overlap(pair_b, target, us[-1])) - fidelity(pair_b.reduced(), target.reduced())))
    for y in range(ny):
        target = PurificationPair.from_matrix(condition_on(phi, {"Y": y})[0].matrix(bob).T)
        vs.append(uhlmann_unitary(pair_a, target))
        gap = max(gap, abs(abs(purification_overlap(pair_a, target, vs[-1])) - fidelity(pair_a.reduced(), target.reduced())))
    lhs = 0.0
    for x in range(nx):
        for y in range(ny):
            if mu[x, y] <= 0:
                continue
            target = condition_on(phi, {"X": x, "Y": y})[0].matrix(bob)
            moved = vs[y] @ m @ us[x].T
            lhs += mu[x, y] * _pure_distance(target.ravel(), moved.ravel())
    return lhs, 8 * math.sqrt(eps) + 2 * prod_gap, gap, prod_gap


def lemma3_trial(dim, rng, projector_rank=None):
    """Random pure state on ``A (x) B`` and a random projector on ``A``.

    Returns:
        (D_inf(rho_1 || rho), log2(1/q), q) where ``rho`` is Bob's marginal
        and ``rho_1`` his marginal given outcome 1.
    """
    psi = random_unit_vector(dim * dim, rng).reshape(dim, dim)
    r = int(rng.integers(1, dim)) if projector_rank is None else projector_rank
    basis = haar_unitary(dim, rng)[:, :r]
    p = basis @ basis.conj().T
    return _lemma3_values(psi, p)


def _lemma3_values(psi, p):
    proj = p @ psi
    q = float(np.linalg.norm(proj) ** 2)
    rho = DensityOperator(psi.T @ psi.conj())
    if q <= 0:
        return math.nan, math.inf, q
    g = proj / math.sqrt(q)
    rho1 = DensityOperator(g.T @ g.conj())
    return relative_min_entropy(rho1, rho), -math.log2(q), q


# ---------------------------------------------------------------------------
# drivers

def verify_lemma5(nx=3, dims=(3, 3), trials=500, seed=0, product_trials=0):
    """Check the ``4 sqrt(eps)`` bound on seeded random instances.

    ``product_trials`` extra instances use identical ``psi_x``; their
    distances are collected in ``extra["product_max_distance"]``.
    """
    rep = VerificationReport("lemma5")
    gaps = []
    for t in range(trials):
        lhs, rhs, gap = lemma5_trial(nx, dims, trial_rng(seed, t))
        rep.add(t, seed, lhs, rhs)
        gaps.append(gap)
    dist = []
    for t in range(trials, trials + product_trials):
        lhs, rhs, gap = lemma5_trial(nx, dims, trial_rng(seed, t), identical=True)
        rep.add(t, seed, lhs, rhs)
        gaps.append(gap)
        dist.append(lhs)
    _record_uhlmann(rep, gaps)
    rep.extra["product_max_distance"] = max(dist) if dist else 0.0
    return rep


def verify_lemma6(nx=2, ny=2, dims=(2, 2), trials=200, seed=0, correlated_trials=0):
    """Check ``8 sqrt(eps) + 2 ||mu - mu_X mu_Y||_1`` on product-``mu`` and correlated-``mu`` instances."""
    rep = VerificationReport("lemma6")
    gaps, prod = [], []
    for t in range(trials + correlated_trials):
        lhs, rhs, gap, pg = lemma6_trial(nx, ny, dims, trial_rng(seed, t), correlated=t >= trials)
        rep.add(t, seed, lhs, rhs)
        gaps.append(gap)
        if t >= trials:
            prod.append(pg)
    _record_uhlmann(rep, gaps)
    rep.extra["min_correlated_product_gap"] = min(prod) if prod else 0.0
    return rep


def _record_uhlmann(rep, gaps):
    worst = max(gaps) if gaps else 0.0
    rep.extra["uhlmann_max_gap"] = worst
    bad = sum(g > UHLMANN_TOL for g in gaps)
    rep.violations += bad


def verify_lemma3(dim=3, trials=200, seed=0):
    """Check ``D_inf(rho_1 || rho) <= log2(1/q)``; trials with ``q < 1e-6`` are skipped."""
    rep = VerificationReport("lemma3")
    for t in range(trials):
        d_inf, rhs, q = lemma3_trial(dim, trial_rng(seed, t))
        if q < 1e-6:
            rep.skipped += 1
            continue
        rep.add(t, seed, d_inf, rhs)
    return rep


# ---------------------------------------------------------------------------
# facts and propositions; each check returns (lhs, rhs) for lhs <= rhs

def _dim(rng):
    return int(rng.integers(2, 7))


def _fact1(rng):
    d = _dim(rng)
    rho, rho1, sigma, sigma1 = (_rand_state(d, rng) for _ in range(4))
    p = float(rng.uniform())
    mix = lambda a, b: DensityOperator(p * a.matrix + (1 - p) * b.matrix)
    lhs = relative_entropy(mix(rho, rho1), mix(sigma, sigma1))
    return lhs, p * relative_entropy(rho, sigma) + (1 - p) * relative_entropy(rho1, sigma1)


def _fact2(rng):
    n, d = int(rng.integers(2, 5)), int(rng.integers(2, 4))
    mu, mu1 = random_distribution(n, rng), random_distribution(n, rng)
    blocks = [_rand_state(d, rng) for _ in range(n)]
    blocks1 = [_rand_state(d, rng, int(rng.integers(1, d + 1))) for _ in range(n)]
    lhs = relative_entropy(
        ClassicalQuantumState(mu1, blocks1).to_density(), ClassicalQuantumState(mu, blocks).to_density()
    )
    classical = relative_entropy(DensityOperator.from_probabilities(mu1), DensityOperator.from_probabilities(mu))
    rhs = classical + sum(w * relative_entropy(b1, b) for w, b1, b in zip(mu1, blocks1, blocks))
    return lhs, rhs


def _bipartite(rng):
    dx, dy = int(rng.integers(2, 4)), int(rng.integers(2, 4))
    return dx, dy, _rand_state(dx * dy, rng, int(rng.integers(1, dx * dy + 1)))


def _fact3(rng):
    dx, dy, rho = _bipartite(rng)
    sigma, tau = _rand_state(dx, rng), _rand_state(dy, rng)
    return mutual_information(rho, (dx, dy)), relative_entropy(rho, sigma.kron(tau))


def _fact3_equality(rng):
    dx, dy, rho = _bipartite(rng)
    prod = partial_trace(rho, [0], [dx, dy]).kron(partial_trace(rho, [1], [dx, dy]))
    return relative_entropy(rho, prod), mutual_information(rho, (dx, dy))


def _pair(rng):
    d = _dim(rng)
    return _rand_state(d, rng, int(rng.integers(1, d + 1))), _rand_state(d, rng)


def _fact4_stated(rng):
    rho, sigma = _pair(rng)
    return trace_norm_distance(rho, sigma), math.sqrt(relative_entropy(rho, sigma))


def _fact4_fidelity(rng):
    rho, sigma = _pair(rng)
    return 1 - fidelity(rho, sigma), relative_entropy(rho, sigma)


def _pinsker(rng):
    rho, sigma = _pair(rng)
    return trace_norm_distance(rho, sigma), math.sqrt(2 * math.log(2) * relative_entropy(rho, sigma))


def _fact5(rng):
    dx, dy, rho = _bipartite(rng)
    sigma = _rand_state(dx * dy, rng)
    lhs = relative_entropy(partial_trace(rho, [0], [dx, dy]), partial_trace(sigma, [0], [dx, dy]))
    return lhs, relative_entropy(rho, sigma)


def _fact6(rng):
    n = int(rng.integers(2, 8))
    c = float(rng.uniform(0.1, 5.0))
    f = rng.uniform(0, c, size=n)
    mu, mu1 = random_distribution(n, rng), random_distribution(n, rng)
    eps, eps1 = float(mu @ f), float(np.abs(mu - mu1).sum())
    return float(mu1 @ f), eps + c * eps1


def _random_channel(d, rng):
    """Random channel ``d -> d_out``: a Haar isometry into ``d_out (x) e`` followed by tracing ``e``."""
    d_out = int(rng.integers(2, 5))
    e = -(-d // d_out) + int(rng.integers(0, 2))
    v = haar_unitary(d_out * e, rng)[:, :d]
    return lambda rho: partial_trace(DensityOperator(v @ rho.matrix @ v.conj().T), [0], [d_out, e])


def _prop1_l1(rng):
    rho, sigma = _pair(rng)
    ch = _random_channel(rho.dim, rng)
    return trace_norm_distance(ch(rho), ch(sigma)), trace_norm_distance(rho, sigma)


def _prop1_fidelity(rng):
    rho, sigma = _pair(rng)
    ch = _random_channel(rho.dim, rng)
    return fidelity(rho, sigma), fidelity(ch(rho), ch(sigma))


def _prop2_lower(rng):
    rho, sigma = _pair(rng)
    return 2 * (1 - fidelity(rho, sigma)), trace_norm_distance(rho, sigma)


def _prop2_upper(rng):
    rho, sigma = _pair(rng)
    f = fidelity(rho, sigma)
    return trace_norm_distance(rho, sigma), 2 * math.sqrt(max(0.0, 1 - f * f))


def _prop2_pure(rng):
    d = _dim(rng)
    a, b = random_unit_vector(d, rng), random_unit_vector(d, rng)
    return _pure_distance(a, b), 2 * math.sqrt(max(0.0, 1 - abs(np.vdot(a, b)) ** 2))


# name -> (check, is_equality, informational)
FACT_CHECKS = {
    "fact1": (_fact1, False, False),
    "fact2": (_fact2, True, False),
    "fact3": (_fact3, False, False),
    "fact3_equality": (_fact3_equality, True, False),
    "fact4": (_fact4_stated, False, False),
    "fact4_fidelity": (_fact4_fidelity, False, False),
    "pinsker": (_pinsker, False, True),
    "fact5": (_fact5, False, False),
    "fact6": (_fact6, False, False),
    "prop1_l1": (_prop1_l1, False, False),
    "prop1_fidelity": (_prop1_fidelity, False, False),
    "prop2_lower": (_prop2_lower, False, False),
    "prop2_upper": (_prop2_upper, False, False),
    "prop2_pure": (_prop2_pure, True, False),
}


def verify_facts(trials=500, seed=0, names=None):
    """Run every fact/proposition check on its own seeded ensemble.

    ``fact4`` is the distance bound ``||rho - sigma||_1 <= sqrt(D)`` exactly
    as stated (no 1/2 on the left, log base 2). It is not a valid inequality
    in this convention and fails on a fraction of the ensemble; ``pinsker``
    is the corrected ``sqrt(2 ln 2 D)`` form and is reported for reference.

    Returns:
        dict name -> VerificationReport
    """
    out = {}
    order = list(FACT_CHECKS)
    for name in names or order:
        check, equality, info = FACT_CHECKS[name]
        idx = order.index(name)
        rep = VerificationReport(name, informational=info)
        for t in range(trials):
            lhs, rhs = check(np.random.default_rng([seed, idx, t]))
            rep.add(t, seed, lhs, rhs, equality=equality)
        out[name] = rep
    return out
