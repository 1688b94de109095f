"""Conditioned states of the k-fold game and the single-coordinate embedding protocol.

Coordinates are 1-based throughout. The global state ``theta`` lives on the
registers::

    Xt1..Xtk  X1..Xk  Yt1..Ytk  Y1..Yk  A1..Ak  B1..Bk  EA  EB

``Xt``/``Yt`` are copies of the questions, ``Ai``/``Bi`` hold the answers,
and ``EA``/``EB`` hold each player's post-measurement system together with
the Naimark ancilla of their answer measurement. Answers on coordinates
outside ``C`` belong to the players' environments (``E_A = EA + A_{not C}``).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._linalg import check_random_state, psd_sqrt
from .exceptions import (
    BudgetExceededError,
    DimensionMismatchError,
    NonProductDistributionError,
    ZeroProbabilityError,
)
from .games import marginals
from .multireg import (
    LabeledPureState,
    Register,
    RegisterLayout,
    condition_on,
    entropy_of,
    probabilities,
    select,
)
from .qit import (
    PurificationPair,
    relative_entropy,
    relative_min_entropy,
    states_on_joint_support,
    uhlmann_unitary,
)
from .strategies import seesaw

DEFAULT_STATE_BUDGET = 2 ** 22
DEFAULT_ENUMERATION_LIMIT = 4096
DEFAULT_SHOTS = 100_000
REPORT_COLUMNS = (
    "step", "j", "q", "omega_j", "eps_x", "eps_y", "gamma", "tau", "kappa", "p4_value", "bound_rhs",
)


@dataclass(frozen=True, eq=False)
class ConditionedGameState:
    theta: LabeledPureState
    phi: LabeledPureState
    q: float
    coords_C: tuple
    k: int


@dataclass(frozen=True)
class EmbeddingDiagnostics:
    j: int
    omega_j: float
    eps_x: float
    eps_y: float
    gamma: float
    tau: float
    kappa: float
    p4_value: float
    p4_stderr: float = 0.0
    p2_value: float = math.nan
    p3_value: float = math.nan
    exact: bool = True

    @property
    def degradation(self):
        return 4 * math.sqrt(self.eps_x) + 4 * math.sqrt(self.eps_y) + 2 * self.gamma + self.tau + self.kappa

    @property
    def bound_rhs(self):
        """Lower bound on ``p4_value`` implied by the degradation chain."""
        return self.omega_j - self.degradation


def _names(prefix, coords):
    return [f"{prefix}{i}" for i in coords]


def _check_coords(k, coords, what="C"):
    coords = tuple(sorted(set(int(i) for i in coords)))
    if any(i < 1 or i > k for i in coords):
        raise ValueError(f"{what} must be a subset of 1..{k}, got {coords}")
    return coords


def theta_layout(game, k, da, db, C=()):
    nx, ny, na, nb = game.sizes
    C = set(C)
    regs = []
    regs += [Register(f"Xt{i}", nx, True) for i in range(1, k + 1)]
    regs += [Register(f"X{i}", nx, True) for i in range(1, k + 1)]
    regs += [Register(f"Yt{i}", ny, True) for i in range(1, k + 1)]
    regs += [Register(f"Y{i}", ny, True) for i in range(1, k + 1)]
    regs += [Register(f"A{i}", na, i in C) for i in range(1, k + 1)]
    regs += [Register(f"B{i}", nb, i in C) for i in range(1, k + 1)]
    regs += [Register("EA", na ** k * da), Register("EB", nb ** k * db)]
    return RegisterLayout(tuple(regs))


def build_theta(game, k, s, C=(), budget=DEFAULT_STATE_BUDGET):
    """Purified global state of strategy ``s`` for ``G^k`` before the referee checks anything.

    Each POVM ``{M_a}`` is dilated to ``|psi> -> sum_a |a>_A |a>_anc sqrt(M_a)|psi>``.
    The answer register is copied into the ancilla, so every register
    marked classical has a diagonal reduced state.

    Raises:
        NonProductDistributionError: ``mu`` is not a product distribution.
        BudgetExceededError: the state vector would exceed ``budget`` entries.
    """
    C = _check_coords(k, C)
    w = marginals(game)
    if not w.is_product(game.tol):
        raise NonProductDistributionError(
            f"question distribution is not product (residual {w.residual:.6g}); "
            "the repetition machinery assumes mu = mu_X (x) mu_Y",
            w.residual,
        )
    nx, ny, na, nb = game.sizes
    NX, NY, NA, NB = nx ** k, ny ** k, na ** k, nb ** k
    if s.shape != (NX, NY, NA, NB):
        raise DimensionMismatchError(f"strategy has sizes {s.shape}, G^{k} needs {(NX, NY, NA, NB)}")
    layout = theta_layout(game, k, s.da, s.db, C)
    if layout.total_dim > budget:
        raise BudgetExceededError(
            f"theta needs {layout.total_dim} amplitudes, budget is {budget}", layout.total_dim, budget
        )
    mu_k = game.mu
    for _ in range(k - 1):
        mu_k = np.kron(mu_k, game.mu)
    sa = np.array([[psd_sqrt(m) for m in povm] for povm in s.alice_povms])
    sb = np.array([[psd_sqrt(m) for m in povm] for povm in s.bob_povms])
    psi = s.shared.reshape(s.da, s.db)
    gamma = np.einsum("xaik,ybjl,kl->xyabij", sa, sb, psi, optimize=True)
    gamma *= np.sqrt(mu_k)[:, :, None, None, None, None]
    arr = np.zeros((NX, NX, NY, NY, NA, NB, NA, s.da, NB, s.db), dtype=complex)
    X, Y, A, B = np.indices((NX, NY, NA, NB), sparse=False)
    arr[X, X, Y, Y, A, B, A, :, B, :] = gamma
    return LabeledPureState(layout, arr.ravel())


def _win_mask(state, game, coords):
    """Broadcastable 0/1 tensor: 1 where every coordinate in ``coords`` wins."""
    dims = state.layout.dims
    mask = np.ones([1] * len(dims), dtype=bool)
    for i in coords:
        axes = state.layout.indices([f"X{i}", f"Y{i}", f"A{i}", f"B{i}"])
        shape = [1] * len(dims)
        for ax in axes:
            shape[ax] = dims[ax]
        order = np.argsort(axes)
        v = game.predicate.transpose(order).reshape(shape)
        mask = mask & v
    return mask


def condition_success(theta, game, C):
    """Project ``theta`` onto winning every coordinate in ``C`` and renormalise.

    Raises:
        ZeroProbabilityError: the strategy never wins on ``C``.
    """
    k = sum(1 for n in theta.names if n.startswith("Xt"))
    C = _check_coords(k, C)
    t = theta.tensor * _win_mask(theta, game, C)
    q = float(np.sum(np.abs(t) ** 2))
    if q <= 0.0:
        raise ZeroProbabilityError(f"the strategy never wins all of C = {list(C)} (q = 0)")
    phi = LabeledPureState.from_tensor(theta.layout, t / math.sqrt(q), tol=theta.tol)
    return ConditionedGameState(theta, phi, min(1.0, q), C, k)


def _copies(coords):
    return {f"Xt{i}": f"X{i}" for i in coords} | {f"Yt{i}": f"Y{i}" for i in coords}


def _assignment(names, values, copy_coords):
    a = {n: int(v) for n, v in zip(names, values)}
    for src, dst in _copies(copy_coords).items():
        if dst in a:
            a[src] = a[dst]
    return a


def lemma7_budget(cgs, game):
    """Both sides of the relative-entropy budget for the success-conditioned state.

    ``lhs`` averages, over ``(x_C, y_C, a_C, b_C)`` drawn from ``phi``, the
    relative entropy between phi's conditioned state on everything except
    ``Xt_C Yt_C A_C B_C`` and theta's state conditioned only on
    ``(x_C, y_C)``. ``rhs = -log2 q + |C| log2(na nb)``.

    Returns:
        (lhs, rhs); ``lhs`` is ``math.inf`` on a support violation.
    """
    C = cgs.coords_C
    rhs = -math.log2(cgs.q) + len(C) * math.log2(game.na * game.nb)
    qnames = _names("X", C) + _names("Y", C)
    anames = _names("A", C) + _names("B", C)
    layout_order = [n for n in cgs.phi.names if n in set(qnames + anames)]
    p = probabilities(cgs.phi, layout_order)
    sub = cgs.phi.layout.sub(layout_order)
    lhs = 0.0
    theta_cache = {}
    for flat in np.flatnonzero(p.ravel() > 0):
        values = np.unravel_index(flat, sub.dims)
        full = _assignment(sub.names, values, C)
        phi_t, _ = select(cgs.phi, full)
        qa = {n: v for n, v in full.items() if n not in anames}
        key = tuple(sorted(qa.items()))
        if key not in theta_cache:
            th, _ = select(cgs.theta, qa)
            keep = [n for n in th.names if n not in anames]
            theta_cache[key] = th.matrix(keep)
        rho, sigma = states_on_joint_support(phi_t.amplitudes[:, None], theta_cache[key])
        lhs += float(p.ravel()[flat]) * relative_entropy(rho, sigma)
    return lhs, rhs


def lemma3_check(cgs):
    """``(D_inf(phi_res || theta_res), log2(1/q))`` on all registers except ``Xt_C Yt_C A_C B_C``."""
    C = cgs.coords_C
    traced = set(_names("Xt", C) + _names("Yt", C) + _names("A", C) + _names("B", C))
    keep = [n for n in cgs.phi.names if n not in traced]
    rho, sigma = states_on_joint_support(cgs.phi.matrix(keep), cgs.theta.matrix(keep))
    return relative_min_entropy(rho, sigma), -math.log2(cgs.q)


def coordinate_success(cgs, game, s, j):
    """``Pr[T_j = 1 | success on C]`` read off the dilated answers in ``phi``.

    ``s`` is accepted for interface symmetry; the strategy is already
    encoded in ``phi``, whose answer registers hold the dilated outcomes.
    """
    if j in cgs.coords_C:
        raise ValueError(f"coordinate {j} is already in C")
    _check_coords(cgs.k, [j], "j")
    names = [f"X{j}", f"Y{j}", f"A{j}", f"B{j}"]
    p = probabilities(cgs.phi, names)
    return float(np.sum(p * game.predicate))


def _one_hot(idx, n):
    out = np.zeros((idx.size, n))
    out[np.arange(idx.size), idx] = 1.0
    return out


class _CoinBranch:
    """Everything the protocol needs for one value ``r_j`` of the public coin."""

    def __init__(self, phi_r, game, j):
        self.state = phi_r
        names = phi_r.names
        self.alice = [n for n in names if n.startswith(("Xt", "X", "A", "EA"))]
        self.bob = [n for n in names if n not in self.alice]
        xj, yj = f"X{j}", f"Y{j}"
        pxy = probabilities(phi_r, [xj, yj])
        self.pxy = pxy / pxy.sum()
        px, py = self.pxy.sum(axis=1), self.pxy.sum(axis=0)
        self.gamma = float(np.abs(self.pxy - np.outer(px, py)).sum())
        s_bob = entropy_of(phi_r, self.bob)
        s_alice = entropy_of(phi_r, self.alice)
        self.eps_x = max(0.0, _h(px) + s_bob - entropy_of(phi_r, [xj] + self.bob))
        self.eps_y = max(0.0, _h(py) + s_alice - entropy_of(phi_r, [yj] + self.alice))
        # matrix with Bob's registers as rows, Alice's as columns
        self.m = phi_r.matrix(self.bob)
        pair_b = PurificationPair.from_matrix(self.m, phi_r.tol)
        pair_a = PurificationPair.from_matrix(self.m.T, phi_r.tol)
        self.u = []
        for x in range(game.nx):
            if px[x] > 0:
                mx = condition_on(phi_r, {xj: x})[0].matrix(self.bob)
                self.u.append(uhlmann_unitary(pair_b, PurificationPair.from_matrix(mx, phi_r.tol)))
            else:
                self.u.append(np.eye(self.m.shape[1]))
        self.v = []
        for y in range(game.ny):
            if py[y] > 0:
                my = condition_on(phi_r, {yj: y})[0].matrix(self.bob)
                self.v.append(uhlmann_unitary(pair_a, PurificationPair.from_matrix(my.T, phi_r.tol)))
            else:
                self.v.append(np.eye(self.m.shape[0]))
        la = phi_r.layout.sub(self.alice)
        lb = phi_r.layout.sub(self.bob)
        a_idx = np.unravel_index(np.arange(la.total_dim), la.dims)[la.index(f"A{j}")]
        b_idx = np.unravel_index(np.arange(lb.total_dim), lb.dims)[lb.index(f"B{j}")]
        self.onehot_a = _one_hot(a_idx, game.na)
        self.onehot_b = _one_hot(b_idx, game.nb)
        self._answers = {}

    def answer_distribution(self, x, y):
        """``p[a, b]`` after Alice applies ``U_x`` and Bob ``V_y`` and both measure."""
        key = (x, y)
        if key not in self._answers:
            f = self.v[y] @ self.m @ self.u[x].T
            p = self.onehot_b.T @ (np.abs(f) ** 2) @ self.onehot_a
            self._answers[key] = p.T / p.sum()
        return self._answers[key]

    def win_table(self, game):
        w = np.zeros((game.nx, game.ny))
        for x in range(game.nx):
            for y in range(game.ny):
                w[x, y] = float(np.sum(self.answer_distribution(x, y) * game.predicate[x, y]))
        return w


def _h(p):
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def embed_single_game(cgs, game, j, rng_seed=42, shots=None, max_enumeration=DEFAULT_ENUMERATION_LIMIT):
    """Run the public-coin embedding of coordinate ``j`` into a single game.

    The public coin is ``r_j = (x_C, y_C, x_<j, y_<j, a_C, b_C)``. For each
    coin value the players hold ``phi_{r_j}``; Alice's Uhlmann unitaries
    ``U_x`` (Bob's ``V_y``) map it towards the state conditioned on
    ``X_j = x`` (``Y_j = y``). Fresh questions ``(x', y') ~ mu`` are answered
    by applying ``U_x' (x) V_y'`` and measuring ``A_j, B_j``.

    Coin values are enumerated exactly when there are at most
    ``max_enumeration`` of them; otherwise ``shots`` coins are sampled. If
    ``shots`` is given, ``p4_value`` is a Monte Carlo estimate with standard
    error ``p4_stderr``; otherwise it is exact.

    Returns:
        EmbeddingDiagnostics
    """
    C = cgs.coords_C
    if j in C:
        raise ValueError(f"coordinate {j} is already in C")
    _check_coords(cgs.k, [j], "j")
    w = marginals(game)
    if not w.is_product(game.tol):
        raise NonProductDistributionError("embedding requires a product question distribution", w.residual)
    rng = check_random_state(rng_seed)
    phi = cgs.phi
    coin_coords = sorted(set(C) | set(range(1, j)))
    coin_names = [n for n in phi.names if n in set(
        _names("X", coin_coords) + _names("Y", coin_coords) + _names("A", C) + _names("B", C)
    )]
    xj, yj = f"X{j}", f"Y{j}"

    # classical joint law of (coin, X_j, Y_j)
    order = [n for n in phi.names if n in set(coin_names + [xj, yj])]
    p_all = probabilities(phi, order)
    axes = [order.index(n) for n in coin_names] + [order.index(xj), order.index(yj)]
    p_all = p_all.transpose(axes)
    coin_dims = p_all.shape[:-2]
    p_joint = p_all.reshape(-1, game.nx, game.ny)
    p_coin = p_joint.sum(axis=(1, 2))
    p_xy = p_joint.sum(axis=0)
    kappa = float(np.abs(p_xy - game.mu).sum())
    tau = 0.0
    for x in range(game.nx):
        for y in range(game.ny):
            if p_xy[x, y] > 0:
                tau += p_xy[x, y] * float(np.abs(p_joint[:, x, y] / p_xy[x, y] - p_coin).sum())

    support = np.flatnonzero(p_coin > 0)
    exact = support.size <= max_enumeration
    if exact:
        coins, weights = support, p_coin[support] / p_coin[support].sum()
    else:
        draws = rng.choice(p_coin.size, size=shots or DEFAULT_SHOTS, p=p_coin / p_coin.sum())
        coins, counts = np.unique(draws, return_counts=True)
        weights = counts / counts.sum()

    branches = {}
    eps_x = eps_y = gamma = p2 = p3 = p4 = 0.0
    for c, wt in zip(coins, weights):
        values = np.unravel_index(c, coin_dims) if coin_dims else ()
        branch = _CoinBranch(select(phi, _assignment(coin_names, values, coin_coords))[0], game, j)
        branches[int(c)] = branch
        eps_x += wt * branch.eps_x
        eps_y += wt * branch.eps_y
        gamma += wt * branch.gamma
        table = branch.win_table(game)
        p2 += wt * float(np.sum(branch.pxy * table))
        p3 += wt * float(np.sum(p_xy * table))
        p4 += wt * float(np.sum(game.mu * table))

    stderr = 0.0
    if shots:
        if exact:
            coin_draws = rng.choice(coins, size=shots, p=weights)
        else:
            coin_draws = draws
        q = game.mu.ravel()
        xy = rng.choice(q.size, size=shots, p=q / q.sum())
        wins = 0
        for c in np.unique(coin_draws):
            sel = coin_draws == c
            branch = branches[int(c)]
            for cell in np.unique(xy[sel]):
                n = int(np.sum(xy[sel] == cell))
                x, y = np.unravel_index(cell, game.mu.shape)
                pab = branch.answer_distribution(x, y).ravel()
                ab = rng.choice(pab.size, size=n, p=pab)
                a, b = np.unravel_index(ab, (game.na, game.nb))
                wins += int(np.sum(game.predicate[x, y, a, b]))
        p4_mc = wins / shots
        stderr = math.sqrt(max(p4_mc * (1 - p4_mc), 1e-300) / shots)
        p4 = p4_mc
    return EmbeddingDiagnostics(
        j=j,
        omega_j=coordinate_success(cgs, game, None, j),
        eps_x=float(eps_x),
        eps_y=float(eps_y),
        gamma=float(gamma),
        tau=float(tau),
        kappa=kappa,
        p4_value=float(min(1.0, max(0.0, p4))),
        p4_stderr=stderr,
        p2_value=float(p2),
        p3_value=float(p3),
        exact=exact and not shots,
    )


def theorem_bound(epsilon, k, na, nb):
    """``(1 - eps/2) ** (eps**2 k / (12000 (log2 na + log2 nb)))``."""
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if k < 0:
        raise ValueError("k must be nonnegative")
    denom = math.log2(na) + math.log2(nb)
    if denom <= 0:
        raise ValueError("need na * nb >= 2 (the exponent's denominator is zero)")
    return (1 - epsilon / 2) ** (epsilon ** 2 * k / (12000 * denom))


@dataclass
class ScanStep:
    step: int
    coords_C: tuple
    q: float
    j: int = None
    omega_j: float = math.nan
    candidates: dict = field(default_factory=dict)
    diagnostics: EmbeddingDiagnostics = None
    lemma7: tuple = None
    holds: bool = True


@dataclass
class ScanReport:
    steps: list
    delta1: float
    delta2: float
    delta3: float
    omega_star: float
    threshold: float
    halted: bool

    @property
    def all_hold(self):
        return all(s.holds for s in self.steps)


def lemma8_scan(
    game, k, s, delta1, delta2, omega_star=None, d=2, rng_seed=42, embed=True, shots=None, initial_C=(),
):
    """Grow ``C`` greedily, each time adding the coordinate with the lowest conditional success.

    Every candidate ``j`` outside ``C`` is evaluated exactly. Each step is
    checked against ``q <= 2**(-delta2 k)`` or
    ``omega_j <= omega_star + 12 sqrt(10 delta3)`` with
    ``delta3 = delta2 + delta1 log2(na nb)``. ``omega_star`` defaults to the
    see-saw lower bound at dimension ``d``. The scan starts from
    ``initial_C`` (empty by default).
    """
    if omega_star is None:
        omega_star = seesaw(game, d, rng_seed=rng_seed)[1].final_value
    delta3 = delta2 + delta1 * math.log2(game.na * game.nb)
    threshold = omega_star + 12 * math.sqrt(10 * delta3)
    theta = build_theta(game, k, s)
    C = list(_check_coords(k, initial_C))
    steps = []
    halted = False
    while len(C) < k:
        try:
            cgs = condition_success(theta, game, C)
        except ZeroProbabilityError:
            steps.append(ScanStep(len(steps), tuple(C), 0.0))
            halted = True
            break
        cands = {j: coordinate_success(cgs, game, s, j) for j in range(1, k + 1) if j not in C}
        j = min(cands, key=lambda i: (cands[i], i))
        step = ScanStep(len(steps), tuple(C), cgs.q, j, cands[j], cands)
        step.lemma7 = lemma7_budget(cgs, game)
        if embed:
            step.diagnostics = embed_single_game(cgs, game, j, rng_seed=rng_seed, shots=shots)
        step.holds = cgs.q <= 2.0 ** (-delta2 * k) or cands[j] <= threshold
        steps.append(step)
        C.append(j)
    return ScanReport(steps, delta1, delta2, delta3, omega_star, threshold, halted)


def report_rows(steps):
    """Rows of the repetition CSV, one per scan step, in ``REPORT_COLUMNS`` order."""
    rows = []
    for st in steps:
        dg = st.diagnostics
        if dg is None:
            vals = [math.nan] * 6 + [math.nan]
        else:
            vals = [dg.eps_x, dg.eps_y, dg.gamma, dg.tau, dg.kappa, dg.p4_value, dg.bound_rhs]
        rows.append([st.step, "" if st.j is None else st.j, st.q, st.omega_j] + vals)
    return rows
