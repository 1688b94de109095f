"""Pure states over named registers.

Amplitudes are indexed row-major over the layout's register order, so the
first register is the most significant digit of the flat index.
"""

from dataclasses import dataclass, field

import numpy as np

from ._linalg import DEFAULT_TOL, check_random_state
from .exceptions import DimensionMismatchError, InvalidStateError, ZeroProbabilityError
from .qit import DensityOperator, shannon_entropy


@dataclass(frozen=True)
class Register:
    name: str
    dim: int
    classical: bool = False


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        regs = tuple(r if isinstance(r, Register) else Register(*r) for r in self.registers)
        names = [r.name for r in regs]
        if len(set(names)) != len(names):
            raise ValueError(f"register names must be unique: {names}")
        for r in regs:
            if int(r.dim) < 1:
                raise ValueError(f"register {r.name!r} has dimension {r.dim}")
        object.__setattr__(self, "registers", regs)

    @property
    def names(self):
        return tuple(r.name for r in self.registers)

    @property
    def dims(self):
        return tuple(int(r.dim) for r in self.registers)

    @property
    def total_dim(self):
        return int(np.prod(self.dims)) if self.registers else 1

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown register {name!r}") from None

    def indices(self, names):
        return [self.index(n) for n in names]

    def __getitem__(self, name):
        return self.registers[self.index(name)]

    def sub(self, names):
        """Layout restricted to ``names``, kept in layout order."""
        idx = sorted(set(self.indices(names)))
        return RegisterLayout(tuple(self.registers[i] for i in idx))

    def dim_of(self, names):
        return int(np.prod([self[n].dim for n in names])) if names else 1


@dataclass(frozen=True, eq=False)
class LabeledPureState:
    layout: RegisterLayout
    amplitudes: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex).ravel()
        if a.size != self.layout.total_dim:
            raise DimensionMismatchError(
                f"{a.size} amplitudes for a layout of total dimension {self.layout.total_dim}"
            )
        nrm = np.linalg.norm(a)
        if abs(nrm - 1.0) > self.tol:
            raise InvalidStateError(f"state has norm {nrm!r}")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def from_tensor(cls, layout, tensor, normalize=False, tol=DEFAULT_TOL):
        a = np.asarray(tensor, dtype=complex).ravel()
        if normalize:
            a = a / np.linalg.norm(a)
        return cls(layout, a, tol)

    @classmethod
    def basis(cls, layout, index):
        a = np.zeros(layout.total_dim, dtype=complex)
        a[np.ravel_multi_index(tuple(index), layout.dims)] = 1.0
        return cls(layout, a)

    @property
    def names(self):
        return self.layout.names

    @property
    def tensor(self):
        return self.amplitudes.reshape(self.layout.dims)

    def matrix(self, rows):
        """Amplitudes reshaped to ``(dim(rows), dim(rest))`` with both sides in layout order."""
        ridx = sorted(set(self.layout.indices(rows)))
        cidx = [i for i in range(len(self.layout.registers)) if i not in ridx]
        dims = self.layout.dims
        t = self.tensor.transpose(ridx + cidx)
        dr = int(np.prod([dims[i] for i in ridx])) if ridx else 1
        return t.reshape(dr, -1)

    def reduced(self, keep):
        return reduced_state(self, keep)


@dataclass(frozen=True, eq=False)
class MeasurementOutcome:
    register_values: dict
    probability: float
    post_state: LabeledPureState


def tensor(states):
    """Kronecker product of states with disjoint register names."""
    states = list(states)
    if not states:
        raise ValueError("tensor needs at least one state")
    regs = []
    amp = np.ones(1, dtype=complex)
    for s in states:
        regs.extend(s.layout.registers)
        amp = np.kron(amp, s.amplitudes)
    names = [r.name for r in regs]
    if len(set(names)) != len(names):
        raise ValueError(f"register name collision in {names}")
    return LabeledPureState(RegisterLayout(tuple(regs)), amp, max(s.tol for s in states))


def probabilities(state, names):
    """Born distribution of the listed registers, shaped by their dims in layout order."""
    idx = sorted(set(state.layout.indices(names)))
    p = np.abs(state.tensor) ** 2
    other = tuple(i for i in range(p.ndim) if i not in idx)
    return p.sum(axis=other) if other else p


def _project(state, assignment):
    t = state.tensor
    sl = [slice(None)] * t.ndim
    for name, v in assignment.items():
        i = state.layout.index(name)
        v = int(v)
        if not 0 <= v < state.layout.dims[i]:
            raise ValueError(f"value {v} out of range for register {name!r}")
        sl[i] = v
    out = np.zeros_like(t)
    out[tuple(sl)] = t[tuple(sl)]
    return out


def condition_on(state, assignment):
    """Collapse the assigned registers without sampling.

    Returns:
        (post_state, probability), with the post-state renormalised and the
        measured registers kept in the layout.

    Raises:
        ZeroProbabilityError: the assignment has probability 0.
    """
    proj = _project(state, assignment)
    p = float(np.sum(np.abs(proj) ** 2))
    if p <= 0.0:
        raise ZeroProbabilityError(f"assignment {assignment} has probability 0")
    return LabeledPureState.from_tensor(state.layout, proj / np.sqrt(p), tol=state.tol), p


def select(state, assignment):
    """Condition on ``assignment`` and drop the now-fixed registers from the layout."""
    t = state.tensor
    sl = [slice(None)] * t.ndim
    for name, v in assignment.items():
        sl[state.layout.index(name)] = int(v)
    sub = t[tuple(sl)]
    p = float(np.sum(np.abs(sub) ** 2))
    if p <= 0.0:
        raise ZeroProbabilityError(f"assignment {assignment} has probability 0")
    rest = [r for r in state.layout.registers if r.name not in assignment]
    return LabeledPureState(RegisterLayout(tuple(rest)), sub.ravel() / np.sqrt(p), state.tol), p


def sample_outcomes(state, names, shots, rng):
    """Draw ``shots`` joint outcomes of ``names`` (layout order) from the Born rule.

    Returns:
        int array of shape ``(shots, len(names))``.
    """
    rng = check_random_state(rng)
    sub = state.layout.sub(names)
    p = probabilities(state, names).ravel()
    p = p / p.sum()
    flat = rng.choice(p.size, size=shots, p=p)
    return np.stack(np.unravel_index(flat, sub.dims), axis=1)


def measure_registers(state, names, rng):
    """Measure ``names`` in the standard basis with a seeded generator.

    Args:
        state: the state to measure.
        names: registers to measure.
        rng: integer seed or ``numpy.random.Generator`` owned by the caller.
    """
    sub = state.layout.sub(names)
    values = sample_outcomes(state, names, 1, rng)[0]
    assignment = {n: int(v) for n, v in zip(sub.names, values)}
    post, p = condition_on(state, assignment)
    return MeasurementOutcome(assignment, p, post)


def reduced_factor(state, keep):
    """Matrix ``F`` with ``F F^dag`` equal to the reduced state on ``keep``."""
    return state.matrix(keep)


def reduced_state(state, keep):
    """Density operator on ``keep`` (layout order), tracing out everything else."""
    f = reduced_factor(state, keep)
    return DensityOperator(f @ f.conj().T, state.tol)


def entropy_of(state, names):
    """Von Neumann entropy of the reduced state on ``names`` via the Schmidt spectrum."""
    if not names or set(names) == set(state.names):
        return 0.0
    s = np.linalg.svd(state.matrix(names), compute_uv=False)
    return shannon_entropy(s ** 2)


def apply_local_unitary(state, names, u):
    """Apply ``u`` to the listed registers (in the order given) and identity elsewhere."""
    idx = state.layout.indices(names)
    if len(set(idx)) != len(idx):
        raise ValueError("repeated register in names")
    d = int(np.prod([state.layout.dims[i] for i in idx]))
    u = np.asarray(u, dtype=complex)
    if u.shape != (d, d):
        raise DimensionMismatchError(f"unitary of shape {u.shape} for registers of dimension {d}")
    if np.max(np.abs(u.conj().T @ u - np.eye(d))) > max(state.tol, 1e-9):
        raise InvalidStateError("matrix is not unitary within tolerance")
    rest = [i for i in range(len(state.layout.registers)) if i not in idx]
    t = state.tensor.transpose(idx + rest).reshape(d, -1)
    t = (u @ t).reshape([state.layout.dims[i] for i in idx + rest])
    inv = np.argsort(idx + rest)
    return LabeledPureState(state.layout, t.transpose(inv).ravel(), state.tol)
