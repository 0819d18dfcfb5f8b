"""Dense pure-state linear algebra over labelled multipartite registers.

Amplitudes are stored big-endian: subsystem 0 is the most significant digit
of the flattened index, so |q0 q1 ... q_{n-1}> sits at
q0*d1*d2*... + q1*d2*... + ... + q_{n-1}.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
ZERO_PROB = 1e-14
SCHMIDT_TOL = 1e-10


class QuantumError(ValueError):
    """Invalid state, operator, or subsystem selection."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SubsystemLayout:
    dims: tuple[int, ...]
    parties: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "parties", tuple(str(p) for p in self.parties))
        if not self.dims:
            raise QuantumError("layout needs at least one subsystem")
        if any(d < 2 for d in self.dims):
            raise QuantumError(f"subsystem dimensions must be >= 2, got {self.dims}")
        if len(self.parties) != len(self.dims):
            raise QuantumError("every subsystem needs exactly one party label")

    @classmethod
    def uniform(cls, n: int, d: int, party: str = "Alice") -> "SubsystemLayout":
        return cls((d,) * n, (party,) * n)

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return prod(self.dims)

    def party_of(self, index: int) -> str:
        return self.parties[index]

    def slots_of(self, party: str) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.parties) if p == party)

    def party_names(self) -> tuple[str, ...]:
        """Distinct party labels in order of first appearance."""
        return tuple(dict.fromkeys(self.parties))

    def select(self, indices: Sequence[int]) -> "SubsystemLayout":
        return SubsystemLayout(
            tuple(self.dims[i] for i in indices), tuple(self.parties[i] for i in indices)
        )

    def relabel(self, parties: Sequence[str]) -> "SubsystemLayout":
        return SubsystemLayout(self.dims, tuple(parties))


@dataclass(frozen=True, eq=False)
class PureState:
    layout: SubsystemLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.shape != (self.layout.size,):
            raise QuantumError(
                f"expected {self.layout.size} amplitudes for dims {self.layout.dims}, got {amps.size}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise QuantumError(f"state is not normalized (norm={norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, layout: SubsystemLayout, vector, normalize: bool = True) -> "PureState":
        v = np.asarray(vector, dtype=complex).ravel()
        if normalize:
            norm = np.linalg.norm(v)
            if norm < ZERO_PROB:
                raise QuantumError("cannot normalize a null vector")
            v = v / norm
        return cls(layout, v)

    @classmethod
    def basis(cls, layout: SubsystemLayout, digits: Sequence[int]) -> "PureState":
        """Computational basis ket |digits>."""
        if len(digits) != layout.n:
            raise QuantumError("one digit per subsystem required")
        v = np.zeros(layout.size, dtype=complex)
        v[np.ravel_multi_index(tuple(digits), layout.dims)] = 1.0
        return cls(layout, v)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.layout.dims

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def relabel(self, parties: Sequence[str]) -> "PureState":
        return PureState(self.layout.relabel(parties), self.amplitudes)

    def permute(self, order: Sequence[int]) -> "PureState":
        """Reorder subsystems so new slot i is old slot order[i]."""
        order = list(order)
        if sorted(order) != list(range(self.layout.n)):
            raise QuantumError(f"{order} is not a permutation of the subsystems")
        t = np.transpose(self.tensor_view(), order)
        return PureState(self.layout.select(order), t.reshape(-1))

    def distance(self, other: "PureState") -> float:
        _check_same_dim(self, other)
        return float(np.linalg.norm(self.amplitudes - other.amplitudes))

    def __repr__(self):
        return f"PureState(dims={self.layout.dims}, parties={self.layout.parties})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QuantumError("density matrix must be square")
        if not np.allclose(m, m.conj().T, atol=1e-10, rtol=0):
            raise QuantumError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > 1e-10:
            raise QuantumError(f"density matrix trace is {np.trace(m)!r}, expected 1")
        if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -1e-10:
            raise QuantumError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        herm = (self.matrix + self.matrix.conj().T) / 2
        w = np.linalg.eigvalsh(herm)
        return np.where((w < 0) & (w >= -1e-10), 0.0, w)


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise QuantumError("unitary must be a square matrix")
        err = np.abs(m.conj().T @ m - np.eye(m.shape[0])).max()
        if err > UNITARY_TOL:
            raise QuantumError(f"matrix is not unitary (max |U^dag U - I| = {err:.3g})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def dag(self) -> "UnitaryOp":
        return UnitaryOp(self.matrix.conj().T)

    def __matmul__(self, other: "UnitaryOp") -> "UnitaryOp":
        return UnitaryOp(self.matrix @ other.matrix)

    @classmethod
    def identity(cls, d: int) -> "UnitaryOp":
        return cls(np.eye(d, dtype=complex))

    @classmethod
    def diag(cls, entries) -> "UnitaryOp":
        return cls(np.diag(np.asarray(entries, dtype=complex)))


@dataclass(frozen=True)
class MeasurementBranch:
    outcome: tuple[int, ...]
    probability: float
    post_state: PureState | None


def _check_same_dim(a: PureState, b: PureState) -> None:
    if a.layout.size != b.layout.size:
        raise QuantumError(f"dimension mismatch: {a.layout.size} vs {b.layout.size}")


def _check_indices(layout: SubsystemLayout, indices: Sequence[int], what: str) -> list[int]:
    idx = [int(i) for i in indices]
    if len(set(idx)) != len(idx):
        raise QuantumError(f"repeated subsystem in {what}: {idx}")
    for i in idx:
        if not 0 <= i < layout.n:
            raise QuantumError(f"subsystem {i} out of range for {layout.n} subsystems")
    return idx


def tensor(states: Sequence[PureState]) -> PureState:
    if not states:
        raise QuantumError("tensor product of an empty list")
    amps = states[0].amplitudes
    dims = list(states[0].layout.dims)
    parties = list(states[0].layout.parties)
    for s in states[1:]:
        amps = np.kron(amps, s.amplitudes)
        dims += s.layout.dims
        parties += s.layout.parties
    return PureState(SubsystemLayout(tuple(dims), tuple(parties)), amps)


def apply_unitary(state: PureState, u: UnitaryOp | np.ndarray, targets: Sequence[int]) -> PureState:
    """Apply `u` to the subsystems `targets`, first target most significant."""
    if not isinstance(u, UnitaryOp):
        u = UnitaryOp(u)
    layout = state.layout
    targets = _check_indices(layout, targets, "targets")
    if not targets:
        raise QuantumError("no target subsystems")
    tdim = prod(layout.dims[t] for t in targets)
    if u.dim != tdim:
        raise QuantumError(f"operator dimension {u.dim} does not match target dimension {tdim}")
    rest = [i for i in range(layout.n) if i not in targets]
    t = np.transpose(state.tensor_view(), targets + rest).reshape(tdim, -1)
    t = (u.matrix @ t).reshape([layout.dims[i] for i in targets + rest])
    t = np.transpose(t, np.argsort(targets + rest))
    return PureState(layout, t.reshape(-1))


def apply_local(state: PureState, u: UnitaryOp | np.ndarray, slots: Sequence[int]) -> PureState:
    """Apply the same single-subsystem operator to each slot independently."""
    for s in slots:
        state = apply_unitary(state, u, [s])
    return state


def _split(state: PureState, first: Sequence[int]) -> tuple[np.ndarray, list[int]]:
    layout = state.layout
    rest = [i for i in range(layout.n) if i not in first]
    d1 = prod(layout.dims[i] for i in first)
    m = np.transpose(state.tensor_view(), list(first) + rest).reshape(d1, -1)
    return m, rest


def measure_projective(state: PureState, measured: Sequence[int]) -> list[MeasurementBranch]:
    """Enumerate computational-basis outcomes on `measured`.

    Outcomes are ordered lexicographically over the measured slots in the
    order given. Post-measurement states live on the remaining slots, which
    keep their original relative order.
    """
    layout = state.layout
    measured = _check_indices(layout, measured, "measured")
    if not measured:
        raise QuantumError("nothing to measure")
    if len(measured) == layout.n:
        raise QuantumError("measuring every subsystem leaves no residual state")
    m, rest = _split(state, measured)
    residual = layout.select(rest)
    probs = np.einsum("ij,ij->i", m.conj(), m).real
    branches = []
    for flat, p in enumerate(probs):
        outcome = tuple(int(x) for x in np.unravel_index(flat, [layout.dims[i] for i in measured]))
        if p < ZERO_PROB:
            branches.append(MeasurementBranch(outcome, 0.0, None))
        else:
            post = PureState(residual, m[flat] / np.sqrt(p))
            branches.append(MeasurementBranch(outcome, float(p), post))
    return branches


def partial_trace(state: PureState, keep: Sequence[int]) -> DensityMatrix:
    """Reduced density matrix on `keep` (in the order given)."""
    keep = _check_indices(state.layout, keep, "keep")
    if not keep or len(keep) == state.layout.n:
        raise QuantumError("keep must be a nonempty proper subset of the subsystems")
    m, _ = _split(state, keep)
    return DensityMatrix(m @ m.conj().T)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Entropy in bits, with 0 log 0 = 0."""
    w = rho.eigenvalues()
    w = w[w > 0]
    return float(max(0.0, -np.sum(w * np.log2(w))))


def entanglement_entropy(state: PureState, keep: Sequence[int]) -> float:
    """Entropy of `keep` versus the rest, from the Schmidt spectrum (no reduced matrix)."""
    keep = _check_indices(state.layout, keep, "keep")
    if not keep or len(keep) == state.layout.n:
        raise QuantumError("keep must be a nonempty proper subset of the subsystems")
    m, _ = _split(state, keep)
    lam = np.linalg.svd(m, compute_uv=False) ** 2
    lam = lam[lam > 0]
    return float(max(0.0, -np.sum(lam * np.log2(lam))))


def fidelity(a: PureState | np.ndarray, b: PureState | np.ndarray) -> float:
    va = a.amplitudes if isinstance(a, PureState) else np.asarray(a, dtype=complex).ravel()
    vb = b.amplitudes if isinstance(b, PureState) else np.asarray(b, dtype=complex).ravel()
    if va.size != vb.size:
        raise QuantumError(f"dimension mismatch: {va.size} vs {vb.size}")
    return float(min(1.0, abs(np.vdot(va, vb)) ** 2))


def reduced_fidelity(state: PureState, slots: Sequence[int], target: np.ndarray) -> float:
    """<target| rho_slots |target>; equals 1 iff those slots are exactly in `target`."""
    t = np.asarray(target, dtype=complex).ravel()
    if len(slots) == state.layout.n:
        return fidelity(state.amplitudes, t)
    rho = partial_trace(state, slots).matrix
    return float(min(1.0, np.vdot(t, rho @ t).real))


def _check_partition(layout: SubsystemLayout, partition) -> tuple[list[int], list[int]]:
    if len(partition) != 2:
        raise QuantumError("partition must have exactly two parts")
    a, b = (list(p) for p in partition)
    _check_indices(layout, a + b, "partition")
    if not a or not b or sorted(a + b) != list(range(layout.n)):
        raise QuantumError("partition must split all subsystems into two nonempty parts")
    return a, b


def schmidt_coefficients(state: PureState, partition) -> np.ndarray:
    a, b = _check_partition(state.layout, partition)
    m, _ = _split(state, a)
    return np.linalg.svd(m, compute_uv=False)


def is_product_across(state: PureState, partition) -> bool:
    s = schmidt_coefficients(state, partition)
    return bool(len(s) < 2 or s[1] < SCHMIDT_TOL)


def haar_unitary(d: int, rng: np.random.Generator, special: bool = False) -> np.ndarray:
    """Haar-random d x d unitary via QR of a complex Ginibre matrix.

    With ``special`` the determinant phase is divided out, giving an SU(d) element.
    """
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    q = q * ph
    if special:
        q = q / np.linalg.det(q) ** (1.0 / d)
    return q


def random_state(layout: SubsystemLayout, rng: np.random.Generator) -> PureState:
    v = rng.standard_normal(layout.size) + 1j * rng.standard_normal(layout.size)
    return PureState.from_vector(layout, v)
