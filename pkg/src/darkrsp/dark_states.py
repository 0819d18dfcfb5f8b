"""Dark-state resources: constructors, invariance check, singlet matchings."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from math import factorial, sqrt
from typing import Sequence

import numpy as np

from .core import (
    PureState,
    QuantumError,
    SubsystemLayout,
    apply_local,
    haar_unitary,
    tensor,
)

ALICE = "Alice"
REMOTE_NAMES = ("Bob", "Charlie", "Denis", "Eve", "Fred", "Grace", "Heidi", "Ivan")


def remote_name(i: int) -> str:
    """Label of the i-th remote party (0-based)."""
    return REMOTE_NAMES[i] if i < len(REMOTE_NAMES) else f"P{i + 1}"


class ResourceKind(str, Enum):
    SINGLET = "Singlet"
    FOUR_QUBIT_A = "FourQubitA"
    FOUR_QUBIT_B = "FourQubitB"
    SUPERPOSED_FOUR_QUBIT = "SuperposedFourQubit"
    SINGLET_MATCHING_PRODUCT = "SingletMatchingProduct"
    ANTISYMMETRIC = "Antisymmetric"
    ANTISYMMETRIC_PRODUCT = "AntisymmetricProduct"


@dataclass(frozen=True)
class DarkStateSpec:
    """Which resource to build. Unused fields stay None."""

    kind: ResourceKind
    a: float | None = None
    b: float | None = None
    m: int | None = None
    matching: tuple[int, ...] | None = None
    d: int | None = None

    def __post_init__(self):
        kind = ResourceKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is ResourceKind.SUPERPOSED_FOUR_QUBIT:
            if self.a is None or self.b is None:
                raise QuantumError("SuperposedFourQubit needs coefficients a and b")
            if isinstance(self.a, complex) or isinstance(self.b, complex):
                raise QuantumError("superposition coefficients must be real")
            a, b = float(self.a), float(self.b)
            if a * a + b * b + a * b <= 1e-12:
                raise QuantumError(f"degenerate normalization: a^2+b^2+ab = {a * a + b * b + a * b!r}")
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)
        elif kind is ResourceKind.SINGLET_MATCHING_PRODUCT:
            if self.m is None or int(self.m) < 1:
                raise QuantumError("SingletMatchingProduct needs m >= 1")
            m = int(self.m)
            matching = tuple(range(m)) if self.matching is None else tuple(int(x) for x in self.matching)
            if sorted(matching) != list(range(m)):
                raise QuantumError(f"matching {matching} is not a permutation of 0..{m - 1}")
            object.__setattr__(self, "m", m)
            object.__setattr__(self, "matching", matching)
        elif kind is ResourceKind.ANTISYMMETRIC:
            if self.d is None or int(self.d) < 2:
                raise QuantumError("Antisymmetric needs d >= 2")
            object.__setattr__(self, "d", int(self.d))
        elif kind is ResourceKind.ANTISYMMETRIC_PRODUCT:
            if self.d is None or int(self.d) < 2 or self.m is None or int(self.m) < 1:
                raise QuantumError("AntisymmetricProduct needs d >= 2 and m >= 1")
            object.__setattr__(self, "d", int(self.d))
            object.__setattr__(self, "m", int(self.m))

    @property
    def dimension(self) -> int:
        """Local Hilbert-space dimension of every particle."""
        if self.kind in (ResourceKind.ANTISYMMETRIC, ResourceKind.ANTISYMMETRIC_PRODUCT):
            return self.d
        return 2

    @property
    def remote_parties(self) -> int:
        k = self.kind
        if k in (ResourceKind.SINGLET, ResourceKind.ANTISYMMETRIC):
            return 1
        if k in (ResourceKind.SINGLET_MATCHING_PRODUCT, ResourceKind.ANTISYMMETRIC_PRODUCT):
            return self.m
        return 2

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        for name in ("a", "b", "m", "d"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        if self.matching is not None:
            out["matching"] = list(self.matching)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DarkStateSpec":
        data = dict(data)
        kind = data.pop("kind")
        if "matching" in data and data["matching"] is not None:
            data["matching"] = tuple(data["matching"])
        unknown = set(data) - {"a", "b", "m", "matching", "d"}
        if unknown:
            raise QuantumError(f"unknown resource fields: {sorted(unknown)}")
        return cls(kind, **data)


def singlet_vector() -> np.ndarray:
    return np.array([0, 1, -1, 0], dtype=complex) / sqrt(2)


def permutation_parity(perm: Sequence[int]) -> int:
    """+1 for even permutations, -1 for odd (counted by cycle lengths)."""
    perm = list(perm)
    seen = [False] * len(perm)
    sign = 1
    for start in range(len(perm)):
        if seen[start]:
            continue
        j, length = start, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def antisymmetric_vector(d: int) -> np.ndarray:
    v = np.zeros(d**d, dtype=complex)
    dims = (d,) * d
    for perm in itertools.permutations(range(d)):
        v[np.ravel_multi_index(perm, dims)] = permutation_parity(perm)
    return v / sqrt(factorial(d))


def _pairing_vector(n: int, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Product of singlets (|01>-|10>)/sqrt2 on qubit pairs (i, j), i carrying the first slot."""
    t = np.ones((), dtype=complex)
    order = []
    for i, j in pairs:
        t = np.multiply.outer(t, singlet_vector().reshape(2, 2))
        order += [i, j]
    # axis k of t currently holds qubit order[k]
    return np.transpose(t, np.argsort(order)).reshape(-1)


def _four_qubit_layout() -> SubsystemLayout:
    return SubsystemLayout((2, 2, 2, 2), (ALICE, ALICE, remote_name(0), remote_name(1)))


def build(spec: DarkStateSpec) -> PureState:
    """Construct the resource with its fixed party layout.

    Four-qubit resources: slots 0,1 Alice, 2 Bob, 3 Charlie.
    Antisymmetric(d): slots 0..d-2 Alice, slot d-1 Bob.
    Products: factor j occupies its own block; its last slot is remote party j.
    """
    k = spec.kind
    if k is ResourceKind.SINGLET:
        return PureState(SubsystemLayout((2, 2), (ALICE, remote_name(0))), singlet_vector())
    if k is ResourceKind.FOUR_QUBIT_A:
        return PureState(_four_qubit_layout(), _pairing_vector(4, [(0, 2), (1, 3)]))
    if k is ResourceKind.FOUR_QUBIT_B:
        return PureState(_four_qubit_layout(), _pairing_vector(4, [(0, 3), (1, 2)]))
    if k is ResourceKind.SUPERPOSED_FOUR_QUBIT:
        v = spec.a * _pairing_vector(4, [(0, 2), (1, 3)]) + spec.b * _pairing_vector(4, [(0, 1), (2, 3)])
        norm = 1 / (2 * sqrt(spec.a**2 + spec.b**2 + spec.a * spec.b))
        # pairing vectors already carry 1/2, the printed N multiplies bare kets
        return PureState(_four_qubit_layout(), 2 * norm * v)
    if k is ResourceKind.SINGLET_MATCHING_PRODUCT:
        m = spec.m
        layout = SubsystemLayout((2,) * (2 * m), (ALICE,) * m + tuple(remote_name(i) for i in range(m)))
        pairs = [(i, m + spec.matching[i]) for i in range(m)]
        return PureState(layout, _pairing_vector(2 * m, pairs))
    if k is ResourceKind.ANTISYMMETRIC:
        d = spec.d
        return PureState(SubsystemLayout((d,) * d, (ALICE,) * (d - 1) + (remote_name(0),)), antisymmetric_vector(d))
    if k is ResourceKind.ANTISYMMETRIC_PRODUCT:
        d = spec.d
        factors = [
            PureState(SubsystemLayout((d,) * d, (ALICE,) * (d - 1) + (remote_name(j),)), antisymmetric_vector(d))
            for j in range(spec.m)
        ]
        return tensor(factors)
    raise QuantumError(f"unknown resource kind {k}")


def verify_dark(state: PureState, trials: int = 100, tol: float = 1e-10, seed: int = 0) -> bool:
    """True iff U x U x ... x U leaves `state` unchanged for `trials` Haar-random U.

    The U are drawn from SU(d): a general U(d) element multiplies every
    N = md dark state by det(U)^m, which is a global phase only.
    """
    dims = set(state.layout.dims)
    if len(dims) != 1:
        raise QuantumError(f"all subsystems must share one dimension, got {state.layout.dims}")
    d = dims.pop()
    rng = np.random.default_rng(seed)
    slots = range(state.layout.n)
    for _ in range(trials):
        u = haar_unitary(d, rng, special=True)
        if apply_local(state, u, slots).distance(state) >= tol:
            return False
    return True


def existence_rule(n_particles: int, d: int) -> bool:
    """Dark states of n d-level particles exist only when n is a multiple of d."""
    if n_particles < 1 or d < 2:
        raise QuantumError("need n_particles >= 1 and d >= 2")
    return n_particles % d == 0


MAX_MATCHING_M = 5


def enumerate_singlet_matchings(m: int) -> list[PureState]:
    """One singlet-product resource per pairing of Alice's qubits with the m remote qubits."""
    if not 1 <= m <= MAX_MATCHING_M:
        raise QuantumError(f"m must be in 1..{MAX_MATCHING_M}, got {m}")
    return [
        build(DarkStateSpec(ResourceKind.SINGLET_MATCHING_PRODUCT, m=m, matching=perm))
        for perm in itertools.permutations(range(m))
    ]
