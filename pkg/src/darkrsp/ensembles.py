"""Target-state families, their rotated bases, and parameter-free corrections.

Every family has one canonical orthonormal basis whose element 0 is the
target. A correction for basis index k is a fixed unitary (no dependence on
the continuous parameters) that maps element k onto the target, possibly up
to a global phase.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import acos, cos, pi, sin, sqrt
from typing import Union

import numpy as np

from .core import PureState, QuantumError, SubsystemLayout, UnitaryOp

PARAM_TOL = 1e-12
TWO_PI = 2 * pi


class UncorrectableError(QuantumError):
    """No parameter-independent correction exists for this basis index."""


class Family(str, Enum):
    QUBIT_POLAR_REAL = "QubitPolarReal"
    QUBIT_EQUATORIAL = "QubitEquatorial"
    QUBIT_POLAR_IMAG = "QubitPolarImag"
    QUBIT_FIXED_PHASE = "QubitFixedPhase"
    QUBIT_FIXED_THETA = "QubitFixedTheta"
    QUTRIT_GENERAL = "QutritGeneral"
    QUTRIT_EQUATORIAL = "QutritEquatorial"
    QUTRIT_RESTRICTED = "QutritRestricted"
    QUDIT_FOURIER = "QuditFourier"
    QUDIT_GENERAL = "QuditGeneral"
    QUDIT_RESTRICTED4 = "QuditRestricted4"


QUBIT_FAMILIES = frozenset(
    {Family.QUBIT_POLAR_REAL, Family.QUBIT_EQUATORIAL, Family.QUBIT_POLAR_IMAG, Family.QUBIT_FIXED_PHASE}
)


@dataclass(frozen=True)
class QubitParams:
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        _check_range("theta", self.theta, 0.0, pi, closed=True)
        _check_range("phi", self.phi, 0.0, TWO_PI, closed=False)


@dataclass(frozen=True)
class QutritParams:
    gamma1: float
    gamma2: float
    delta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        _check_range("gamma1", self.gamma1, 0.0, pi / 2, closed=True)
        _check_range("gamma2", self.gamma2, 0.0, pi / 2, closed=True)
        _check_range("delta", self.delta, 0.0, TWO_PI, closed=False)
        _check_range("phi", self.phi, 0.0, TWO_PI, closed=False)

    def as_qudit(self) -> "QuditParams":
        return QuditParams(3, (self.gamma1, self.gamma2), (self.delta, self.phi))


@dataclass(frozen=True)
class QuditParams:
    """Hyperspherical angles gammas[0..d-2] and phases alphas for basis states 1..d-1."""

    d: int
    gammas: tuple[float, ...]
    alphas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if self.d < 2:
            raise QuantumError("qudit dimension must be >= 2")
        if len(self.gammas) != self.d - 1 or len(self.alphas) != self.d - 1:
            raise QuantumError(f"need {self.d - 1} gammas and {self.d - 1} alphas for d={self.d}")
        for i, g in enumerate(self.gammas):
            _check_range(f"gamma{i + 1}", g, 0.0, pi / 2, closed=True)
        for i, a in enumerate(self.alphas):
            _check_range(f"alpha{i + 1}", a, 0.0, TWO_PI, closed=False)


Params = Union[QubitParams, QutritParams, QuditParams]


def _check_range(name, value, lo, hi, closed):
    v = float(value)
    ok = lo - PARAM_TOL <= v <= hi + PARAM_TOL if closed else lo - PARAM_TOL <= v < hi
    if not ok:
        bracket = "]" if closed else ")"
        raise QuantumError(f"{name}={v!r} outside [{lo}, {hi}{bracket}")


def fourier_gammas(d: int) -> tuple[float, ...]:
    """Angles giving |beta_j| = 1/sqrt(d) for every j."""
    return tuple(acos(1 / sqrt(d - j)) for j in range(d - 1))


@dataclass(frozen=True)
class EnsembleSpec:
    family: Family
    d: int | None = None
    phi0: float | None = None

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if fam is Family.QUBIT_FIXED_THETA:
            raise UncorrectableError(
                "theta-fixed qubit ensembles have Hermitian, non-unitary connectors; not remotely preparable"
            )
        if fam is Family.QUBIT_FIXED_PHASE:
            if self.phi0 is None:
                raise QuantumError("QubitFixedPhase needs phi0")
            _check_range("phi0", self.phi0, 0.0, TWO_PI, closed=False)
            object.__setattr__(self, "phi0", float(self.phi0))
        if fam in QUBIT_FAMILIES:
            self._fix_d(2)
        elif fam in (Family.QUTRIT_GENERAL, Family.QUTRIT_EQUATORIAL, Family.QUTRIT_RESTRICTED):
            self._fix_d(3)
        elif fam is Family.QUDIT_RESTRICTED4:
            self._fix_d(4)
        elif self.d is None or int(self.d) < 2:
            raise QuantumError(f"{fam.value} needs d >= 2")
        else:
            object.__setattr__(self, "d", int(self.d))

    def _fix_d(self, d):
        if self.d is not None and int(self.d) != d:
            raise QuantumError(f"{self.family.value} has dimension {d}, not {self.d}")
        object.__setattr__(self, "d", d)

    @property
    def fully_correctable(self) -> bool:
        return self.family in QUBIT_FAMILIES or self.family in (Family.QUTRIT_EQUATORIAL, Family.QUDIT_FOURIER)

    @property
    def correctable_indices(self) -> tuple[int, ...]:
        if self.fully_correctable:
            return tuple(range(self.d))
        if self.family in (Family.QUTRIT_RESTRICTED, Family.QUDIT_RESTRICTED4):
            return (0, 1)
        return (0,)

    def to_dict(self) -> dict:
        out = {"family": self.family.value}
        if self.family in (Family.QUDIT_FOURIER, Family.QUDIT_GENERAL):
            out["d"] = self.d
        if self.phi0 is not None:
            out["phi0"] = self.phi0
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "EnsembleSpec":
        data = dict(data)
        family = data.pop("family")
        unknown = set(data) - {"d", "phi0"}
        if unknown:
            raise QuantumError(f"unknown ensemble fields: {sorted(unknown)}")
        return cls(family, **data)


# ---------------------------------------------------------------- parameters

def _close(x, y):
    return abs(float(x) - float(y)) <= PARAM_TOL


def validate_params(spec: EnsembleSpec, params: Params) -> None:
    fam = spec.family
    if fam in QUBIT_FAMILIES:
        if not isinstance(params, QubitParams):
            raise QuantumError(f"{fam.value} takes QubitParams")
        fixed_phi = {
            Family.QUBIT_POLAR_REAL: 0.0,
            Family.QUBIT_POLAR_IMAG: pi / 2,
            Family.QUBIT_FIXED_PHASE: spec.phi0,
        }.get(fam)
        if fixed_phi is not None and not _close(params.phi, fixed_phi):
            raise QuantumError(f"{fam.value} fixes phi={fixed_phi!r}, got {params.phi!r}")
        if fam is Family.QUBIT_EQUATORIAL and not _close(params.theta, pi / 2):
            raise QuantumError(f"QubitEquatorial fixes theta=pi/2, got {params.theta!r}")
        return
    q = _as_qudit(params, spec.d)
    if fam in (Family.QUTRIT_EQUATORIAL, Family.QUDIT_FOURIER):
        if not all(_close(g, f) for g, f in zip(q.gammas, fourier_gammas(spec.d))):
            raise QuantumError(f"{fam.value} requires uniform amplitudes; gammas {q.gammas} do not match")
    elif fam in (Family.QUTRIT_RESTRICTED, Family.QUDIT_RESTRICTED4):
        if not _close(q.gammas[0], pi / 4):
            raise QuantumError(f"{fam.value} fixes gamma1=pi/4, got {q.gammas[0]!r}")


def _as_qudit(params: Params, d: int) -> QuditParams:
    if isinstance(params, QutritParams):
        params = params.as_qudit()
    if not isinstance(params, QuditParams):
        raise QuantumError(f"expected qutrit/qudit parameters, got {type(params).__name__}")
    if params.d != d:
        raise QuantumError(f"parameters are for d={params.d}, ensemble has d={d}")
    return params


def make_params(spec: EnsembleSpec, values: dict) -> Params:
    """Build a family-conforming parameter record from the family's free values.

    Qubit: theta, phi. Qutrit: gamma1, gamma2, delta, phi. Qudit: gammas,
    alphas (lists). Values a family fixes may be omitted; giving a different
    value for one of them is an error.
    """
    fam = spec.family
    values = dict(values)
    qutrit = fam in (Family.QUTRIT_GENERAL, Family.QUTRIT_EQUATORIAL, Family.QUTRIT_RESTRICTED)
    for key, fixed in _fixed_values(spec).items():
        if key == "gamma1" and "gammas" in values:
            continue
        values.setdefault(key, fixed)
    if fam in QUBIT_FAMILIES:
        p = QubitParams(float(values.pop("theta", 0.0)), float(values.pop("phi", 0.0)))
    elif qutrit:
        p = QutritParams(*(float(values.pop(k, 0.0)) for k in ("gamma1", "gamma2", "delta", "phi")))
    else:
        d = spec.d
        gammas = list(values.pop("gammas", [0.0] * (d - 1)))
        if "gamma1" in values:
            gammas[0] = values.pop("gamma1")
        p = QuditParams(d, tuple(gammas), tuple(values.pop("alphas", [0.0] * (d - 1))))
    if values:
        raise QuantumError(f"unexpected parameters for {fam.value}: {sorted(values)}")
    validate_params(spec, p)
    return p


def _fixed_values(spec: EnsembleSpec) -> dict:
    fam = spec.family
    if fam is Family.QUBIT_POLAR_REAL:
        return {"phi": 0.0}
    if fam is Family.QUBIT_POLAR_IMAG:
        return {"phi": pi / 2}
    if fam is Family.QUBIT_FIXED_PHASE:
        return {"phi": spec.phi0}
    if fam is Family.QUBIT_EQUATORIAL:
        return {"theta": pi / 2}
    if fam is Family.QUTRIT_EQUATORIAL:
        g1, g2 = fourier_gammas(3)
        return {"gamma1": g1, "gamma2": g2}
    if fam is Family.QUTRIT_RESTRICTED:
        return {"gamma1": pi / 4}
    if fam is Family.QUDIT_FOURIER:
        return {"gammas": list(fourier_gammas(spec.d))}
    if fam is Family.QUDIT_RESTRICTED4:
        return {"gamma1": pi / 4}
    return {}


def random_params(spec: EnsembleSpec, rng: np.random.Generator) -> Params:
    """Uniform draw over the family's free parameters."""
    fam = spec.family
    d = spec.d
    if fam in QUBIT_FAMILIES:
        raw = {"theta": rng.uniform(0, pi), "phi": rng.uniform(0, TWO_PI)}
    elif d == 3 and fam in (Family.QUTRIT_GENERAL, Family.QUTRIT_EQUATORIAL, Family.QUTRIT_RESTRICTED):
        g = rng.uniform(0, pi / 2, size=2)
        ph = rng.uniform(0, TWO_PI, size=2)
        raw = {"gamma1": g[0], "gamma2": g[1], "delta": ph[0], "phi": ph[1]}
    else:
        raw = {"gammas": list(rng.uniform(0, pi / 2, size=d - 1)), "alphas": list(rng.uniform(0, TWO_PI, size=d - 1))}
    # the draws above are always made, so the stream does not depend on the family
    fixed = _fixed_values(spec)
    for key in fixed:
        raw.pop(key, None)
    if "gamma1" in fixed and "gammas" in raw:
        raw["gammas"][0] = fixed["gamma1"]
    return make_params(spec, raw)


def params_to_dict(params: Params) -> dict:
    if isinstance(params, QuditParams):
        return {"d": params.d, "gammas": list(params.gammas), "alphas": list(params.alphas)}
    return dict(vars(params))


# ---------------------------------------------------------------- amplitudes

def hyperspherical_amplitudes(gammas, alphas) -> np.ndarray:
    """beta_0 = cos g1, beta_j = e^{i a_j} cos g_{j+1} prod_{i<=j} sin g_i, last one all sines."""
    d = len(gammas) + 1
    beta = np.empty(d, dtype=complex)
    sines = 1.0
    for j in range(d):
        mag = sines * (cos(gammas[j]) if j < d - 1 else 1.0)
        beta[j] = mag * (np.exp(1j * alphas[j - 1]) if j else 1.0)
        if j < d - 1:
            sines *= sin(gammas[j])
    return beta


def _hyperspherical_basis(gammas, alphas) -> list[np.ndarray]:
    """psi_0 is the target; psi_k = sin g_k e^{i a_{k-1}}|k-1> - cos g_k * tail_k.

    tail_k is the unit vector of the target's components k..d-1 with the
    leading sines of g_1..g_k stripped off. At d=3 and d=4 this reproduces
    the explicitly printed bases.
    """
    d = len(gammas) + 1
    phases = np.concatenate([[1.0], np.exp(1j * np.asarray(alphas, dtype=float))])
    basis = [hyperspherical_amplitudes(gammas, alphas)]
    for k in range(1, d):
        tail = np.zeros(d, dtype=complex)
        sines = 1.0
        for j in range(k, d):
            mag = sines * (cos(gammas[j]) if j < d - 1 else 1.0)
            tail[j] = mag * phases[j]
            if j < d - 1:
                sines *= sin(gammas[j])
        v = -cos(gammas[k - 1]) * tail
        v[k - 1] = sin(gammas[k - 1]) * phases[k - 1]
        basis.append(v)
    return basis


def _fourier_basis(d: int, alphas) -> list[np.ndarray]:
    gamma = np.exp(2j * pi / d)
    phases = np.concatenate([[1.0], np.exp(1j * np.asarray(alphas, dtype=float))])
    j = np.arange(d)
    return [gamma ** (j * k) * phases / sqrt(d) for k in range(d)]


def _qubit_basis(params: QubitParams) -> list[np.ndarray]:
    c, s = cos(params.theta / 2), sin(params.theta / 2)
    e = np.exp(1j * params.phi)
    return [np.array([c, s * e]), np.array([-s, c * e])]


def _basis_vectors(spec: EnsembleSpec, params: Params) -> list[np.ndarray]:
    validate_params(spec, params)
    fam = spec.family
    if fam in QUBIT_FAMILIES:
        return _qubit_basis(params)
    q = _as_qudit(params, spec.d)
    if fam in (Family.QUTRIT_EQUATORIAL, Family.QUDIT_FOURIER):
        return _fourier_basis(spec.d, q.alphas)
    return _hyperspherical_basis(q.gammas, q.alphas)


def _ket(spec: EnsembleSpec, v: np.ndarray) -> PureState:
    return PureState(SubsystemLayout((spec.d,), ("target",)), v)


def target_state(spec: EnsembleSpec, params: Params) -> PureState:
    return _ket(spec, _basis_vectors(spec, params)[0])


def rotated_basis(spec: EnsembleSpec, params: Params) -> list[PureState]:
    return [_ket(spec, v) for v in _basis_vectors(spec, params)]


def preparation_unitary(spec: EnsembleSpec, params: Params) -> UnitaryOp:
    """U with U|k> = |psi_k>."""
    return UnitaryOp(np.column_stack(_basis_vectors(spec, params)))


# ---------------------------------------------------------------- corrections

_IY = np.array([[0, 1], [-1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)


def fourier_correction(d: int, k: int) -> UnitaryOp:
    """sum_j Gamma^{-kj} |j><j|, Gamma = e^{2 pi i/d}."""
    j = np.arange(d)
    return UnitaryOp.diag(np.exp(-2j * pi * k * j / d))


def correction_unitary(spec: EnsembleSpec, basis_index: int) -> UnitaryOp:
    d = spec.d
    k = int(basis_index)
    if not 0 <= k < d:
        raise QuantumError(f"basis index {k} out of range for d={d}")
    if k == 0:
        return UnitaryOp.identity(d)
    if k not in spec.correctable_indices:
        raise UncorrectableError(f"{spec.family.value}: no parameter-independent correction for basis index {k}")
    fam = spec.family
    if fam is Family.QUBIT_POLAR_REAL:
        return UnitaryOp(_IY)
    if fam is Family.QUBIT_EQUATORIAL:
        return UnitaryOp(_Z)
    if fam is Family.QUBIT_POLAR_IMAG:
        return UnitaryOp(_X)
    if fam is Family.QUBIT_FIXED_PHASE:
        return UnitaryOp(np.array([[0, np.exp(-1j * spec.phi0)], [-np.exp(1j * spec.phi0), 0]]))
    if fam in (Family.QUTRIT_EQUATORIAL, Family.QUDIT_FOURIER):
        return fourier_correction(d, k)
    # restricted families, index 1: gamma1 = pi/4 makes psi_1 a sign flip of psi_0 on |1>..|d-1>
    return UnitaryOp.diag([1.0] + [-1.0] * (d - 1))
