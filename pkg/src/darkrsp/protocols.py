"""End-to-end remote state preparation over dark-state resources.

Every run follows the same pipeline: build the resource, let Alice rotate
her particles with the inverse preparation unitary, enumerate her
computational-basis measurement, decide per remote party which rotated
basis element it holds (the classical message), apply that party's
correction and score the result by fidelity against the target.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import log2, sqrt
from typing import Sequence

import numpy as np

from .core import (
    ZERO_PROB,
    PureState,
    QuantumError,
    apply_unitary,
    entanglement_entropy,
    is_product_across,
    measure_projective,
    reduced_fidelity,
)
from .dark_states import ALICE, DarkStateSpec, ResourceKind, build, remote_name
from .ensembles import (
    EnsembleSpec,
    Family,
    Params,
    QUBIT_FAMILIES,
    UncorrectableError,
    correction_unitary,
    params_to_dict,
    preparation_unitary,
    rotated_basis,
    target_state,
    validate_params,
)

SUCCESS_TOL = 1e-10
FAIL = "fail"


class ConfigurationError(QuantumError):
    """Resource, ensemble and party count do not form a runnable protocol."""


class ProtocolError(QuantumError):
    """A protocol that must be deterministic produced a failing branch."""


class Classifier(str, Enum):
    PAPER_LITERAL = "PaperLiteral"
    SEPARABILITY_AWARE = "SeparabilityAware"


class Accounting(str, Enum):
    """How many symbols a probabilistic run's message alphabet holds."""

    SUCCESS_ONLY = "success_only"
    SUCCESS_OR_FAIL = "success_or_fail"
    FULL_OUTCOME = "full_outcome"


class ProtocolKind(str, Enum):
    AUTO = "auto"
    EXACT = "exact"
    PROBABILISTIC = "probabilistic"
    JOINT = "joint"
    SINGLE_PARTICLE = "single_particle"


@dataclass(frozen=True)
class Sample:
    trials: int
    seed: int

    def __post_init__(self):
        if int(self.trials) < 1:
            raise ConfigurationError("sampling needs at least one trial")


@dataclass(frozen=True)
class ProtocolConfig:
    resource: DarkStateSpec
    ensemble: EnsembleSpec
    params: Params
    parties: int = 1
    protocol: ProtocolKind = ProtocolKind.AUTO
    sample: Sample | None = None
    classifier: Classifier = Classifier.PAPER_LITERAL
    accounting: Accounting = Accounting.SUCCESS_OR_FAIL

    def __post_init__(self):
        object.__setattr__(self, "protocol", ProtocolKind(self.protocol))
        object.__setattr__(self, "classifier", Classifier(self.classifier))
        object.__setattr__(self, "accounting", Accounting(self.accounting))

    @property
    def resolved_protocol(self) -> ProtocolKind:
        if self.protocol is not ProtocolKind.AUTO:
            return self.protocol
        return ProtocolKind.EXACT if _is_exact_combination(self) else ProtocolKind.PROBABILISTIC

    def to_dict(self) -> dict:
        return {
            "resource": self.resource.to_dict(),
            "ensemble": self.ensemble.to_dict(),
            "params": params_to_dict(self.params),
            "parties": self.parties,
            "protocol": self.protocol.value,
            "sample": None if self.sample is None else {"trials": self.sample.trials, "seed": self.sample.seed},
            "classifier": self.classifier.value,
            "accounting": self.accounting.value,
        }


@dataclass(frozen=True)
class OutcomeRecord:
    outcome: tuple[int, ...]
    probability: float
    messages: tuple[int | str, ...]
    fidelities: tuple[float, ...]
    success: bool
    separable: bool | None = None

    @property
    def fidelity_min(self) -> float | None:
        return min(self.fidelities) if self.fidelities else None


@dataclass(frozen=True)
class ResourceLedger:
    ebits: float
    cbits_per_party: float
    cbits_total: float
    messages: int


@dataclass(frozen=True)
class SamplingResult:
    trials: int
    seed: int
    counts: tuple[int, ...]
    successes: int

    @property
    def empirical_success_rate(self) -> float:
        return self.successes / self.trials


@dataclass
class Transcript:
    config: ProtocolConfig
    steps: list[str]
    records: list[OutcomeRecord]
    success_probability: float
    ledger: ResourceLedger
    sampling: SamplingResult | None = None
    target: PureState | None = field(default=None, repr=False)

    @property
    def total_probability(self) -> float:
        return float(sum(r.probability for r in self.records))

    def nonzero_records(self) -> list[OutcomeRecord]:
        return [r for r in self.records if r.probability > 0]


# ---------------------------------------------------------------- compatibility

_QUBIT_EXACT_RESOURCES = (
    ResourceKind.SINGLET,
    ResourceKind.FOUR_QUBIT_A,
    ResourceKind.FOUR_QUBIT_B,
    ResourceKind.SINGLET_MATCHING_PRODUCT,
)
_ANTISYMMETRIC = (ResourceKind.ANTISYMMETRIC, ResourceKind.ANTISYMMETRIC_PRODUCT)


def _is_exact_combination(config: ProtocolConfig) -> bool:
    res, ens = config.resource, config.ensemble
    if not ens.fully_correctable or res.dimension != ens.d:
        return False
    return res.kind in _QUBIT_EXACT_RESOURCES or res.kind in _ANTISYMMETRIC


def check_compatibility(config: ProtocolConfig) -> None:
    """Raise ConfigurationError unless the config describes a runnable protocol."""
    res, ens = config.resource, config.ensemble
    kind = config.resolved_protocol
    try:
        validate_params(ens, config.params)
    except QuantumError as exc:
        raise ConfigurationError(f"parameters do not fit {ens.family.value}: {exc}") from exc
    if res.dimension != ens.d:
        raise ConfigurationError(
            f"dimension mismatch: {res.kind.value} holds {res.dimension}-level particles, "
            f"{ens.family.value} targets d={ens.d}"
        )
    if kind is ProtocolKind.JOINT:
        if res.kind is not ResourceKind.ANTISYMMETRIC or res.d != 3 or ens.family is not Family.QUTRIT_EQUATORIAL:
            raise ConfigurationError("joint preparation runs on Antisymmetric(3) with the QutritEquatorial family")
        if config.parties != 1:
            raise ConfigurationError("joint preparation has exactly one receiving party")
        return
    if kind is ProtocolKind.SINGLE_PARTICLE:
        if res.kind is not ResourceKind.ANTISYMMETRIC:
            raise ConfigurationError("single-particle attempt distributes an Antisymmetric(d) resource")
        if config.parties != res.d - 1:
            raise ConfigurationError(f"one particle per party leaves {res.d - 1} receivers, not {config.parties}")
        return
    if config.parties != res.remote_parties:
        raise ConfigurationError(
            f"{res.kind.value} serves {res.remote_parties} remote parties, config asks for {config.parties}"
        )
    if kind is ProtocolKind.EXACT and not _is_exact_combination(config):
        raise ConfigurationError(
            f"{res.kind.value} with {ens.family.value} is not an exact protocol combination"
        )
    if kind is ProtocolKind.PROBABILISTIC and res.kind is ResourceKind.SUPERPOSED_FOUR_QUBIT:
        if ens.family not in QUBIT_FAMILIES:
            raise ConfigurationError("SuperposedFourQubit needs a qubit family")


# ---------------------------------------------------------------- enumeration

def _literal_failure_outcomes(resource: DarkStateSpec) -> frozenset[tuple[int, ...]]:
    """Outcomes declared failures outright, whatever the remote state turns out to be."""
    if resource.kind is ResourceKind.SUPERPOSED_FOUR_QUBIT:
        return frozenset({(0, 1), (1, 0)})
    return frozenset()


def _match(post: PureState, slot: int, basis: Sequence[PureState]) -> int | None:
    fids = [reduced_fidelity(post, [slot], b.amplitudes) for b in basis]
    k = int(np.argmax(fids))
    return k if fids[k] >= 1 - SUCCESS_TOL else None


def _settle_branch(
    post: PureState,
    ensemble: EnsembleSpec,
    basis: Sequence[PureState],
    target: PureState,
    declared_fail: bool,
    check_product: bool,
) -> tuple[tuple[int | str, ...], tuple[float, ...], bool, bool | None]:
    """Messages, post-correction fidelities, success, and remote separability for one branch."""
    n = post.layout.n
    separable = None
    if n > 1:
        separable = all(is_product_across(post, ([i], [j for j in range(n) if j != i])) for i in range(n))
    messages: list[int | str] = []
    corrected = post
    for slot in range(n):
        k = None if declared_fail or (check_product and separable is False) else _match(post, slot, basis)
        if k is not None:
            try:
                corrected = apply_unitary(corrected, correction_unitary(ensemble, k), [slot])
            except UncorrectableError:
                k = None
        messages.append(FAIL if k is None else k)
    fids = tuple(reduced_fidelity(corrected, [slot], target.amplitudes) for slot in range(n))
    success = FAIL not in messages and min(fids) >= 1 - SUCCESS_TOL
    return tuple(messages), fids, success, separable


def _enumerate(
    config: ProtocolConfig,
    state: PureState,
    steps: list[str],
    declared: frozenset = frozenset(),
    check_product: bool = False,
) -> list[OutcomeRecord]:
    ens, params = config.ensemble, config.params
    u = preparation_unitary(ens, params)
    basis = rotated_basis(ens, params)
    target = basis[0]
    alice = list(state.layout.slots_of(ALICE))
    for s in alice:
        state = apply_unitary(state, u.dag, [s])
    steps.append(f"Alice applies U^dagger to slots {alice}")
    branches = measure_projective(state, alice)
    steps.append(f"Alice measures slots {alice} in the computational basis: {len(branches)} outcomes")
    records = []
    for br in branches:
        if br.post_state is None:
            records.append(OutcomeRecord(br.outcome, 0.0, (), (), False))
            continue
        msgs, fids, ok, sep = _settle_branch(
            br.post_state, ens, basis, target, br.outcome in declared, check_product
        )
        records.append(OutcomeRecord(br.outcome, br.probability, msgs, fids, ok, sep))
    steps.append("messages sent; remote parties apply corrections")
    return records


def _ledger(state: PureState, per_party_alphabet: int, messages: int) -> ResourceLedger:
    alice = state.layout.slots_of(ALICE)
    ebits = entanglement_entropy(state, alice)
    per = log2(per_party_alphabet) if per_party_alphabet > 1 else 0.0
    return ResourceLedger(ebits, per, per * messages, messages)


def _finish(config, steps, records, state, alphabet, messages, target) -> Transcript:
    p_success = float(sum(r.probability for r in records if r.success))
    ledger = _ledger(state, alphabet, messages)
    steps.append(f"success probability {p_success!r}; ebits={ledger.ebits:.6g} cbits_total={ledger.cbits_total:.6g}")
    return Transcript(config, steps, records, p_success, ledger, target=target)


def run_exact_rsp(config: ProtocolConfig) -> Transcript:
    if config.protocol not in (ProtocolKind.AUTO, ProtocolKind.EXACT):
        raise ConfigurationError(f"run_exact_rsp cannot run a {config.protocol.value} config")
    config = _with_kind(config, ProtocolKind.EXACT)
    check_compatibility(config)
    state = build(config.resource)
    steps = [f"resource {config.resource.kind.value} built on dims {state.layout.dims}"]
    records = _enumerate(config, state, steps)
    bad = [r.outcome for r in records if r.probability > 0 and not r.success]
    if bad:
        raise ProtocolError(f"exact protocol left outcomes {bad} uncorrected")
    target = target_state(config.ensemble, config.params)
    return _finish(config, steps, records, state, config.ensemble.d, config.parties, target)


def run_probabilistic_rsp(config: ProtocolConfig) -> Transcript:
    if config.protocol not in (ProtocolKind.AUTO, ProtocolKind.PROBABILISTIC):
        raise ConfigurationError(f"run_probabilistic_rsp cannot run a {config.protocol.value} config")
    config = _with_kind(config, ProtocolKind.PROBABILISTIC)
    check_compatibility(config)
    state = build(config.resource)
    steps = [f"resource {config.resource.kind.value} built on dims {state.layout.dims}"]
    literal = config.classifier is Classifier.PAPER_LITERAL
    declared = _literal_failure_outcomes(config.resource) if literal else frozenset()
    records = _enumerate(config, state, steps, declared=declared, check_product=not literal)
    target = target_state(config.ensemble, config.params)
    alphabet = _alphabet(config, state)
    return _finish(config, steps, records, state, alphabet, config.parties, target)


def _alphabet(config: ProtocolConfig, state: PureState) -> int:
    acc = config.accounting
    n_ok = len(config.ensemble.correctable_indices)
    if acc is Accounting.SUCCESS_ONLY:
        return n_ok
    if acc is Accounting.SUCCESS_OR_FAIL:
        return n_ok + 1
    alice = state.layout.slots_of(ALICE)
    return int(np.prod([state.layout.dims[s] for s in alice]))


def _with_kind(config: ProtocolConfig, kind: ProtocolKind) -> ProtocolConfig:
    if config.protocol is kind:
        return config
    return ProtocolConfig(
        config.resource, config.ensemble, config.params, config.parties, kind,
        config.sample, config.classifier, config.accounting,
    )


def run_single_particle_rsp(config: ProtocolConfig) -> Transcript:
    """Antisymmetric(d) with one particle per party and a one-particle measurement by Alice.

    Receivers stay entangled with each other, so no branch succeeds.
    """
    config = _with_kind(config, ProtocolKind.SINGLE_PARTICLE)
    check_compatibility(config)
    d = config.resource.d
    state = build(config.resource).relabel([ALICE] + [remote_name(i) for i in range(d - 1)])
    steps = [f"resource Antisymmetric({d}) distributed one particle per party"]
    records = _enumerate(config, state, steps, check_product=True)
    target = target_state(config.ensemble, config.params)
    return _finish(config, steps, records, state, len(config.ensemble.correctable_indices) + 1, d - 1, target)


def run_joint_rsp(params: Params, ensemble: EnsembleSpec | None = None) -> Transcript:
    """Alice and Bob both know the target and measure in turn; Charlie receives it.

    Each sender rotates their qutrit by U^dagger and measures it. Charlie's
    correction index follows from matching his conditional state against
    the Fourier basis.
    """
    ensemble = ensemble or EnsembleSpec(Family.QUTRIT_EQUATORIAL)
    config = ProtocolConfig(DarkStateSpec(ResourceKind.ANTISYMMETRIC, d=3), ensemble, params, 1, ProtocolKind.JOINT)
    check_compatibility(config)
    state = build(config.resource).relabel([ALICE, "Bob", "Charlie"])
    u = preparation_unitary(ensemble, params)
    basis = rotated_basis(ensemble, params)
    target = basis[0]
    steps = ["resource Antisymmetric(3): Alice slot 0, Bob slot 1, Charlie slot 2"]
    state = apply_unitary(state, u.dag, [0])
    steps.append("Alice applies U^dagger and measures slot 0")
    records = []
    for a_br in measure_projective(state, [0]):
        if a_br.post_state is None:
            continue
        bob_state = apply_unitary(a_br.post_state, u.dag, [0])
        for b_br in measure_projective(bob_state, [0]):
            outcome = a_br.outcome + b_br.outcome
            p = a_br.probability * b_br.probability
            if b_br.post_state is None or p < ZERO_PROB:
                records.append(OutcomeRecord(outcome, 0.0, (), (), False))
                continue
            msgs, fids, ok, _ = _settle_branch(b_br.post_state, ensemble, basis, target, False, False)
            records.append(OutcomeRecord(outcome, p, msgs, fids, ok))
    steps.append("Bob applies U^dagger and measures; Charlie corrects from both messages")
    bad = [r.outcome for r in records if r.probability > 0 and not r.success]
    if bad:
        raise ProtocolError(f"joint protocol left outcomes {bad} uncorrected")
    p_success = float(sum(r.probability for r in records if r.success))
    ebits = entanglement_entropy(build(config.resource), [0, 1])
    per = log2(3)
    # Alice -> Bob, Alice -> Charlie, Bob -> Charlie
    ledger = ResourceLedger(ebits, per, 3 * per, 3)
    steps.append(f"success probability {p_success!r}; ebits={ebits:.6g} cbits_total={3 * per:.6g}")
    return Transcript(config, steps, records, p_success, ledger, target=target)


def run_protocol(config: ProtocolConfig) -> Transcript:
    """Dispatch on the config's protocol kind; sample afterwards if requested."""
    kind = config.resolved_protocol
    if kind is ProtocolKind.EXACT:
        tr = run_exact_rsp(config)
    elif kind is ProtocolKind.PROBABILISTIC:
        tr = run_probabilistic_rsp(config)
    elif kind is ProtocolKind.JOINT:
        check_compatibility(config)
        tr = run_joint_rsp(config.params, config.ensemble)
        tr.config = config
    else:
        tr = run_single_particle_rsp(config)
    if config.sample is not None:
        tr.sampling = draw_samples(tr, config.sample)
    return tr


# ---------------------------------------------------------------- sampling

def trial_uniforms(seed: int, start: int, stop: int) -> np.ndarray:
    """Uniform variates for trials start..stop-1.

    Trial i always receives the i-th double of a Philox stream keyed by
    `seed`, so any chunking of the trial range reproduces the same draws.
    """
    bitgen = np.random.Philox(key=int(seed))
    # one double consumes one 64-bit output; Philox advances in 4-word blocks
    block, offset = divmod(start, 4)
    bitgen.advance(block)
    rng = np.random.Generator(bitgen)
    if offset:
        rng.random(offset)
    return rng.random(stop - start)


def draw_samples(transcript: Transcript, sample: Sample, chunk: int = 1 << 16) -> SamplingResult:
    probs = np.array([r.probability for r in transcript.records])
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    counts = np.zeros(len(probs), dtype=np.int64)
    for start in range(0, sample.trials, chunk):
        u = trial_uniforms(sample.seed, start, min(sample.trials, start + chunk))
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(probs) - 1)
        counts += np.bincount(idx, minlength=len(probs))
    successes = int(sum(c for c, r in zip(counts, transcript.records) if r.success))
    return SamplingResult(int(sample.trials), int(sample.seed), tuple(int(c) for c in counts), successes)


def sample_protocol(config: ProtocolConfig) -> Transcript:
    if config.sample is None:
        raise ConfigurationError("sample_protocol needs a config with sampling settings")
    return run_protocol(config)


def binomial_sigma(p: float, n: int) -> float:
    return sqrt(p * (1 - p) / n)


# ---------------------------------------------------------------- closed forms

@dataclass(frozen=True)
class BranchProbabilities:
    P00: float
    P11: float
    P01: float
    P10: float
    PS: float


def _norm_sq(a: float, b: float) -> float:
    s = a * a + b * b + a * b
    if s <= 1e-12:
        raise QuantumError(f"degenerate normalization: a^2+b^2+ab = {s!r}")
    return s


def success_probability_formula(a: float, b: float) -> BranchProbabilities:
    """Branch probabilities of the superposed four-qubit resource, as printed."""
    s = _norm_sq(a, b)
    p_same = a * a / (4 * s)
    p_cross = ((a + b) ** 2 + b * b) / (4 * s)
    return BranchProbabilities(p_same, p_same, p_cross, p_cross, a * a / (2 * s))


def _xlog2x(x: float) -> float:
    return x * log2(x) if x > 0 else 0.0


def entanglement_formula(a: float, b: float) -> float:
    """Entanglement of (1,2)|(3,4) for the superposed resource, in ebits."""
    n2 = 1 / (4 * _norm_sq(a, b))
    return 0.0 - 3 * _xlog2x(n2 * a * a) - _xlog2x(n2 * (a + 2 * b) ** 2)
