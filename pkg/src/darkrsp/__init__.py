"""Remote state preparation of qubits, qutrits and qudits over dark-state resources."""
from .core import (
    DensityMatrix,
    MeasurementBranch,
    PureState,
    QuantumError,
    SubsystemLayout,
    UnitaryOp,
    apply_unitary,
    fidelity,
    is_product_across,
    measure_projective,
    partial_trace,
    tensor,
    von_neumann_entropy,
)
from .dark_states import DarkStateSpec, ResourceKind, build, enumerate_singlet_matchings, existence_rule, verify_dark
from .ensembles import (
    EnsembleSpec,
    Family,
    QubitParams,
    QuditParams,
    QutritParams,
    UncorrectableError,
    correction_unitary,
    make_params,
    preparation_unitary,
    rotated_basis,
    target_state,
)
from .protocols import (
    Classifier,
    ConfigurationError,
    ProtocolConfig,
    Sample,
    Transcript,
    entanglement_formula,
    run_exact_rsp,
    run_joint_rsp,
    run_probabilistic_rsp,
    run_protocol,
    sample_protocol,
    success_probability_formula,
)

__version__ = "0.1.0"

__all__ = [
    "Classifier",
    "ConfigurationError",
    "DarkStateSpec",
    "DensityMatrix",
    "EnsembleSpec",
    "Family",
    "MeasurementBranch",
    "ProtocolConfig",
    "PureState",
    "QuantumError",
    "QubitParams",
    "QuditParams",
    "QutritParams",
    "ResourceKind",
    "Sample",
    "SubsystemLayout",
    "Transcript",
    "UncorrectableError",
    "UnitaryOp",
    "apply_unitary",
    "build",
    "correction_unitary",
    "entanglement_formula",
    "enumerate_singlet_matchings",
    "existence_rule",
    "fidelity",
    "is_product_across",
    "make_params",
    "measure_projective",
    "partial_trace",
    "preparation_unitary",
    "rotated_basis",
    "run_exact_rsp",
    "run_joint_rsp",
    "run_probabilistic_rsp",
    "run_protocol",
    "sample_protocol",
    "success_probability_formula",
    "target_state",
    "tensor",
    "verify_dark",
    "von_neumann_entropy",
]
