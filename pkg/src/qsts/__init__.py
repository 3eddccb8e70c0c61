"""Pure-state simulator and verification harness for entanglement-swapping
quantum state sharing of an arbitrary two-qubit secret."""

from .states import (
    DensityMatrix,
    LabelError,
    PureState,
    StateError,
    basis_state,
    apply_one_qubit,
    fidelity_pure,
    partial_trace,
    reorder_labels,
    tensor_product,
)
from .bell import (
    BELL_ORDER,
    BellOutcome,
    PauliOp,
    Rng,
    apply_pauli_pair,
    bell_measure,
    bell_probabilities,
    bell_project,
    bell_state,
    epr_pair,
)
from .protocols import (
    ConfigError,
    CorrectionKey,
    CorrectionRule,
    CorrectionTable,
    MeasurementRecord,
    ProtocolTranscript,
    PublishedBits,
    Scheme,
    SchemeConfig,
    TwoQubitSecret,
    alice_publication,
    build_setup,
    correction_for,
    derive_correction_table,
    fiducial_secret,
    final_state_for_outcomes,
    measurement_schedule,
    ownership,
    receiver_pair,
    run_protocol,
)
from .verification import (
    audit_expansion,
    check_golden_tables,
    monte_carlo_fidelity,
    outcome_chi_square,
    security_check,
    verify_all,
)

__version__ = "0.1.0"
