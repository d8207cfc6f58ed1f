"""qfix: quantum-channel fixed points, CTC consistency, and truncated
Fock-space constraint checks."""

__version__ = "0.1.0"

from .operators import (
    CertificationError,
    DensityOperator,
    Projection,
    hermitian_eig,
    matrix_from_json,
    matrix_to_json,
    operator_norm,
    partial_trace,
    tensor,
    trace_norm,
)
from .channels import (
    Channel,
    ChoiMatrix,
    CptpReport,
    KrausChannel,
    StinespringChannel,
    SuperoperatorMatrix,
    apply,
    channel_from_json,
    channel_to_json,
    choi,
    choi_to_kraus,
    compose,
    deutsch_channel,
    kraus_to_superop,
    to_kraus,
    to_superop,
    truncated_shift_channel,
    verify_cptp,
)
from .fixpoint import (
    FixedPointError,
    FixedPointResult,
    cesaro_iterate,
    fixed_point_multiplicity,
    residual,
    spectral_fixed_point,
)
from .fock import (
    ConstraintSet,
    FockSpace,
    PvmGrid,
    TruncationProjection,
    build_fock,
    convexity_check,
    energy_operator,
    fock_constraints,
    k_membership,
    markov_mass_check,
    number_operator,
    pvm_grid,
    rank_one_truncation_norm,
    sample_k,
    spectral_subspace_dim,
    truncation_defect,
    truncation_projection,
)
from .ctc import (
    ConsistentHistory,
    CtcScenario,
    build_ctc_channel,
    cylinder_fixed_points,
    derive_rho_in,
    k_invariance_probe,
    scenario_from_json,
    scenario_to_json,
    solve_history,
)
