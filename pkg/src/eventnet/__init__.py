"""Finite-dimensional operator-algebra nets on causal lattices.

The package simulates a quantum theory in which what happens is read off
the algebras themselves: each point of a discretized causal lattice
carries the matrix algebra of its future cone, a state singles out a
family of orthogonal projections at each point (the center of its
centralizer), and realized outcomes branch the state by the Born rule.
On top of that sit history enumeration and sampling, an approximate
measurement-recording criterion, and a small set of scenarios with
closed-form expectations.
"""

from .errors import (
    BranchOverflowError,
    CapExceededError,
    CommutationError,
    ConfigError,
    DimensionMismatchError,
    EigengapError,
    EventNetError,
    NullBranchError,
    ResolutionError,
)
from .events import (
    ActualEvent,
    EventDetection,
    collapse,
    detect_event,
    detect_event_on,
    mixture_check,
    mixture_defect,
    sample_actual,
    spacelike_commutator_norm,
)
from .histories import (
    BranchNode,
    HistoryOperator,
    HistoryTree,
    SampledHistory,
    SampleSummary,
    apply_propagator,
    enumerate_tree,
    history_operator,
    history_probability,
    propagate_state,
    sample_history,
    sample_paths,
)
from .measurement import (
    EventBasis,
    PhysicalQuantity,
    RecordingReport,
    SpectralDecomposition,
    event_basis,
    recording_check,
    spectral_decompose,
    validate_quantity,
)
from .opalg import (
    GnsSpace,
    Operator,
    OperatorAlgebra,
    PotentialEvent,
    RestrictedState,
    State,
    algebra_closure,
    center,
    center_of_centralizer,
    centralizer,
    commutant,
    commutant_of_operators,
    conditional_expectation,
    conditional_expectation_gns,
    diagonal_algebra,
    full_matrix_algebra,
    gns_construct,
    minimal_projections,
    support_restrict,
    traciality_defect,
)
from .policy import DEFAULT_POLICY, NumericPolicy
from .scenarios import (
    SCENARIO_BUILDERS,
    EvaluatedExpectation,
    Expected,
    NonlocalityReport,
    Scenario,
    build_scenario,
    epr_scenario,
    epr_overlap_scenario,
    evaluate_expected,
    massive_control,
    nonlocality_demo,
    order_independence_check,
    recording_demo,
    two_leaf_chain,
)
from .spacetime import (
    AlgebraNet,
    CausalLattice,
    CausalOrderReport,
    Foliation,
    NestingReport,
    Point,
    Relation,
    build_full_net,
    build_tensor_net,
    causal_relate,
    derive_causal_order,
    foliate,
    future_cone,
    verify_nesting,
)

__version__ = "0.1.0"
