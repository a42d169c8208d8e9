"""Trust ratings for clustered nodes, driven by quantified uncertainty.

The pipeline: observations of uncertainty facets are turned into certainty
scores (bootstrap dispersion for measurements, Mamdani inference for
linguistic labels), combined by a priority-weighted mean into a trust
rating, and recorded in a replicated, windowed ledger that elects cluster
coordinators and gates task assignment.
"""

from .errors import (
    ConfigError,
    ContractError,
    EmptyInferenceError,
    FuzzyInputError,
    InsufficientDataError,
    NoEvidenceError,
    ObservationError,
    RoutingError,
    RuleBaseError,
    TaxonomyError,
    TrustFrameError,
)
from .fuzzy import (
    FuzzyRule,
    LinguisticVariable,
    RuleBase,
    Trapezoidal,
    Triangular,
    default_rule_base,
    defuzzify,
    fuzzify,
    infer,
    quantify_epistemic,
    validate_rule_base,
)
from .kernel import (
    CertaintyVector,
    KernelConfig,
    TrustRating,
    WeightSet,
    black_box_1,
    black_box_2,
    default_weights,
    evaluate_node,
    weighted_trust,
)
from .ledger import (
    BOOTSTRAP,
    LedgerEntry,
    LedgerReplica,
    TrustRecord,
    coordinator_of,
    divergence,
    rolling_average,
    sync_replicas,
)
from .montecarlo import (
    DispersionEstimate,
    MonteCarloConfig,
    dispersion_to_certainty,
    monte_carlo_estimate,
    quantify_aleatoric,
)
from .scenario import ScenarioConfig, dump_scenario, load_scenario, validate_config
from .simulation import SimulationReport, assign_task, bootstrap_coordinator, communication_round, inject_fault, run
from .topology import Cluster, ClusterDag
from .uncertainty import (
    Category,
    FacetKind,
    Observation,
    QualLabel,
    QuantSamples,
    Taxonomy,
    UncertaintyFacet,
    UncertaintySet,
    UncertaintySource,
    canonical_taxonomy,
    partition,
    validate_scenario_taxonomy,
)

__version__ = "0.1.0"
