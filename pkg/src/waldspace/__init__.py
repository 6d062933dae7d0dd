"""Wald space: phylogenetic forests embedded as correlation-like SPD matrices."""

from .embedding import (
    check_wald_matrix,
    contract_toward_infinity,
    d2_phi,
    d_phi,
    phi,
    phi_bar,
    recognize,
    whitney_factor,
)
from .errors import (
    WaldError,
    IncompatibleSplits,
    SeparationViolated,
    OverlappingBlocks,
    NotInWaldSpace,
    DomainError,
    NotPositiveDefinite,
    EigenFailure,
    UnknownSplit,
    NotAWaldMatrix,
    SingularMetric,
    DegeneratePlane,
    TopologyMismatch,
    PreconditionViolated,
    DegenerateTriangle,
    NewickSyntaxError,
    DuplicateLabel,
    MissingLength,
    NonPositiveLength,
    DegreeTwoVertex,
    ToleranceAmbiguity,
    NoConvergence,
    EnergyIncrease,
)
from .forest import (
    OrderWitness,
    Split,
    Wald,
    WaldTopology,
    edges_on_path,
    enumerate_topologies,
    partial_order_compare,
    random_wald,
    resolved_topologies,
    restrict_split,
    split_compatible,
    sub_wald_from_boundary,
    validate_topology,
)
from .geodesic import (
    DiscretePath,
    GeodesicParams,
    bhv_comparison_path,
    geodesic_path,
    path_energy,
    project_to_wald,
    wald_distance,
)
from .geometry import (
    GroveChart,
    MetricTensor,
    christoffel,
    gauss_sectional_curvature,
    metric_tensor,
    sectional_curvature,
    tangent_project,
)
from .newick import (
    GraphForest,
    graph_to_splits,
    lengths_to_weights,
    parse_newick,
    serialize_newick,
    splits_to_graph,
    weights_to_lengths,
)
from .stats import (
    FrechetSearch,
    Sample,
    SymmetricFamily,
    frechet_function,
    frechet_mean,
    triangle_angle_sum,
)

__version__ = "0.1.0"

__all__ = [
    "check_wald_matrix",
    "contract_toward_infinity",
    "d2_phi",
    "d_phi",
    "phi",
    "phi_bar",
    "recognize",
    "whitney_factor",
    "WaldError",
    "IncompatibleSplits",
    "SeparationViolated",
    "OverlappingBlocks",
    "NotInWaldSpace",
    "DomainError",
    "NotPositiveDefinite",
    "EigenFailure",
    "UnknownSplit",
    "NotAWaldMatrix",
    "SingularMetric",
    "DegeneratePlane",
    "TopologyMismatch",
    "PreconditionViolated",
    "DegenerateTriangle",
    "NewickSyntaxError",
    "DuplicateLabel",
    "MissingLength",
    "NonPositiveLength",
    "DegreeTwoVertex",
    "ToleranceAmbiguity",
    "NoConvergence",
    "EnergyIncrease",
    "OrderWitness",
    "Split",
    "Wald",
    "WaldTopology",
    "edges_on_path",
    "enumerate_topologies",
    "partial_order_compare",
    "random_wald",
    "resolved_topologies",
    "restrict_split",
    "split_compatible",
    "sub_wald_from_boundary",
    "validate_topology",
    "DiscretePath",
    "GeodesicParams",
    "bhv_comparison_path",
    "geodesic_path",
    "path_energy",
    "project_to_wald",
    "wald_distance",
    "GroveChart",
    "MetricTensor",
    "christoffel",
    "gauss_sectional_curvature",
    "metric_tensor",
    "sectional_curvature",
    "tangent_project",
    "GraphForest",
    "graph_to_splits",
    "lengths_to_weights",
    "parse_newick",
    "serialize_newick",
    "splits_to_graph",
    "weights_to_lengths",
    "FrechetSearch",
    "Sample",
    "SymmetricFamily",
    "frechet_function",
    "frechet_mean",
    "triangle_angle_sum",
]
