from .frames import (
    VectorFieldFrame,
    DerivedField,
    SpanningSet,
    NSWEvaluation,
    builtin_frame,
    load_frame_file,
    resolve_frame,
    evaluate_frame,
    lie_bracket,
    build_spanning_set,
    nsw_terms,
    pointwise_Q,
    pointwise_Q_field,
    local_Q
)
from .metric import (
    ReachabilityGraph,
    DistanceField,
    build_reachability_graph,
    control_distance_field,
    metric_ball,
    locate_node,
    richardson_extrapolate,
    scaling_exponent
)

__all__ = [
    "VectorFieldFrame",
    "DerivedField",
    "SpanningSet",
    "NSWEvaluation",
    "builtin_frame",
    "load_frame_file",
    "resolve_frame",
    "evaluate_frame",
    "lie_bracket",
    "build_spanning_set",
    "nsw_terms",
    "pointwise_Q",
    "pointwise_Q_field",
    "local_Q",
    "ReachabilityGraph",
    "DistanceField",
    "build_reachability_graph",
    "control_distance_field",
    "metric_ball",
    "locate_node",
    "richardson_extrapolate",
    "scaling_exponent"
]
