from .ap import PRCurve, average_precision
from .config import DEFAULT_IOU_GRID, EvalConfig
from .engine import (
    MetricsReport,
    OpenSetEvaluator,
    OperatingPointStats,
    a_ose,
    ap_known,
    ap_unknown,
    evaluate,
    operating_point,
    sweep_operating_points,
    wilderness_impact,
)
from .matching import UNKNOWN_POOL, MatchKind, MatchOutcome, match_image
