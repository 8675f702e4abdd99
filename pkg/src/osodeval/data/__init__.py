from .geometry import boxes_to_array, iou, iou_matrix
from .io import (
    load_detections,
    load_ground_truth,
    load_split,
    parse_detections,
    parse_ground_truth,
    parse_split,
    serialize_detections,
    serialize_ground_truth,
    serialize_raw_predictions,
    serialize_split,
)
from .ops import Diagnostic, apply_split, validate
from .types import (
    BoundingBox,
    ClassTaxonomy,
    DatasetView,
    Detection,
    GroundTruthInstance,
    HeadKind,
    ImageInfo,
    RawPrediction,
    SplitProtocol,
    SplitSpec,
    ValueKind,
)
