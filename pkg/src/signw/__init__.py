"""Path signatures, signature semi-metrics and Nadaraya-Watson estimators on path space."""

__version__ = "0.1.0"

from .metrics import SemiMetricSpec, RobustParams, distance, pairwise_distances
from .regression import CVConfig, NWModel, cross_validate, fit, nw_classify, nw_predict
from .signature import Path, path_signature, time_augment
from .tensor_algebra import TruncatedTensor

__all__ = [
    "CVConfig",
    "NWModel",
    "Path",
    "RobustParams",
    "SemiMetricSpec",
    "TruncatedTensor",
    "cross_validate",
    "distance",
    "fit",
    "nw_classify",
    "nw_predict",
    "pairwise_distances",
    "path_signature",
    "time_augment",
]
