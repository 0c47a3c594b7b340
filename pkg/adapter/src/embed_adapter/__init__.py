from .extract import (
    FEATURE_DIM,
    FEATURE_LAYER,
    AdapterConfig,
    AdapterError,
    build_model,
    extract,
)
from .saliency import contrast_entropy

__all__ = [
    "FEATURE_DIM",
    "FEATURE_LAYER",
    "AdapterConfig",
    "AdapterError",
    "build_model",
    "contrast_entropy",
    "extract",
]
