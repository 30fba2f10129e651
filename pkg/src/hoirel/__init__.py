"""Deterministic second-stage scorer for human-object interactions.

Consumes pre-extracted detections, context grids and a tool knowledge
bank, builds unary/binary/ternary relation tokens, runs three small
attention decoder stacks plus a prompt-fusion stream, and emits
calibrated per-action scores with mAP evaluation tooling.
"""

__version__ = "0.1.0"

from .config import EngineConfig, load_engine_config
from .errors import ConfigError, EngineError, ParseError, ShapeError, ValidationError
from .fusion import FusionConfig, ScoredInteraction
from .geometry import Box, ImageSize
from .scene import CategoryTable, Detection, KnowledgeBank, Scene, SceneContext
from .weights import WeightBundle, load_weights

__all__ = [
    "__version__",
    "Box",
    "CategoryTable",
    "ConfigError",
    "Detection",
    "EngineConfig",
    "EngineError",
    "FusionConfig",
    "ImageSize",
    "KnowledgeBank",
    "ParseError",
    "Scene",
    "SceneContext",
    "ScoredInteraction",
    "ShapeError",
    "ValidationError",
    "WeightBundle",
    "load_engine_config",
    "load_weights",
]
