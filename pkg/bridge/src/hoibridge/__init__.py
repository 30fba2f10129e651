"""Feature extraction bridge for the hoirel engine.

Turns real images into the engine's scene/container files: detector
boxes, scores and features, a spatial context grid with positional
embeddings, and a category text-embedding table. The bridge only writes
engine inputs; validation goes through the engine's own CLI.
"""

__version__ = "0.1.0"

from .config import BridgeConfig
from .errors import BridgeError
from .export import export_batch, export_scene

__all__ = ["BridgeConfig", "BridgeError", "export_batch", "export_scene", "__version__"]
