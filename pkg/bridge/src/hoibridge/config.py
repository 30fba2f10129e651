from dataclasses import dataclass, field

from .errors import BridgeError


@dataclass(frozen=True)
class BridgeConfig:
    """Export configuration.

    Target dims must match the engine config the scenes will run under;
    the down-projection seed is recorded in the manifest so exports are
    reproducible.
    """

    detector: str = "offline"
    vlm: str = "offline"
    c_unary: int = 12
    d_model: int = 16
    e_text: int = 8
    grid_h: int = 4
    grid_w: int = 4
    seed: int = 0
    max_detections: int = 6
    objects: tuple = field(default_factory=tuple)  # (name, article) pairs
    human: int = 0

    def __post_init__(self):
        for name in ("c_unary", "d_model", "e_text", "grid_h", "grid_w"):
            if getattr(self, name) <= 0:
                raise BridgeError(f"{name} must be positive")
        if not self.objects:
            raise BridgeError("config needs the engine's category table")
        if not 0 <= self.human < len(self.objects):
            raise BridgeError("human category id out of range")

    @classmethod
    def from_engine(cls, engine_dims: dict, **overrides) -> "BridgeConfig":
        return cls(
            c_unary=engine_dims["c_unary"],
            d_model=engine_dims["d_model"],
            e_text=engine_dims["e_text"],
            objects=tuple(engine_dims["objects"]),
            human=engine_dims["human"],
            **overrides,
        )
