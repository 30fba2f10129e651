"""Engine configuration: dims, decoder depths, fusion weights, categories."""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .fusion import DEFAULT_FOCAL_ALPHA, DEFAULT_GAMMA, FusionConfig
from .scene import CategoryTable, load_categories

_MODULE = "config"

DEFAULT_PREFIX = ("a", "photo", "of", "a")


@dataclass(frozen=True)
class EngineConfig:
    """Everything the forward pass needs besides weights and scenes.

    Widths: c_unary is the detector feature width, d_model the token width
    (also the context-grid width), c_prompt the prompt/decoder width of the
    contextual stream, e_text the text-embedding width.
    """

    categories: CategoryTable
    c_unary: int
    d_model: int
    c_prompt: int
    e_text: int
    heads: int = 2
    binary_blocks: int = 2
    ternary_blocks: int = 2
    contextual_blocks: int = 2
    act_length: int = 4
    prompt_prefix: tuple = DEFAULT_PREFIX
    fusion: FusionConfig = field(default_factory=FusionConfig)
    gamma: float = DEFAULT_GAMMA
    focal_alpha: float = DEFAULT_FOCAL_ALPHA

    def __post_init__(self):
        for name in ("c_unary", "d_model", "c_prompt", "e_text", "heads", "act_length"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive", module=_MODULE)
        for name in ("binary_blocks", "ternary_blocks", "contextual_blocks"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1", module=_MODULE)
        if self.d_model % self.heads:
            raise ConfigError(
                f"d_model {self.d_model} not divisible by {self.heads} heads", module=_MODULE
            )
        if self.c_prompt % self.heads:
            raise ConfigError(
                f"c_prompt {self.c_prompt} not divisible by {self.heads} heads", module=_MODULE
            )

    @property
    def num_actions(self):
        return self.categories.num_actions

    @property
    def num_objects(self):
        return self.categories.num_objects


def load_engine_config(path) -> EngineConfig:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    dims = raw["dims"]
    fusion_raw = raw.get("fusion", {})
    focal_raw = raw.get("focal", {})
    return EngineConfig(
        categories=load_categories(path.parent / raw["categories"]),
        c_unary=int(dims["C"]),
        d_model=int(dims["D"]),
        c_prompt=int(dims["Cp"]),
        e_text=int(dims["E"]),
        heads=int(raw.get("heads", 2)),
        binary_blocks=int(raw.get("binary_blocks", 2)),
        ternary_blocks=int(raw.get("ternary_blocks", 2)),
        contextual_blocks=int(raw.get("contextual_blocks", 2)),
        act_length=int(raw.get("act_length", 4)),
        prompt_prefix=tuple(raw.get("prompt_prefix", DEFAULT_PREFIX)),
        fusion=FusionConfig(
            alpha=float(fusion_raw.get("alpha", FusionConfig().alpha)),
            beta=float(fusion_raw.get("beta", FusionConfig().beta)),
            lam=float(fusion_raw.get("lambda", FusionConfig().lam)),
        ),
        gamma=float(focal_raw.get("gamma", DEFAULT_GAMMA)),
        focal_alpha=float(focal_raw.get("alpha", DEFAULT_FOCAL_ALPHA)),
    )


def save_engine_config(path, config: EngineConfig, categories_file: str) -> None:
    payload = {
        "dims": {
            "C": config.c_unary,
            "D": config.d_model,
            "Cp": config.c_prompt,
            "E": config.e_text,
        },
        "heads": config.heads,
        "binary_blocks": config.binary_blocks,
        "ternary_blocks": config.ternary_blocks,
        "contextual_blocks": config.contextual_blocks,
        "act_length": config.act_length,
        "prompt_prefix": list(config.prompt_prefix),
        "categories": categories_file,
        "fusion": {
            "alpha": config.fusion.alpha,
            "beta": config.fusion.beta,
            "lambda": config.fusion.lam,
        },
        "focal": {"gamma": config.gamma, "alpha": config.focal_alpha},
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
