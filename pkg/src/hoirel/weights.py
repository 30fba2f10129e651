"""Learned-parameter bundle: required names, loading, access helpers.

Every learned tensor lives in one container under a dotted name. The
required name set and all shapes are a pure function of the engine
config; the loader checks both, plus the container layout version, so a
stale weights file cannot be paired with a newer encoding layout.
"""

from collections import namedtuple

from .container import LAYOUT_VERSION, read_tensor_container
from .errors import ValidationError
from .geometry import PAIR_FEATURES, TRIPLET_FEATURES
from .kernels import MLP_HIDDEN_FACTOR

_MODULE = "weights"

AttentionParams = namedtuple(
    "AttentionParams", "wq bq wk bk wv bv wo bo norm_gain norm_bias"
)

# Optional names the loader tolerates and the prompt encoder consults.
PREFIX_EMBED = "prompt.prefix_embed"


def _mlp_shapes(prefix, n_in, n_out):
    hidden = MLP_HIDDEN_FACTOR * n_out
    return {
        f"{prefix}.w1": (n_in, hidden),
        f"{prefix}.b1": (hidden,),
        f"{prefix}.w2": (hidden, n_out),
        f"{prefix}.b2": (n_out,),
    }


def _attention_shapes(prefix, width):
    shapes = {}
    for proj in ("q", "k", "v", "o"):
        shapes[f"{prefix}.w{proj}"] = (width, width)
        shapes[f"{prefix}.b{proj}"] = (width,)
    shapes[f"{prefix}.norm.g"] = (width,)
    shapes[f"{prefix}.norm.b"] = (width,)
    return shapes


def _block_shapes(prefix, width):
    shapes = {}
    shapes.update(_attention_shapes(f"{prefix}.self", width))
    shapes.update(_attention_shapes(f"{prefix}.cross", width))
    shapes.update(_mlp_shapes(f"{prefix}.ffn", width, width))
    shapes[f"{prefix}.ffn.norm.g"] = (width,)
    shapes[f"{prefix}.ffn.norm.b"] = (width,)
    return shapes


def required_weights(config) -> dict:
    """Name -> shape map implied by an engine config."""
    c, d = config.c_unary, config.d_model
    cp, e = config.c_prompt, config.e_text
    actions = config.num_actions
    shapes = {}
    shapes.update(_mlp_shapes("unary.mlp", c + e, d))
    shapes.update(_mlp_shapes("pair.mlp", 2 * d, d))
    shapes.update(_mlp_shapes("triplet.mlp", 3 * d, d))
    shapes.update(_mlp_shapes("pairpos.mlp", PAIR_FEATURES, d))
    shapes.update(_mlp_shapes("tripos.mlp", TRIPLET_FEATURES, d))
    shapes.update(_mlp_shapes("ctx.mlp", 2 * c, cp))
    shapes["global.proj.w"] = (d, cp)
    shapes["global.proj.b"] = (cp,)
    shapes["prompt.act"] = (config.act_length, e)
    shapes["prompt.proj.w"] = (4 * e, cp)
    shapes["prompt.proj.b"] = (cp,)
    shapes["text.table"] = (config.num_objects, e)
    for i in range(config.binary_blocks):
        shapes.update(_block_shapes(f"binary.block{i}", d))
    for i in range(config.ternary_blocks):
        shapes.update(_block_shapes(f"ternary.block{i}", d))
    for i in range(config.contextual_blocks):
        shapes.update(_block_shapes(f"ctxdec.block{i}", cp))
    for head in ("binary", "ternary"):
        shapes[f"{head}.head.w"] = (d, actions)
        shapes[f"{head}.head.b"] = (actions,)
    shapes["semantic.head.w"] = (cp, actions)
    shapes["semantic.head.b"] = (actions,)
    return shapes


class WeightBundle:
    """Validated access to the learned tensors of one engine config."""

    def __init__(self, tensors: dict, version: int = LAYOUT_VERSION):
        self.tensors = tensors
        self.version = version

    def get(self, name):
        try:
            return self.tensors[name]
        except KeyError:
            raise ValidationError(f"weights missing tensor {name!r}", module=_MODULE)

    def has(self, name):
        return name in self.tensors

    def mlp(self, prefix):
        return [
            (self.get(f"{prefix}.w1"), self.get(f"{prefix}.b1")),
            (self.get(f"{prefix}.w2"), self.get(f"{prefix}.b2")),
        ]

    def linear(self, prefix):
        return self.get(f"{prefix}.w"), self.get(f"{prefix}.b")

    def norm(self, prefix):
        return self.get(f"{prefix}.g"), self.get(f"{prefix}.b")

    def attention(self, prefix) -> AttentionParams:
        return AttentionParams(
            *(self.get(f"{prefix}.{n}") for n in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")),
            *self.norm(f"{prefix}.norm"),
        )


def validate_bundle(tensors: dict, version: int, config) -> WeightBundle:
    if version != LAYOUT_VERSION:
        raise ValidationError(
            f"weights layout version {version} does not match engine layout {LAYOUT_VERSION}",
            module=_MODULE,
        )
    for name, shape in required_weights(config).items():
        if name not in tensors:
            raise ValidationError(f"weights missing required tensor {name!r}", module=_MODULE)
        if tuple(tensors[name].shape) != shape:
            raise ValidationError(
                f"weights tensor {name!r} has shape {tuple(tensors[name].shape)}, "
                f"config implies {shape}",
                module=_MODULE,
            )
    if PREFIX_EMBED in tensors and tuple(tensors[PREFIX_EMBED].shape) != (config.e_text,):
        raise ValidationError(
            f"{PREFIX_EMBED!r} must be a ({config.e_text},) vector", module=_MODULE
        )
    return WeightBundle(tensors, version)


def load_weights(path, config) -> WeightBundle:
    version, tensors = read_tensor_container(path)
    return validate_bundle(tensors, version, config)
