"""The shared decoder block and the binary/ternary stacks.

One attention layer: positional streams are added to the content streams
before the query/key projections, values are projected from the content
keys alone, heads split the width evenly with 1/sqrt(d_head) scaling, and
the residual connects the query-side content stream before the layer
norm. Connecting the residual to the query side (rather than the value
matrix) is the one reading that keeps cross-attention shape-consistent:
values have one row per memory cell while outputs have one row per query.

A block is self-attention over (tokens, positions), cross-attention with
queries (self output, positions) against keys (memory, memory positions)
and values = memory, then norm(x + FFN(x)).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .kernels import layer_norm, linear, matmul, mlp, softmax_rows

_MODULE = "decoder"


@dataclass(frozen=True)
class DecoderConfig:
    width: int
    heads: int
    blocks: int
    role: str = "binary"

    def __post_init__(self):
        if self.blocks < 1:
            raise ConfigError(f"{self.role} decoder needs at least 1 block", module=_MODULE)
        if self.heads < 1:
            raise ConfigError("head count must be positive", module=_MODULE)
        if self.width % self.heads:
            raise ConfigError(
                f"width {self.width} not divisible by {self.heads} heads", module=_MODULE
            )


def _with_positions(content, positions, name):
    content = np.asarray(content, dtype=np.float32)
    if positions is None:
        return content
    positions = np.asarray(positions, dtype=np.float32)
    if positions.shape != content.shape:
        raise ShapeError(
            f"{name}: positional shape {positions.shape} != content shape {content.shape}",
            module=_MODULE,
        )
    return content + positions


def attention(content_q, pos_q, content_k, pos_k, value, params, heads, trace=None, label=""):
    """One attention layer; ``pos_q``/``pos_k`` may be None for no stream."""
    content_q = np.asarray(content_q, dtype=np.float32)
    value = np.asarray(value, dtype=np.float32)
    q_in = _with_positions(content_q, pos_q, "query")
    k_in = _with_positions(content_k, pos_k, "key")
    if k_in.shape[0] != value.shape[0]:
        raise ShapeError(
            f"key rows {k_in.shape[0]} != value rows {value.shape[0]}", module=_MODULE
        )
    q = linear(q_in, params.wq, params.bq)
    k = linear(k_in, params.wk, params.bk)
    v = linear(value, params.wv, params.bv)
    width = q.shape[1]
    if width % heads:
        raise ShapeError(f"width {width} not divisible by {heads} heads", module=_MODULE)
    dh = width // heads
    scale = np.float32(1.0 / math.sqrt(dh))
    pieces = []
    for h in range(heads):
        sl = slice(h * dh, (h + 1) * dh)
        scores = matmul(q[:, sl], k[:, sl].T) * scale
        attn = softmax_rows(scores)
        if trace is not None:
            trace.append((f"{label}.head{h}", attn))
        pieces.append(matmul(attn, v[:, sl]))
    merged = np.concatenate(pieces, axis=1) if pieces else q
    out = linear(merged, params.wo, params.bo)
    return layer_norm(out + content_q, params.norm_gain, params.norm_bias)


def _run_stack(prefix, tokens, positions, memories, memory_positions, bundle, config, trace):
    x = np.asarray(tokens, dtype=np.float32)
    if x.ndim != 2 or x.shape[1] != config.width:
        raise ShapeError(
            f"{prefix} queries must be (*, {config.width}), got {x.shape}", module=_MODULE
        )
    for i in range(config.blocks):
        block = f"{prefix}.block{i}"
        mem = memories[i]
        mem_pos = memory_positions[i]
        x = attention(
            x, positions, x, positions, x,
            bundle.attention(f"{block}.self"), config.heads, trace, f"{block}.self",
        )
        x = attention(
            x, positions, mem, mem_pos, mem,
            bundle.attention(f"{block}.cross"), config.heads, trace, f"{block}.cross",
        )
        f = mlp(x, bundle.mlp(f"{block}.ffn"))
        x = layer_norm(x + f, *bundle.norm(f"{block}.ffn.norm"))
    return x


def run_binary_decoder(tokens, positions, spatial, spatial_pos, bundle, config, trace=None):
    """N blocks over pair tokens, cross-attending into the image grid."""
    mems = [spatial] * config.blocks
    mem_pos = [spatial_pos] * config.blocks
    return _run_stack("binary", tokens, positions, mems, mem_pos, bundle, config, trace)


def run_ternary_decoder(tokens, positions, spatial, spatial_pos, bundle, config, trace=None):
    mems = [spatial] * config.blocks
    mem_pos = [spatial_pos] * config.blocks
    return _run_stack("ternary", tokens, positions, mems, mem_pos, bundle, config, trace)


def classify(decoded, head) -> np.ndarray:
    """Plain affine map to per-action logits; no activation."""
    weight, bias = head
    decoded = np.asarray(decoded, dtype=np.float32)
    if decoded.shape[0] == 0:
        return np.zeros((0, weight.shape[1]), dtype=np.float32)
    return linear(decoded, weight, bias)
