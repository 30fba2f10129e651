"""Contextualized prompt stream: regional/global features, prompt rows,
the two-block contextual decoder, and semantic logits.

The text encoder is a deterministic stand-in: a prompt row is the
projection of mean(prefix word vectors) || mean(act vectors) ||
person embedding || object embedding, all at text width. Prefix word
vectors come from a seeded hash of the word unless the weights container
carries a ``prompt.prefix_embed`` vector, which real extraction pipelines
can inject to bypass the stand-in. Rows are therefore fully determined by
the pair's object category and the learned tensors.
"""

from dataclasses import dataclass

import numpy as np

from .decoder import _run_stack, classify
from .errors import ConfigError, ShapeError, ValidationError
from .kernels import linear, mlp
from .rng import Stream
from .weights import PREFIX_EMBED

_MODULE = "prompt"

CONTEXT_TEMPLATE = "{prefix} person [ACT] {object}"


@dataclass(frozen=True)
class PromptSpec:
    """Fixed prefix words plus the learnable act-token count."""

    prefix: tuple = ("a", "photo", "of", "a")
    act_length: int = 4

    def __post_init__(self):
        if self.act_length < 1:
            raise ConfigError("act_length must be at least 1", module=_MODULE)
        if not self.prefix:
            raise ConfigError("prompt prefix needs at least one word", module=_MODULE)


@dataclass(frozen=True)
class ContextFeatures:
    regional: np.ndarray  # (m, C') rows aligned with the pair set
    global_vec: np.ndarray  # (C',)

    def __post_init__(self):
        if self.regional.ndim != 2 or self.global_vec.ndim != 1:
            raise ShapeError("regional must be 2-d and the global context 1-d", module=_MODULE)
        if self.regional.shape[1] != self.global_vec.shape[0]:
            raise ShapeError("regional and global widths disagree", module=_MODULE)


def contextual_features(detections, pair_set, weights) -> np.ndarray:
    """Regional rows d = MLP(u_i || u_j) from the raw detector features."""
    layers = weights.mlp("ctx.mlp")
    width = layers[-1][0].shape[1]
    if not pair_set.pairs:
        return np.zeros((0, width), dtype=np.float32)
    stacked = np.stack(
        [
            np.concatenate([detections[i].feature, detections[j].feature])
            for i, j in pair_set.pairs
        ]
    )
    return mlp(stacked, layers)


def global_context(spatial_flat, weights) -> np.ndarray:
    """Mean-pool the flattened grid, then project to the prompt width."""
    grid = np.asarray(spatial_flat, dtype=np.float32)
    if grid.ndim != 2 or grid.shape[0] == 0:
        raise ShapeError("global context needs a nonempty 2-d grid", module=_MODULE)
    pooled = grid.astype(np.float64).mean(axis=0).astype(np.float32)
    w, b = weights.linear("global.proj")
    return linear(pooled[None, :], w, b)[0]


def word_embedding(word: str, width: int) -> np.ndarray:
    """Deterministic stand-in text vector for one word."""
    return Stream(0, "word-embed", word).uniform_block(width, -1.0, 1.0)


def encode_prompts(pair_set, detections, table, spec: PromptSpec, weights) -> np.ndarray:
    """Prompt rows, one per pair, determined by the pair's object category."""
    act = weights.get("prompt.act")
    if act.shape[0] != spec.act_length:
        raise ValidationError(
            f"prompt.act has {act.shape[0]} rows, spec wants {spec.act_length}", module=_MODULE
        )
    e = act.shape[1]
    w, b = weights.linear("prompt.proj")
    text_table = weights.get("text.table")
    if weights.has(PREFIX_EMBED):
        prefix_vec = weights.get(PREFIX_EMBED)
    else:
        prefix_vec = np.stack([word_embedding(word, e) for word in spec.prefix])
        prefix_vec = prefix_vec.astype(np.float64).mean(axis=0).astype(np.float32)
    act_vec = act.astype(np.float64).mean(axis=0).astype(np.float32)
    person_vec = text_table[table.human]

    if not pair_set.pairs:
        return np.zeros((0, w.shape[1]), dtype=np.float32)
    rows = {}
    out = []
    for i, j in pair_set.pairs:
        cat = detections[j].category
        if cat not in rows:
            if cat >= text_table.shape[0]:
                raise ValidationError(f"unknown category id {cat} in prompt", module=_MODULE)
            piece = np.concatenate([prefix_vec, act_vec, person_vec, text_table[cat]])
            rows[cat] = linear(piece[None, :], w, b)[0]
        out.append(rows[cat])
    return np.stack(out)


def run_contextual_decoder(m0, global_vec, regional, bundle, config, trace=None) -> np.ndarray:
    """Two blocks: cross-attend into the repeated global vector, then into
    the regional rows; all positional streams are zero."""
    m0 = np.asarray(m0, dtype=np.float32)
    regional = np.asarray(regional, dtype=np.float32)
    global_vec = np.asarray(global_vec, dtype=np.float32)
    if regional.shape[0] != m0.shape[0]:
        raise ShapeError(
            f"regional rows {regional.shape[0]} != prompt rows {m0.shape[0]}", module=_MODULE
        )
    if global_vec.ndim != 1:
        raise ShapeError("global context must be a vector", module=_MODULE)
    if config.blocks != 2:
        raise ConfigError("contextual decoder is defined for exactly 2 blocks", module=_MODULE)
    m = m0.shape[0]
    repeated = np.tile(global_vec[None, :], (m, 1))
    zeros_q = np.zeros_like(m0)
    mems = [repeated, regional]
    mem_pos = [np.zeros_like(repeated), np.zeros_like(regional)]
    return _run_stack("ctxdec", m0, zeros_q, mems, mem_pos, bundle, config, trace)


def semantic_logits(m2, head) -> np.ndarray:
    return classify(m2, head)
