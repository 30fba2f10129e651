"""Bounding-box arithmetic and the spatial encodings for pair/triplet tokens.

A box pair is described by 18 geometric attributes concatenated with a
log-transformed copy, 36 values total. The feature order below is
normative for this engine and is tied to the layout version stored in
every tensor container, so encodings and trained weights cannot drift
apart silently.

Base features, in order:

====  =========================================================
0-5   box i: cx/W, cy/H, w/W, h/H, area/(W*H), aspect w/(h+eps)
6-11  box j: same six attributes
12    IoU(i, j)
13    area ratio  a_i / (a_j + eps)
14    dx = (cx_j - cx_i) / (w_i + eps)
15    dy = (cy_j - cy_i) / (h_i + eps)
16    center distance / image diagonal
17    aspect ratio of aspects  aspect_i / (aspect_j + eps)
====  =========================================================

The log half maps nonnegative entries through ln(x + eps) (negative
values, possible for boxes off the canvas, are clamped to zero first) and
the signed offsets dx, dy through sign(x) * ln(1 + |x|), which keeps the
transform finite and sign-preserving.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, ValidationError
from .kernels import mlp

EPS = 1e-3
PAIR_FEATURES = 36
TRIPLET_FEATURES = 3 * PAIR_FEATURES

_MODULE = "geometry"


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in absolute pixel coordinates."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(c) for c in coords):
            raise ValidationError(f"box coordinates must be finite: {coords}", module=_MODULE)
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValidationError(f"box corners out of order: {coords}", module=_MODULE)

    @property
    def width(self):
        return self.x2 - self.x1

    @property
    def height(self):
        return self.y2 - self.y1

    @property
    def area(self):
        return self.width * self.height

    @property
    def center(self):
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    def as_list(self):
        return [self.x1, self.y1, self.x2, self.y2]


@dataclass(frozen=True)
class ImageSize:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ConfigError(
                f"image size must be positive, got {self.width}x{self.height}",
                module=_MODULE,
            )


def iou(a: Box, b: Box) -> float:
    """Intersection over union; 0 when the union has zero area."""
    ix = max(0.0, min(a.x2, b.x2) - max(a.x1, b.x1))
    iy = max(0.0, min(a.y2, b.y2) - max(a.y1, b.y1))
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def _box_features(b: Box, img: ImageSize, eps: float):
    cx, cy = b.center
    return [
        cx / img.width,
        cy / img.height,
        b.width / img.width,
        b.height / img.height,
        b.area / (img.width * img.height),
        b.width / (b.height + eps),
    ]


_SIGNED = (14, 15)  # dx, dy get the signed-log transform


def pairwise_spatial(b_i: Box, b_j: Box, img: ImageSize, eps: float = EPS) -> np.ndarray:
    """36-dim spatial encoding of an ordered box pair (see module docs)."""
    cxi, cyi = b_i.center
    cxj, cyj = b_j.center
    aspect_i = b_i.width / (b_i.height + eps)
    aspect_j = b_j.width / (b_j.height + eps)
    diag = math.hypot(img.width, img.height)
    base = _box_features(b_i, img, eps) + _box_features(b_j, img, eps)
    base += [
        iou(b_i, b_j),
        b_i.area / (b_j.area + eps),
        (cxj - cxi) / (b_i.width + eps),
        (cyj - cyi) / (b_i.height + eps),
        math.hypot(cxj - cxi, cyj - cyi) / diag,
        aspect_i / (aspect_j + eps),
    ]
    logs = []
    for k, v in enumerate(base):
        if k in _SIGNED:
            logs.append(math.copysign(math.log1p(abs(v)), v))
        else:
            logs.append(math.log(max(v, 0.0) + eps))
    return np.asarray(base + logs, dtype=np.float32)


def _check_indices(indices, n, what):
    for idx in indices:
        if not 0 <= idx < n:
            raise ValidationError(f"{what} index {idx} out of range [0, {n})", module=_MODULE)


def binary_positions(pairs, boxes, img: ImageSize, layers) -> np.ndarray:
    """Positional rows for (i, j) pairs: spatial encoding through the MLP."""
    layers = list(layers)
    width = layers[-1][0].shape[1]
    if not pairs:
        return np.zeros((0, width), dtype=np.float32)
    feats = []
    for i, j in pairs:
        _check_indices((i, j), len(boxes), "pair")
        feats.append(pairwise_spatial(boxes[i], boxes[j], img))
    return mlp(np.stack(feats), layers)


def ternary_positions(triplets, boxes, img: ImageSize, layers) -> np.ndarray:
    """Positional rows for (human, object, tool) triplets.

    Concatenates the three pairwise encodings human-object, human-tool,
    object-tool (108 values) before the MLP.
    """
    layers = list(layers)
    width = layers[-1][0].shape[1]
    if not triplets:
        return np.zeros((0, width), dtype=np.float32)
    feats = []
    for i, j, k in triplets:
        _check_indices((i, j, k), len(boxes), "triplet")
        feats.append(
            np.concatenate(
                [
                    pairwise_spatial(boxes[i], boxes[j], img),
                    pairwise_spatial(boxes[i], boxes[k], img),
                    pairwise_spatial(boxes[j], boxes[k], img),
                ]
            )
        )
    stacked = np.stack(feats)
    if stacked.shape[1] != TRIPLET_FEATURES:
        raise ShapeError(f"triplet features must be {TRIPLET_FEATURES}-wide", module=_MODULE)
    return mlp(stacked, layers)
