"""Logit fusion across the three streams, focal loss, and final scores.

Ternary logits are summed into their owning pair (literal sum, no
averaging, in ascending triplet order), the semantic stream is added with
weight beta, and inference scores multiply the sigmoid probabilities by
the detector confidences raised to the score exponent.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, ValidationError

INFERENCE_LAMBDA = 2.8
TRAINING_LAMBDA = 1.0
DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 0.4
DEFAULT_GAMMA = 2.0
DEFAULT_FOCAL_ALPHA = 0.25

_MODULE = "fusion"


@dataclass(frozen=True)
class FusionConfig:
    """Stream weights and the inference score exponent."""

    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    lam: float = INFERENCE_LAMBDA

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError(f"score exponent must be positive, got {self.lam}", module=_MODULE)
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("stream weights must be nonnegative", module=_MODULE)

    @classmethod
    def training(cls, alpha=DEFAULT_ALPHA, beta=DEFAULT_BETA):
        return cls(alpha=alpha, beta=beta, lam=TRAINING_LAMBDA)


@dataclass(frozen=True)
class ScoredInteraction:
    """Final per-action scores for one human-object pair."""

    human_index: int
    object_index: int
    human_box: object
    object_box: object
    object_category: int
    scores: np.ndarray  # (c,) float32 in [0, 1]


def fuse_ternary(binary_logits, ternary_logits, pair_assignment, alpha) -> np.ndarray:
    """Add alpha times the sum of each pair's ternary logit rows.

    Pairs with no assigned triplet come through bitwise unchanged. The
    per-pair sums accumulate in float64 over ascending triplet index.
    """
    b = np.asarray(binary_logits, dtype=np.float32)
    t = np.asarray(ternary_logits, dtype=np.float32)
    if b.ndim != 2 or t.ndim != 2:
        raise ShapeError("logit matrices must be 2-d", module=_MODULE)
    if t.shape[0] != len(pair_assignment):
        raise ShapeError(
            f"{t.shape[0]} ternary rows but {len(pair_assignment)} assignments",
            module=_MODULE,
        )
    if t.shape[0] and t.shape[1] != b.shape[1]:
        raise ShapeError("binary and ternary logits must share the action axis", module=_MODULE)
    m = b.shape[0]
    sums = np.zeros(b.shape, dtype=np.float64)
    for o, l in enumerate(pair_assignment):
        if not 0 <= l < m:
            raise ValidationError(
                f"triplet {o} assigned to missing pair row {l} (m={m})", module=_MODULE
            )
        sums[l] += t[o].astype(np.float64)
    return (b.astype(np.float64) + alpha * sums).astype(np.float32)


def fuse_semantic(refined_logits, semantic_logits, beta) -> np.ndarray:
    """Elementwise ``refined + beta * semantic``."""
    a = np.asarray(refined_logits, dtype=np.float32)
    b = np.asarray(semantic_logits, dtype=np.float32)
    if a.shape != b.shape:
        raise ShapeError(f"logit shapes disagree: {a.shape} vs {b.shape}", module=_MODULE)
    return (a.astype(np.float64) + beta * b.astype(np.float64)).astype(np.float32)


def focal_loss(logits, labels, gamma=DEFAULT_GAMMA, focal_alpha=DEFAULT_FOCAL_ALPHA):
    """Binary focal loss on sigmoid probabilities with its analytic gradient.

    The per-entry terms are summed and divided by the number of positive
    labels, clamped to 1 so background-only batches stay finite. Returns
    (loss, gradient) where the gradient is w.r.t. the logits.
    """
    x = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels)
    if x.shape != y.shape:
        raise ShapeError(f"labels shape {y.shape} != logits shape {x.shape}", module=_MODULE)
    if y.size and not np.isin(y, (0, 1)).all():
        raise ValidationError("labels must be 0 or 1", module=_MODULE)
    y = y.astype(np.float64)

    p = 1.0 / (1.0 + np.exp(-x))
    log_p = -np.logaddexp(0.0, -x)
    log_1mp = -np.logaddexp(0.0, x)
    one_m_p = 1.0 - p

    pos = -focal_alpha * one_m_p**gamma * log_p
    neg = -(1.0 - focal_alpha) * p**gamma * log_1mp
    denom = max(1.0, float(y.sum()))
    loss = float((y * pos + (1.0 - y) * neg).sum() / denom)

    pos_g = focal_alpha * (gamma * p * one_m_p**gamma * log_p - one_m_p ** (gamma + 1.0))
    neg_g = (1.0 - focal_alpha) * (p ** (gamma + 1.0) - gamma * p**gamma * one_m_p * log_1mp)
    grad = ((y * pos_g + (1.0 - y) * neg_g) / denom).astype(np.float32)
    return loss, grad


def final_scores(fused_logits, pairs, detections, lam) -> list:
    """Combine detector confidences with sigmoid action probabilities.

    Row l for pair (i, j) gets scores (s_i * s_j) ** lam * sigmoid(logits_l).
    """
    logits = np.asarray(fused_logits, dtype=np.float32)
    if logits.shape[0] != len(pairs):
        raise ShapeError(
            f"{logits.shape[0]} logit rows for {len(pairs)} pairs", module=_MODULE
        )
    out = []
    for l, (i, j) in enumerate(pairs):
        conf = (detections[i].score * detections[j].score) ** lam
        probs = 1.0 / (1.0 + np.exp(-logits[l].astype(np.float64)))
        out.append(
            ScoredInteraction(
                human_index=i,
                object_index=j,
                human_box=detections[i].box,
                object_box=detections[j].box,
                object_category=detections[j].category,
                scores=(conf * probs).astype(np.float32),
            )
        )
    return out
