"""Unary enrichment and the canonical pair/triplet token sets.

Enumeration order is the ordering contract for the whole engine: pairs
are all ordered (i, j) with detection i human and i != j, in lexicographic
(i, j) order; triplets are all (i, j, k) with i human, pairwise-distinct
indices and (category_j, category_k) licensed by the knowledge bank, in
lexicographic (i, j, k) order. Every downstream row index refers to these
orders.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EngineError, ValidationError
from .geometry import binary_positions, ternary_positions
from .kernels import mlp

_MODULE = "tokens"


@dataclass(frozen=True)
class EnrichedUnary:
    index: int
    vector: np.ndarray  # (D,) float32


@dataclass(frozen=True)
class PairSet:
    pairs: tuple  # ((i, j), ...) lexicographic
    tokens: np.ndarray  # (m, D)
    positions: np.ndarray  # (m, D)


@dataclass(frozen=True)
class TripletSet:
    triplets: tuple  # ((i, j, k), ...) lexicographic
    tokens: np.ndarray  # (r, D)
    positions: np.ndarray  # (r, D)
    pair_assignment: tuple  # triplet row -> pair row with the same (i, j)


def human_indices(detections, table):
    return [i for i, det in enumerate(detections) if det.category == table.human]


def enrich_unary(detections, weights, table) -> list:
    """u' = MLP(u || e_category) per detection, order preserved."""
    text_table = weights.get("text.table")
    layers = weights.mlp("unary.mlp")
    if not detections:
        return []
    rows = []
    for k, det in enumerate(detections):
        if det.category >= text_table.shape[0]:
            raise ValidationError(
                f"detections[{k}]: category {det.category} has no text embedding "
                f"(table has {text_table.shape[0]} rows)",
                module=_MODULE,
            )
        rows.append(np.concatenate([det.feature, text_table[det.category]]))
    enriched = mlp(np.stack(rows), layers)
    return [EnrichedUnary(index=i, vector=enriched[i]) for i in range(len(detections))]


def enumerate_pairs(detections, table):
    humans = set(human_indices(detections, table))
    n = len(detections)
    return [(i, j) for i in range(n) for j in range(n) if i in humans and i != j]


def build_pairs(detections, enriched, weights, table, image_size) -> PairSet:
    """Binary tokens g = MLP(u'_i || u'_j) plus their positional rows."""
    pairs = enumerate_pairs(detections, table)
    d = weights.get("pair.mlp.w2").shape[1]
    if not pairs:
        empty = np.zeros((0, d), dtype=np.float32)
        return PairSet(pairs=(), tokens=empty, positions=empty.copy())
    stacked = np.stack(
        [np.concatenate([enriched[i].vector, enriched[j].vector]) for i, j in pairs]
    )
    tokens = mlp(stacked, weights.mlp("pair.mlp"))
    boxes = [det.box for det in detections]
    positions = binary_positions(pairs, boxes, image_size, weights.mlp("pairpos.mlp"))
    return PairSet(pairs=tuple(pairs), tokens=tokens, positions=positions)


def enumerate_triplets(detections, table, bank):
    humans = set(human_indices(detections, table))
    n = len(detections)
    out = []
    for i in range(n):
        if i not in humans:
            continue
        for j in range(n):
            if j == i:
                continue
            for k in range(n):
                if k == i or k == j:
                    continue
                if (detections[j].category, detections[k].category) in bank.pairs:
                    out.append((i, j, k))
    return out


def build_triplets(detections, enriched, bank, pair_set: PairSet, weights, table, image_size) -> TripletSet:
    """Ternary tokens t = MLP(u'_i || u'_j || u'_k) with pair assignment."""
    triplets = enumerate_triplets(detections, table, bank)
    d = weights.get("triplet.mlp.w2").shape[1]
    if not triplets:
        empty = np.zeros((0, d), dtype=np.float32)
        return TripletSet(triplets=(), tokens=empty, positions=empty.copy(), pair_assignment=())
    pair_row = {pair: l for l, pair in enumerate(pair_set.pairs)}
    assignment = []
    for i, j, k in triplets:
        try:
            assignment.append(pair_row[(i, j)])
        except KeyError:
            raise EngineError(
                f"triplet ({i}, {j}, {k}) has no matching pair row for ({i}, {j})",
                module=_MODULE,
            )
    stacked = np.stack(
        [
            np.concatenate([enriched[i].vector, enriched[j].vector, enriched[k].vector])
            for i, j, k in triplets
        ]
    )
    tokens = mlp(stacked, weights.mlp("triplet.mlp"))
    boxes = [det.box for det in detections]
    positions = ternary_positions(triplets, boxes, image_size, weights.mlp("tripos.mlp"))
    return TripletSet(
        triplets=tuple(triplets),
        tokens=tokens,
        positions=positions,
        pair_assignment=tuple(assignment),
    )
