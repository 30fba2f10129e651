"""Triplet matching and mean average precision.

A prediction is a true positive when both the human and the object box
overlap a ground-truth triplet of the same (action, object) class with
IoU strictly above the threshold, under greedy matching in descending
score order (each ground truth consumed at most once; ties among
candidates go to the larger min-IoU, then the earlier ground truth).
Classes are (action, object-category) pairs; AP is the all-point area
under the precision envelope and the mean runs over classes with at
least one ground truth.
"""

import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError
from .geometry import Box, iou
from .scene import _json_load, _require

_MODULE = "evaluation"


@dataclass(frozen=True)
class GroundTruthTriplet:
    image_id: str
    human_box: Box
    object_box: Box
    object_category: int
    action: int


@dataclass(frozen=True)
class PredictionRecord:
    image_id: str
    human_box: Box
    object_box: Box
    object_category: int
    action: int
    score: float


@dataclass(frozen=True)
class APReport:
    per_class: dict  # (action, object_category) -> AP
    mean_ap: float
    true_positives: int
    false_positives: int
    num_ground_truth: int


def match(prediction, ground_truths, iou_threshold=0.5, used=None):
    """Index of the ground truth this prediction hits, or None.

    Both IoUs must strictly exceed the threshold and the categories must
    match; among candidates the largest min(IoU_h, IoU_o) wins.
    """
    best = None
    best_overlap = -1.0
    for idx, gt in enumerate(ground_truths):
        if used is not None and used[idx]:
            continue
        if gt.object_category != prediction.object_category or gt.action != prediction.action:
            continue
        overlap = min(
            iou(prediction.human_box, gt.human_box),
            iou(prediction.object_box, gt.object_box),
        )
        if overlap > iou_threshold and overlap > best_overlap:
            best = idx
            best_overlap = overlap
    return best


def _ranked_flags(predictions, ground_truths, iou_threshold):
    """Greedy TP/FP flags in descending score order (stable on ties)."""
    order = sorted(range(len(predictions)), key=lambda k: -predictions[k].score)
    by_image = defaultdict(list)
    for idx, gt in enumerate(ground_truths):
        by_image[gt.image_id].append((idx, gt))
    used = [False] * len(ground_truths)
    flags = []
    for k in order:
        pred = predictions[k]
        candidates = by_image.get(pred.image_id, [])
        local = match(pred, [g for _, g in candidates], iou_threshold,
                      used=[used[i] for i, _ in candidates])
        if local is None:
            flags.append(False)
        else:
            used[candidates[local][0]] = True
            flags.append(True)
    return flags


def average_precision(predictions, ground_truths, iou_threshold=0.5) -> float:
    """All-point interpolated AP (area under the precision envelope)."""
    if not ground_truths:
        raise ValidationError("average precision needs at least one ground truth", module=_MODULE)
    flags = _ranked_flags(predictions, ground_truths, iou_threshold)
    num_gt = len(ground_truths)
    tp = 0
    points = []  # (recall, precision) at every rank
    for k, flag in enumerate(flags):
        tp += 1 if flag else 0
        points.append((tp / num_gt, tp / (k + 1)))
    ap = 0.0
    prev_recall = 0.0
    for k, (recall, _) in enumerate(points):
        if recall > prev_recall:
            envelope = max(p for r, p in points[k:])
            ap += (recall - prev_recall) * envelope
            prev_recall = recall
    return ap


def evaluate_records(predictions, ground_truths, iou_threshold=0.5) -> APReport:
    classes = defaultdict(list)
    for gt in ground_truths:
        classes[(gt.action, gt.object_category)].append(gt)
    preds_by_class = defaultdict(list)
    for pred in predictions:
        preds_by_class[(pred.action, pred.object_category)].append(pred)

    per_class = {}
    tp_total = 0
    fp_total = 0
    for key in sorted(classes):
        preds = preds_by_class.get(key, [])
        per_class[key] = average_precision(preds, classes[key], iou_threshold)
        flags = _ranked_flags(preds, classes[key], iou_threshold)
        tp_total += sum(flags)
        fp_total += len(flags) - sum(flags)
    mean_ap = sum(per_class.values()) / len(per_class) if per_class else 0.0
    return APReport(
        per_class=per_class,
        mean_ap=mean_ap,
        true_positives=tp_total,
        false_positives=fp_total,
        num_ground_truth=len(ground_truths),
    )


def _box(values, where):
    if len(values) != 4:
        raise ValidationError(f"{where}: box needs 4 coordinates", module=_MODULE)
    return Box(*[float(v) for v in values])


def load_ground_truth(path):
    """Ground-truth file: images with triplet lists (prediction schema plus
    an action id). Returns (records, set of image ids)."""
    raw = _json_load(path)
    records = []
    ids = set()
    for img in _require(raw, "images", path):
        image_id = str(_require(img, "image_id", path))
        if image_id in ids:
            raise ValidationError(f"{path}: duplicate image id {image_id!r}", module=_MODULE)
        ids.add(image_id)
        for k, gt in enumerate(img.get("ground_truth", [])):
            where = f"{path}: {image_id}[{k}]"
            records.append(
                GroundTruthTriplet(
                    image_id=image_id,
                    human_box=_box(_require(gt, "human_box", where), where),
                    object_box=_box(_require(gt, "object_box", where), where),
                    object_category=int(_require(gt, "object_category", where)),
                    action=int(_require(gt, "action", where)),
                )
            )
    return records, ids


def save_ground_truth(path, records) -> None:
    by_image = defaultdict(list)
    order = []
    for gt in records:
        if gt.image_id not in by_image:
            order.append(gt.image_id)
        by_image[gt.image_id].append(
            {
                "human_box": gt.human_box.as_list(),
                "object_box": gt.object_box.as_list(),
                "object_category": gt.object_category,
                "action": gt.action,
            }
        )
    payload = {"images": [{"image_id": i, "ground_truth": by_image[i]} for i in order]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_prediction_records(path):
    """Flatten a prediction file into per-action records plus image ids."""
    raw = _json_load(path)
    records = []
    ids = set()
    for img in _require(raw, "images", path):
        image_id = str(_require(img, "image_id", path))
        ids.add(image_id)
        for k, pred in enumerate(img.get("predictions", [])):
            where = f"{path}: {image_id}[{k}]"
            human_box = _box(_require(pred, "human_box", where), where)
            object_box = _box(_require(pred, "object_box", where), where)
            category = int(_require(pred, "object_category", where))
            for action, score in enumerate(_require(pred, "action_scores", where)):
                records.append(
                    PredictionRecord(
                        image_id=image_id,
                        human_box=human_box,
                        object_box=object_box,
                        object_category=category,
                        action=action,
                        score=float(score),
                    )
                )
    return records, ids


def evaluate(prediction_path, ground_truth_path, iou_threshold=0.5) -> APReport:
    predictions, pred_ids = load_prediction_records(prediction_path)
    ground_truths, gt_ids = load_ground_truth(ground_truth_path)
    stray = pred_ids - gt_ids
    if stray:
        raise ValidationError(
            f"prediction image ids absent from ground truth: {sorted(stray)[:5]}",
            module=_MODULE,
        )
    return evaluate_records(predictions, ground_truths, iou_threshold)
