"""End-to-end orchestration of one scene and the prediction file format."""

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import EngineConfig
from .decoder import DecoderConfig, classify, run_binary_decoder, run_ternary_decoder
from .errors import ValidationError
from .fusion import final_scores, focal_loss, fuse_semantic, fuse_ternary
from .prompt import (
    ContextFeatures,
    PromptSpec,
    contextual_features,
    encode_prompts,
    global_context,
    run_contextual_decoder,
    semantic_logits,
)
from .scene import Scene, _json_load, _require
from .tokens import build_pairs, build_triplets, enrich_unary

_MODULE = "pipeline"


def _validate_scene(scene: Scene, config: EngineConfig):
    for k, det in enumerate(scene.detections):
        if det.feature.shape[0] != config.c_unary:
            raise ValidationError(
                f"detections[{k}].feature has width {det.feature.shape[0]}, "
                f"config expects {config.c_unary}",
                module=_MODULE,
            )
        if det.category >= config.num_objects:
            raise ValidationError(
                f"detections[{k}].category {det.category} outside the category table",
                module=_MODULE,
            )
    if scene.context.spatial.shape[2] != config.d_model:
        raise ValidationError(
            f"context width {scene.context.spatial.shape[2]} != d_model {config.d_model}",
            module=_MODULE,
        )


def fused_logits(scene: Scene, bank, weights, config: EngineConfig, trace=None):
    """Run all three streams; returns (pair_set, fused logit matrix)."""
    _validate_scene(scene, config)
    table = config.categories
    enriched = enrich_unary(scene.detections, weights, table)
    pair_set = build_pairs(scene.detections, enriched, weights, table, scene.size)
    triplet_set = build_triplets(
        scene.detections, enriched, bank, pair_set, weights, table, scene.size
    )
    spatial, spatial_pos = scene.context.flattened()

    binary_cfg = DecoderConfig(config.d_model, config.heads, config.binary_blocks, "binary")
    decoded = run_binary_decoder(
        pair_set.tokens, pair_set.positions, spatial, spatial_pos, weights, binary_cfg, trace
    )
    binary = classify(decoded, weights.linear("binary.head"))

    ternary_cfg = DecoderConfig(config.d_model, config.heads, config.ternary_blocks, "ternary")
    decoded_t = run_ternary_decoder(
        triplet_set.tokens, triplet_set.positions, spatial, spatial_pos, weights,
        ternary_cfg, trace,
    )
    ternary = classify(decoded_t, weights.linear("ternary.head"))
    refined = fuse_ternary(binary, ternary, triplet_set.pair_assignment, config.fusion.alpha)

    context = ContextFeatures(
        regional=contextual_features(scene.detections, pair_set, weights),
        global_vec=global_context(spatial, weights),
    )
    spec = PromptSpec(prefix=config.prompt_prefix, act_length=config.act_length)
    m0 = encode_prompts(pair_set, scene.detections, table, spec, weights)
    ctx_cfg = DecoderConfig(config.c_prompt, config.heads, config.contextual_blocks, "contextual")
    m2 = run_contextual_decoder(m0, context.global_vec, context.regional, weights, ctx_cfg, trace)
    semantic = semantic_logits(m2, weights.linear("semantic.head"))

    return pair_set, fuse_semantic(refined, semantic, config.fusion.beta)


def infer_scene(scene: Scene, bank, weights, config: EngineConfig, trace=None):
    """Scored interactions for one scene; empty when there are no pairs."""
    pair_set, logits = fused_logits(scene, bank, weights, config, trace)
    return final_scores(logits, pair_set.pairs, scene.detections, config.fusion.lam)


def loss_on_scene(scene: Scene, bank, weights, labels, config: EngineConfig):
    """Focal loss and logit gradient for one scene's fused logits."""
    pair_set, logits = fused_logits(scene, bank, weights, config)
    labels = np.asarray(labels)
    if labels.shape != logits.shape:
        raise ValidationError(
            f"labels shape {labels.shape} does not match {len(pair_set.pairs)} pairs "
            f"x {config.num_actions} actions",
            module=_MODULE,
        )
    return focal_loss(logits, labels, gamma=config.gamma, focal_alpha=config.focal_alpha)


def infer_scenes(scenes, bank, weights, config: EngineConfig, jobs=1):
    """Results per scene in input order; scenes are independent work units."""
    ids = [s.image_id for s in scenes]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate image ids across scenes", module=_MODULE)
    if jobs <= 1 or len(scenes) <= 1:
        return [infer_scene(s, bank, weights, config) for s in scenes]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda s: infer_scene(s, bank, weights, config), scenes))


def weights_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def prediction_metadata(config: EngineConfig, weights_hash: str) -> dict:
    return {
        "alpha": config.fusion.alpha,
        "beta": config.fusion.beta,
        "lambda": config.fusion.lam,
        "gamma": config.gamma,
        "focal_alpha": config.focal_alpha,
        "weights_hash": weights_hash,
        "engine_version": __version__,
        "layout_version": 1,
    }


def write_predictions(path, image_ids, results_per_scene, metadata) -> None:
    images = []
    for image_id, results in zip(image_ids, results_per_scene):
        images.append(
            {
                "image_id": image_id,
                "predictions": [
                    {
                        "human_box": [float(v) for v in r.human_box.as_list()],
                        "object_box": [float(v) for v in r.object_box.as_list()],
                        "object_category": r.object_category,
                        "action_scores": [float(v) for v in r.scores],
                    }
                    for r in results
                ],
            }
        )
    payload = {"metadata": metadata, "images": images}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_predictions(path):
    """Returns (metadata, images) as plain dicts/lists."""
    raw = _json_load(path)
    return _require(raw, "metadata", path), _require(raw, "images", path)
