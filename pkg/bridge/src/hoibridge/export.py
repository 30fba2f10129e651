"""Export images into the engine's scene/container formats."""

import json
from pathlib import Path

from .config import BridgeConfig
from .errors import BridgeError
from .formats import write_container, write_scene_file
from .providers import load_image, make_provider


def export_scene(image_path, out_dir, config: BridgeConfig, provider=None, image_id=None):
    """One image -> scene JSON + tensor container; returns manifest entry."""
    provider = provider or make_provider(config)
    image_path = Path(image_path)
    pixels = load_image(image_path)
    h, w, _ = pixels.shape

    detections = provider.detect(pixels)
    for det in detections:
        if len(det["feature"]) != config.c_unary:
            raise BridgeError(
                f"provider produced width-{len(det['feature'])} features, "
                f"config wants {config.c_unary}"
            )
    spatial, positions = provider.spatial_features(pixels)
    if spatial.shape != (config.grid_h, config.grid_w, config.d_model):
        raise BridgeError(f"spatial grid {spatial.shape} does not match config")

    image_id = image_id or image_path.stem
    scenes_dir = Path(out_dir) / "scenes"
    scenes_dir.mkdir(parents=True, exist_ok=True)
    scene_path = scenes_dir / f"{image_id}.json"
    write_scene_file(scene_path, image_id, w, h, detections, spatial, positions)
    return {
        "image": str(image_path),
        "image_id": image_id,
        "scene": str(scene_path.relative_to(out_dir)),
        "tensors": str(scene_path.with_suffix(".tensors").relative_to(out_dir)),
        "detections": len(detections),
    }


def export_batch(image_paths, out_dir, config: BridgeConfig):
    """All images plus the text table and a manifest; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    provider = make_provider(config)

    entries = [export_scene(p, out, config, provider=provider) for p in image_paths]

    table = provider.text_table()
    if table.shape != (len(config.objects), config.e_text):
        raise BridgeError(f"text table shape {table.shape} does not match config")
    write_container(out / "text_table.tensors", {"text.table": table})

    manifest = {
        "provider": provider.name,
        "detector": config.detector,
        "vlm": config.vlm,
        "seed": config.seed,
        "down_projection_seed": config.seed,
        "dims": {"C": config.c_unary, "D": config.d_model, "E": config.e_text},
        "grid": [config.grid_h, config.grid_w],
        "num_categories": len(config.objects),
        "text_table": "text_table.tensors",
        "scenes": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest
