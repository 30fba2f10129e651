"""Writers for the engine's wire formats, implemented from the format
docs rather than shared code, so exported files double as a
cross-implementation check. The engine's `inspect` and loaders are the
acceptance oracle.

Tensor container: magic "CRLN", u32 layout version, u32 count, then per
tensor u16 name length, UTF-8 name, u8 ndim, u32 dims, float32 payload
row-major; little-endian, no padding.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .errors import BridgeError

MAGIC = b"CRLN"
LAYOUT_VERSION = 1


def write_container(path, tensors: dict) -> None:
    chunks = [struct.pack("<4sII", MAGIC, LAYOUT_VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(np.asarray(arr, dtype=np.float32))
        if arr.size and not np.isfinite(arr).all():
            raise BridgeError(f"tensor {name!r} contains non-finite values")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f4").tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def write_scene_file(path, image_id, width, height, detections, spatial, positions) -> None:
    """Scene JSON plus its sibling .tensors container.

    ``detections`` is a list of dicts with box, score, category, feature.
    """
    path = Path(path)
    tensor_file = path.with_suffix(".tensors")
    write_container(
        tensor_file,
        {"context.spatial": spatial, "context.positions": positions},
    )
    payload = {
        "image_id": image_id,
        "width": float(width),
        "height": float(height),
        "tensors": tensor_file.name,
        "context": {"spatial": "context.spatial", "positions": "context.positions"},
        "detections": [
            {
                "box": [float(v) for v in det["box"]],
                "score": float(det["score"]),
                "category": int(det["category"]),
                "feature": [float(v) for v in np.asarray(det["feature"], dtype=np.float32)],
            }
            for det in detections
        ],
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_engine_config(path):
    """Target dims and category table from the engine's config files."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        cats = json.loads((path.parent / raw["categories"]).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise BridgeError(f"cannot read engine config {path}: {exc}") from exc
    dims = raw["dims"]
    return {
        "c_unary": int(dims["C"]),
        "d_model": int(dims["D"]),
        "e_text": int(dims["E"]),
        "objects": [(o["name"], o["article"]) for o in cats["objects"]],
        "human": int(cats["human"]),
    }


def unary_prompt(name: str, article: str) -> str:
    return f"a photo of {article} {name}"
