"""Feature providers.

The offline provider derives everything deterministically from the image
pixels plus seeded projections, so exports are byte-reproducible and
need no checkpoints. The hub providers wrap a pretrained detector and a
CLIP-style encoder when those are installed and downloadable; loading
failures surface as BridgeError.
"""

import hashlib
import math

import numpy as np
from PIL import Image

from .errors import BridgeError
from .formats import unary_prompt

_MASK = (1 << 64) - 1


def _mix(x: int) -> int:
    x &= _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return (x ^ (x >> 31)) & _MASK


def seeded_floats(seed: int, label: str, n: int, low=-1.0, high=1.0) -> np.ndarray:
    key = int.from_bytes(
        hashlib.blake2b(f"{seed}\x1f{label}".encode(), digest_size=8).digest(), "little"
    )
    vals = np.empty(n, dtype=np.float64)
    for i in range(n):
        vals[i] = (_mix(key + (i + 1) * 0x9E3779B97F4A7C15) >> 11) * 2.0**-53
    return (low + (high - low) * vals).astype(np.float32)


def projection(seed: int, label: str, n_in: int, n_out: int) -> np.ndarray:
    """Seeded down-projection matrix (recorded in the manifest by seed)."""
    limit = math.sqrt(3.0 / n_in)
    return seeded_floats(seed, f"proj\x1f{label}", n_in * n_out, -limit, limit).reshape(
        n_in, n_out
    )


def sinusoidal_grid(grid_h: int, grid_w: int, width: int) -> np.ndarray:
    """Fixed 2-d sin/cos positional grid, (H, W, width)."""
    half = width // 2
    out = np.zeros((grid_h, grid_w, width), dtype=np.float32)
    for axis, size in ((0, grid_h), (1, grid_w)):
        span = half // 2 if axis == 0 else half - half // 2
        offset = 0 if axis == 0 else 2 * (half // 2)
        for k in range(span):
            freq = 1.0 / (100.0 ** (2.0 * k / max(1, half)))
            coords = np.arange(size, dtype=np.float64) * freq
            s, c = np.sin(coords), np.cos(coords)
            for pos in range(size):
                idx = [slice(None), slice(None)]
                idx[axis] = pos
                out[tuple(idx) + (offset + 2 * k,)] = s[pos]
                out[tuple(idx) + (offset + 2 * k + 1,)] = c[pos]
    return out


def load_image(path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    except (OSError, ValueError) as exc:
        raise BridgeError(f"cannot read image {path}: {exc}") from exc


class OfflineProvider:
    """Checkpoint-free stand-in: boxes from salient grid cells, features
    from projected patch statistics, text vectors from hashed prompts."""

    name = "offline"
    _CELL_STATS = 8  # mean/std per channel plus normalized cell coords

    def __init__(self, config):
        self.config = config

    def _cell_stats(self, pixels, rows, cols):
        h, w, _ = pixels.shape
        stats = np.zeros((rows, cols, self._CELL_STATS), dtype=np.float64)
        for r in range(rows):
            for c in range(cols):
                y0, y1 = (h * r) // rows, max((h * (r + 1)) // rows, (h * r) // rows + 1)
                x0, x1 = (w * c) // cols, max((w * (c + 1)) // cols, (w * c) // cols + 1)
                patch = pixels[y0:y1, x0:x1]
                stats[r, c, :3] = patch.mean(axis=(0, 1))
                stats[r, c, 3:6] = patch.std(axis=(0, 1))
                stats[r, c, 6] = (r + 0.5) / rows
                stats[r, c, 7] = (c + 0.5) / cols
        return stats

    def detect(self, pixels):
        """Detections from the most textured cells of a coarse grid."""
        cfg = self.config
        h, w, _ = pixels.shape
        rows = cols = 4
        stats = self._cell_stats(pixels, rows, cols)
        saliency = stats[:, :, 3:6].sum(axis=2)
        order = np.argsort(-saliency, axis=None)
        feat_proj = projection(cfg.seed, "detection-feature", self._CELL_STATS, cfg.c_unary)

        detections = []
        for rank, flat in enumerate(order[: cfg.max_detections]):
            r, c = divmod(int(flat), cols)
            if saliency[r, c] < 1e-6:
                continue  # flat cell: nothing detectable there
            pad_y, pad_x = h / rows * 0.2, w / cols * 0.2
            box = [
                max(0.0, w * c / cols - pad_x),
                max(0.0, h * r / rows - pad_y),
                min(float(w), w * (c + 1) / cols + pad_x),
                min(float(h), h * (r + 1) / rows + pad_y),
            ]
            digest = hashlib.blake2b(stats[r, c].tobytes(), digest_size=8).digest()
            if rank == 0:
                category = cfg.human
            else:
                category = int.from_bytes(digest, "little") % len(cfg.objects)
            score = 0.3 + 0.69 * min(1.0, saliency[r, c] / 1.5)
            feature = stats[r, c].astype(np.float64) @ feat_proj.astype(np.float64)
            detections.append(
                {
                    "box": box,
                    "score": float(score),
                    "category": category,
                    "feature": feature.astype(np.float32),
                }
            )
        return detections

    def spatial_features(self, pixels):
        """(H', W', D) context grid plus its positional grid."""
        cfg = self.config
        stats = self._cell_stats(pixels, cfg.grid_h, cfg.grid_w)
        proj = projection(cfg.seed, "spatial", self._CELL_STATS, cfg.d_model)
        flat = stats.reshape(-1, self._CELL_STATS) @ proj.astype(np.float64)
        spatial = flat.reshape(cfg.grid_h, cfg.grid_w, cfg.d_model).astype(np.float32)
        positions = sinusoidal_grid(cfg.grid_h, cfg.grid_w, cfg.d_model)
        return spatial, positions

    def text_table(self):
        """One vector per category from its hashed unary prompt."""
        cfg = self.config
        rows = []
        for name, article in cfg.objects:
            prompt = unary_prompt(name, article)
            rows.append(seeded_floats(cfg.seed, f"text\x1f{prompt}", cfg.e_text))
        return np.stack(rows)


class HubProvider:
    """Pretrained detector + CLIP features via `transformers` (optional).

    Feature widths are reduced to the engine dims with the same seeded
    projections the offline provider uses.
    """

    name = "hub"

    def __init__(self, config):
        self.config = config
        try:
            import torch  # noqa: F401
            from transformers import (  # noqa: F401
                CLIPModel,
                CLIPProcessor,
                DetrForObjectDetection,
                DetrImageProcessor,
            )
        except ImportError as exc:
            raise BridgeError(f"hub provider needs torch+transformers: {exc}") from exc
        try:
            from transformers import (
                CLIPModel,
                CLIPProcessor,
                DetrForObjectDetection,
                DetrImageProcessor,
            )

            self._detr = DetrForObjectDetection.from_pretrained(config.detector)
            self._detr_proc = DetrImageProcessor.from_pretrained(config.detector)
            self._clip = CLIPModel.from_pretrained(config.vlm)
            self._clip_proc = CLIPProcessor.from_pretrained(config.vlm)
        except Exception as exc:  # checkpoint missing, offline env, ...
            raise BridgeError(f"model load failed: {exc}") from exc
        self._names = {n: i for i, (n, _) in enumerate(config.objects)}

    def detect(self, pixels):
        import torch

        cfg = self.config
        image = (pixels * 255).astype(np.uint8)
        inputs = self._detr_proc(images=image, return_tensors="pt")
        with torch.no_grad():
            outputs = self._detr(**inputs, output_hidden_states=True)
        h, w = pixels.shape[:2]
        processed = self._detr_proc.post_process_object_detection(
            outputs, threshold=0.5, target_sizes=[(h, w)]
        )[0]
        queries = outputs.decoder_hidden_states[-1][0].numpy()
        proj = projection(cfg.seed, "detr-feature", queries.shape[1], cfg.c_unary)
        detections = []
        for k in range(len(processed["scores"])):
            label = self._detr.config.id2label[int(processed["labels"][k])]
            if label not in self._names:
                continue
            box = processed["boxes"][k].tolist()
            detections.append(
                {
                    "box": box,
                    "score": float(processed["scores"][k]),
                    "category": self._names[label],
                    "feature": (queries[k] @ proj).astype(np.float32),
                }
            )
            if len(detections) == cfg.max_detections:
                break
        return detections

    def spatial_features(self, pixels):
        import torch

        cfg = self.config
        image = (pixels * 255).astype(np.uint8)
        inputs = self._clip_proc(images=image, return_tensors="pt")
        with torch.no_grad():
            vision = self._clip.vision_model(**{"pixel_values": inputs["pixel_values"]})
        patches = vision.last_hidden_state[0, 1:].numpy()  # drop the class token
        side = int(math.sqrt(patches.shape[0]))
        grid = patches.reshape(side, side, -1)
        pos = self._clip.vision_model.embeddings.position_embedding.weight[1:].detach().numpy()
        pos_grid = pos.reshape(side, side, -1)

        def pool(g):
            ry = np.array_split(np.arange(side), cfg.grid_h)
            rx = np.array_split(np.arange(side), cfg.grid_w)
            out = np.zeros((cfg.grid_h, cfg.grid_w, g.shape[2]))
            for i, ys in enumerate(ry):
                for j, xs in enumerate(rx):
                    out[i, j] = g[np.ix_(ys, xs)].mean(axis=(0, 1))
            return out

        proj = projection(cfg.seed, "clip-spatial", grid.shape[2], cfg.d_model)
        spatial = (pool(grid) @ proj).astype(np.float32)
        positions = (pool(pos_grid) @ proj).astype(np.float32)
        return spatial, positions

    def text_table(self):
        import torch

        cfg = self.config
        prompts = [unary_prompt(n, a) for n, a in cfg.objects]
        inputs = self._clip_proc(text=prompts, return_tensors="pt", padding=True)
        with torch.no_grad():
            text = self._clip.get_text_features(**inputs).numpy()
        proj = projection(cfg.seed, "clip-text", text.shape[1], cfg.e_text)
        return (text @ proj).astype(np.float32)


def make_provider(config):
    if config.detector == "offline" and config.vlm == "offline":
        return OfflineProvider(config)
    return HubProvider(config)
