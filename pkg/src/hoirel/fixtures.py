"""Deterministic fixture generation.

Stands in for the frozen upstream models (detector and vision-language
encoder): scenes, context grids, text tables and weights are all derived
from counter-based streams keyed on (seed, label), so the same seed
always produces byte-identical files, in any generation order.
"""

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import EngineConfig, save_engine_config
from .container import write_tensor_container
from .errors import ConfigError
from .evaluation import GroundTruthTriplet, save_ground_truth
from .geometry import Box, ImageSize
from .rng import Stream
from .scene import (
    CategoryTable,
    Detection,
    KnowledgeBank,
    Scene,
    SceneContext,
    save_bank,
    save_categories,
    write_scene,
)
from .weights import required_weights

_MODULE = "fixtures"

OBJECT_VOCAB = [
    ("person", "a"),
    ("cup", "a"),
    ("bottle", "a"),
    ("knife", "a"),
    ("cake", "a"),
    ("spoon", "a"),
    ("bowl", "a"),
    ("apple", "an"),
    ("orange", "an"),
    ("chair", "a"),
    ("umbrella", "an"),
    ("elephant", "an"),
    ("book", "a"),
    ("oven", "an"),
    ("sink", "a"),
    ("bicycle", "a"),
]

ACTION_VOCAB = [
    "hold", "fill", "cut", "eat", "wash", "pour",
    "open", "carry", "inspect", "ride", "feed", "point",
]

# (object, tool) candidates; filtered against the active vocabulary size.
BANK_CANDIDATES = [
    ("cup", "bottle"),
    ("cake", "knife"),
    ("bowl", "spoon"),
    ("apple", "knife"),
    ("cup", "spoon"),
    ("bowl", "bottle"),
    ("orange", "knife"),
    ("bottle", "cup"),
]


@dataclass(frozen=True)
class FixtureSpec:
    """Counts and dims for one generated fixture tree."""

    scenes: int = 3
    min_detections: int = 3
    max_detections: int = 6
    min_humans: int = 1
    image_width: float = 640.0
    image_height: float = 480.0
    c_unary: int = 12
    d_model: int = 16
    c_prompt: int = 16
    e_text: int = 8
    grid_h: int = 4
    grid_w: int = 4
    heads: int = 2
    blocks: int = 2
    act_length: int = 4
    num_objects: int = 8
    num_actions: int = 6
    bank_pairs: int = 4
    gt_per_scene: int = 3

    def __post_init__(self):
        if self.min_detections > self.max_detections:
            raise ConfigError("min_detections > max_detections", module=_MODULE)
        if self.min_humans > self.min_detections:
            raise ConfigError("min_humans cannot exceed min_detections", module=_MODULE)
        if self.num_objects < 2:
            raise ConfigError("need at least person plus one object", module=_MODULE)

    @classmethod
    def from_dict(cls, raw: dict) -> "FixtureSpec":
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown fixture spec fields: {sorted(unknown)}", module=_MODULE)
        return replace(cls(), **raw)


def category_table(spec: FixtureSpec) -> CategoryTable:
    objects = list(OBJECT_VOCAB)
    while len(objects) < spec.num_objects:
        objects.append((f"thing{len(objects):02d}", "a"))
    objects = objects[: spec.num_objects]
    actions = list(ACTION_VOCAB)
    while len(actions) < spec.num_actions:
        actions.append(f"act{len(actions):02d}")
    return CategoryTable(
        objects=tuple(n for n, _ in objects),
        articles=tuple(a for _, a in objects),
        actions=tuple(actions[: spec.num_actions]),
        human=0,
    )


def knowledge_bank(spec: FixtureSpec, table: CategoryTable) -> KnowledgeBank:
    names = {n: i for i, n in enumerate(table.objects)}
    pairs = []
    for obj, tool in BANK_CANDIDATES:
        if obj in names and tool in names:
            pairs.append((names[obj], names[tool]))
        if len(pairs) == spec.bank_pairs:
            break
    return KnowledgeBank(pairs=frozenset(pairs))


def engine_config(spec: FixtureSpec, table: CategoryTable) -> EngineConfig:
    return EngineConfig(
        categories=table,
        c_unary=spec.c_unary,
        d_model=spec.d_model,
        c_prompt=spec.c_prompt,
        e_text=spec.e_text,
        heads=spec.heads,
        binary_blocks=spec.blocks,
        ternary_blocks=spec.blocks,
        act_length=spec.act_length,
    )


def generate_weights(seed: int, config: EngineConfig) -> dict:
    """Scaled-uniform weights; norm gains 1 and norm biases 0."""
    out = {}
    for name, shape in required_weights(config).items():
        stream = Stream(seed, "weights", name)
        numel = int(np.prod(shape))
        if name.endswith(".norm.g"):
            out[name] = np.ones(shape, dtype=np.float32)
        elif name.endswith(".norm.b"):
            out[name] = np.zeros(shape, dtype=np.float32)
        elif len(shape) == 2:
            limit = math.sqrt(6.0 / (shape[0] + shape[1]))
            out[name] = stream.uniform_block(numel, -limit, limit).reshape(shape)
        else:
            out[name] = stream.uniform_block(numel, -0.05, 0.05).reshape(shape)
    # text table and act tokens want unit-scale values, not bias-scale ones
    out["text.table"] = Stream(seed, "weights", "text.table").uniform_block(
        config.num_objects * config.e_text, -1.0, 1.0
    ).reshape(config.num_objects, config.e_text)
    out["prompt.act"] = Stream(seed, "weights", "prompt.act").uniform_block(
        config.act_length * config.e_text, -0.5, 0.5
    ).reshape(config.act_length, config.e_text)
    return out


def _random_box(stream: Stream, base: int, spec: FixtureSpec) -> Box:
    bw = spec.image_width * (0.08 + 0.35 * stream.uniform(base))
    bh = spec.image_height * (0.08 + 0.35 * stream.uniform(base + 1))
    cx = bw / 2 + stream.uniform(base + 2) * (spec.image_width - bw)
    cy = bh / 2 + stream.uniform(base + 3) * (spec.image_height - bh)
    return Box(cx - bw / 2, cy - bh / 2, cx + bw / 2, cy + bh / 2)


def generate_scene(seed: int, index: int, spec: FixtureSpec, table: CategoryTable) -> Scene:
    layout = Stream(seed, "scene", index, "layout")
    n = layout.integer(0, spec.min_detections, spec.max_detections + 1)
    h = layout.integer(1, spec.min_humans, max(spec.min_humans, n // 2) + 1)
    h = min(h, n)
    order = np.argsort(layout.raw_block(n, start=8))
    human_slots = set(int(order[k]) for k in range(h))

    detections = []
    for k in range(n):
        det = Stream(seed, "scene", index, "det", k)
        if k in human_slots:
            category = table.human
        else:
            category = det.integer(0, 1, table.num_objects)
        detections.append(
            Detection(
                box=_random_box(det, 1, spec),
                score=0.3 + 0.69 * det.uniform(5),
                category=category,
                feature=det.uniform_block(spec.c_unary, -1.0, 1.0, start=6),
            )
        )
    grid = Stream(seed, "scene", index, "context")
    cells = spec.grid_h * spec.grid_w * spec.d_model
    context = SceneContext(
        spatial=grid.uniform_block(cells, -1.0, 1.0).reshape(
            spec.grid_h, spec.grid_w, spec.d_model
        ),
        positions=grid.uniform_block(cells, -1.0, 1.0, start=cells).reshape(
            spec.grid_h, spec.grid_w, spec.d_model
        ),
    )
    return Scene(
        image_id=f"scene_{index:03d}",
        size=ImageSize(spec.image_width, spec.image_height),
        detections=tuple(detections),
        context=context,
    )


def _jitter(box: Box, stream: Stream, base: int) -> Box:
    dx = (stream.uniform(base) - 0.5) * 0.16 * max(box.width, 1.0)
    dy = (stream.uniform(base + 1) - 0.5) * 0.16 * max(box.height, 1.0)
    sw = 0.92 + 0.16 * stream.uniform(base + 2)
    sh = 0.92 + 0.16 * stream.uniform(base + 3)
    cx, cy = box.center
    return Box(
        cx + dx - box.width * sw / 2,
        cy + dy - box.height * sh / 2,
        cx + dx + box.width * sw / 2,
        cy + dy + box.height * sh / 2,
    )


def generate_ground_truth(seed: int, scenes, spec: FixtureSpec, table: CategoryTable):
    records = []
    for scene in scenes:
        stream = Stream(seed, "gt", scene.image_id)
        humans = [i for i, d in enumerate(scene.detections) if d.category == table.human]
        others = [i for i in range(len(scene.detections)) if i not in humans]
        if not humans or len(scene.detections) < 2:
            continue
        count = stream.integer(0, 1, spec.gt_per_scene + 1)
        seen = set()
        for g in range(count):
            hh = humans[stream.integer(10 * g + 1, 0, len(humans))]
            pool = others if others else [i for i in humans if i != hh]
            if not pool:
                continue
            oo = pool[stream.integer(10 * g + 2, 0, len(pool))]
            action = stream.integer(10 * g + 3, 0, table.num_actions)
            if (hh, oo, action) in seen:
                continue
            seen.add((hh, oo, action))
            records.append(
                GroundTruthTriplet(
                    image_id=scene.image_id,
                    human_box=_jitter(scene.detections[hh].box, stream, 10 * g + 4),
                    object_box=_jitter(scene.detections[oo].box, stream, 10 * g + 8),
                    object_category=scene.detections[oo].category,
                    action=action,
                )
            )
    return records


def gen_fixtures(seed: int, spec: FixtureSpec, out_dir) -> dict:
    """Write a complete fixture tree; returns paths keyed by role."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenes").mkdir(exist_ok=True)

    table = category_table(spec)
    bank = knowledge_bank(spec, table)
    config = engine_config(spec, table)

    save_categories(out / "categories.json", table)
    save_bank(out / "bank.json", bank, table)
    save_engine_config(out / "engine.json", config, "categories.json")
    write_tensor_container(out / "weights.tensors", generate_weights(seed, config))

    scenes = []
    scene_paths = []
    for index in range(spec.scenes):
        scene = generate_scene(seed, index, spec, table)
        path = out / "scenes" / f"scene_{index:03d}.json"
        write_scene(path, scene)
        scenes.append(scene)
        scene_paths.append(path)

    save_ground_truth(out / "ground_truth.json", generate_ground_truth(seed, scenes, spec, table))
    (out / "fixture.json").write_text(
        json.dumps({"seed": seed, "spec": spec.__dict__}, indent=2) + "\n", encoding="utf-8"
    )
    return {
        "categories": out / "categories.json",
        "bank": out / "bank.json",
        "engine": out / "engine.json",
        "weights": out / "weights.tensors",
        "scenes": scene_paths,
        "ground_truth": out / "ground_truth.json",
    }
