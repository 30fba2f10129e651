"""Scene, category-table and knowledge-bank data with their file formats.

Scenes and banks are human-readable JSON so fixtures can be inspected by
eye; bulk numerics (context grids) live in a sibling tensor container the
scene file points at. Detection features are inlined as decimal literals,
which round-trip float32 exactly through the double shortest-repr path.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .container import read_tensor_container, write_tensor_container
from .errors import ParseError, ValidationError
from .geometry import Box, ImageSize
from .kernels import tensor

_MODULE = "scene"

UNARY_PROMPT = "a photo of {article} {name}"


def _json_load(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            module=_MODULE,
        ) from exc


def _require(obj, field, where):
    if field not in obj:
        raise ValidationError(f"{where}: missing field {field!r}", module=_MODULE)
    return obj[field]


@dataclass(frozen=True)
class CategoryTable:
    """Object and action vocabularies plus the designated human category."""

    objects: tuple
    articles: tuple
    actions: tuple
    human: int

    def __post_init__(self):
        if len(self.objects) != len(self.articles):
            raise ValidationError("one article per object name required", module=_MODULE)
        if len(set(self.objects)) != len(self.objects):
            raise ValidationError("object names must be unique", module=_MODULE)
        if len(set(self.actions)) != len(self.actions):
            raise ValidationError("action names must be unique", module=_MODULE)
        if not 0 <= self.human < len(self.objects):
            raise ValidationError(f"human category {self.human} out of range", module=_MODULE)

    @property
    def num_objects(self):
        return len(self.objects)

    @property
    def num_actions(self):
        return len(self.actions)

    def object_prompt(self, category: int) -> str:
        """Unary text template for one category, e.g. 'a photo of an apple'."""
        return UNARY_PROMPT.format(article=self.articles[category], name=self.objects[category])


def load_categories(path) -> CategoryTable:
    raw = _json_load(path)
    objects = _require(raw, "objects", path)
    return CategoryTable(
        objects=tuple(_require(o, "name", f"{path}: objects[{k}]") for k, o in enumerate(objects)),
        articles=tuple(_require(o, "article", f"{path}: objects[{k}]") for k, o in enumerate(objects)),
        actions=tuple(_require(raw, "actions", path)),
        human=int(_require(raw, "human", path)),
    )


def save_categories(path, table: CategoryTable) -> None:
    payload = {
        "objects": [
            {"name": n, "article": a} for n, a in zip(table.objects, table.articles)
        ],
        "actions": list(table.actions),
        "human": table.human,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class KnowledgeBank:
    """Ordered (object_category, tool_category) pairs licensing triplets."""

    pairs: frozenset

    def __post_init__(self):
        for obj, tool in self.pairs:
            if obj == tool:
                raise ValidationError(
                    f"bank pair has identical object and tool category {obj}", module=_MODULE
                )


def _resolve_category(value, table: CategoryTable, where):
    if isinstance(value, str):
        try:
            return table.objects.index(value)
        except ValueError:
            raise ValidationError(f"{where}: unknown category name {value!r}", module=_MODULE)
    cat = int(value)
    if not 0 <= cat < table.num_objects:
        raise ValidationError(f"{where}: category id {cat} out of range", module=_MODULE)
    return cat


def load_bank(path, table: CategoryTable) -> KnowledgeBank:
    raw = _json_load(path)
    entries = _require(raw, "pairs", path)
    pairs = set()
    for k, entry in enumerate(entries):
        where = f"{path}: pairs[{k}]"
        obj = _resolve_category(_require(entry, "object", where), table, where)
        tool = _resolve_category(_require(entry, "tool", where), table, where)
        pairs.add((obj, tool))
    return KnowledgeBank(pairs=frozenset(pairs))


def save_bank(path, bank: KnowledgeBank, table: CategoryTable) -> None:
    entries = [
        {"object": table.objects[o], "tool": table.objects[t]}
        for o, t in sorted(bank.pairs)
    ]
    Path(path).write_text(json.dumps({"pairs": entries}, indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Detection:
    """One detected instance: box, confidence, category id, unary feature."""

    box: Box
    score: float
    category: int
    feature: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"score {self.score} outside [0, 1]", module=_MODULE)
        if self.category < 0:
            raise ValidationError(f"negative category id {self.category}", module=_MODULE)
        if self.feature.ndim != 1:
            raise ValidationError("detection feature must be a vector", module=_MODULE)


@dataclass(frozen=True)
class SceneContext:
    """Spatial feature grid and its positional grid, same dims."""

    spatial: np.ndarray  # (H, W, D) float32
    positions: np.ndarray

    def __post_init__(self):
        if self.spatial.ndim != 3:
            raise ValidationError("context grids must be 3-d (H, W, D)", module=_MODULE)
        if self.spatial.shape != self.positions.shape:
            raise ValidationError(
                f"context dims disagree: spatial {self.spatial.shape} vs "
                f"positions {self.positions.shape}",
                module=_MODULE,
            )

    def flattened(self):
        h, w, d = self.spatial.shape
        return self.spatial.reshape(h * w, d), self.positions.reshape(h * w, d)


@dataclass(frozen=True)
class Scene:
    image_id: str
    size: ImageSize
    detections: tuple
    context: SceneContext


def load_scene(path) -> Scene:
    """Read a scene JSON plus the tensor container it references."""
    path = Path(path)
    raw = _json_load(path)
    image_id = str(_require(raw, "image_id", path))
    size = ImageSize(float(_require(raw, "width", path)), float(_require(raw, "height", path)))

    tensor_file = path.parent / _require(raw, "tensors", path)
    _, tensors = read_tensor_container(tensor_file)
    ctx = _require(raw, "context", path)
    spatial_name = _require(ctx, "spatial", f"{path}: context")
    positions_name = _require(ctx, "positions", f"{path}: context")
    for name in (spatial_name, positions_name):
        if name not in tensors:
            raise ValidationError(f"{tensor_file}: missing context tensor {name!r}", module=_MODULE)
    context = SceneContext(spatial=tensors[spatial_name], positions=tensors[positions_name])

    detections = []
    feature_width = None
    for k, det in enumerate(_require(raw, "detections", path)):
        where = f"{path}: detections[{k}]"
        box_vals = _require(det, "box", where)
        if len(box_vals) != 4:
            raise ValidationError(f"{where}: box needs 4 coordinates", module=_MODULE)
        feature = tensor(_require(det, "feature", where))
        if feature_width is None:
            feature_width = feature.shape[0]
        elif feature.shape[0] != feature_width:
            raise ValidationError(
                f"{where}: feature width {feature.shape[0]} != {feature_width}", module=_MODULE
            )
        try:
            detections.append(
                Detection(
                    box=Box(*[float(v) for v in box_vals]),
                    score=float(_require(det, "score", where)),
                    category=int(_require(det, "category", where)),
                    feature=feature,
                )
            )
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc.message}", module=_MODULE) from exc
    return Scene(image_id=image_id, size=size, detections=tuple(detections), context=context)


def write_scene(path, scene: Scene, version=None) -> None:
    """Write the scene JSON and its sibling ``<stem>.tensors`` container."""
    path = Path(path)
    tensor_file = path.with_suffix(".tensors")
    kwargs = {} if version is None else {"version": version}
    write_tensor_container(
        tensor_file,
        {"context.spatial": scene.context.spatial, "context.positions": scene.context.positions},
        **kwargs,
    )
    payload = {
        "image_id": scene.image_id,
        "width": scene.size.width,
        "height": scene.size.height,
        "tensors": tensor_file.name,
        "context": {"spatial": "context.spatial", "positions": "context.positions"},
        "detections": [
            {
                "box": [float(v) for v in det.box.as_list()],
                "score": float(det.score),
                "category": det.category,
                "feature": [float(v) for v in det.feature],
            }
            for det in scene.detections
        ],
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
