"""Binary tensor container, the engine's only binary format.

Layout (little-endian, no padding):

    magic    4 bytes   b"CRLN"
    version  u32       layout version shared by spatial encodings and weights
    count    u32       number of tensors
    per tensor:
      name_len u16, name utf-8, ndim u8, dims u32 * ndim,
      payload float32 * prod(dims), row-major

Payload bytes round-trip exactly; readers reject bad magic, truncation,
trailing bytes and non-finite values.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

MAGIC = b"CRLN"
LAYOUT_VERSION = 1

_MODULE = "container"


def _normalize(tensors):
    if isinstance(tensors, dict):
        items = list(tensors.items())
    else:
        items = list(tensors)
    seen = set()
    out = []
    for name, arr in items:
        if not isinstance(name, str) or not name:
            raise ValidationError(f"tensor name must be a non-empty string: {name!r}", module=_MODULE)
        if name in seen:
            raise ValidationError(f"duplicate tensor name: {name!r}", module=_MODULE)
        seen.add(name)
        arr = np.ascontiguousarray(np.asarray(arr, dtype=np.float32))
        if arr.size and not np.isfinite(arr).all():
            raise ValidationError(f"tensor {name!r} contains NaN or Inf", module=_MODULE)
        if arr.ndim > 255:
            raise ValidationError(f"tensor {name!r} has too many dims", module=_MODULE)
        out.append((name, arr))
    return out


def write_tensor_container(path, tensors, version=LAYOUT_VERSION) -> None:
    items = _normalize(tensors)
    chunks = [struct.pack("<4sII", MAGIC, version, len(items))]
    for name, arr in items:
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValidationError(f"tensor name too long: {name!r}", module=_MODULE)
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f4").tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def read_tensor_container(path):
    """Read a container; returns (version, dict of name -> float32 array)."""
    data = Path(path).read_bytes()
    offset = 0

    def take(n, what):
        nonlocal offset
        if offset + n > len(data):
            raise ParseError(
                f"truncated container {path}: need {n} bytes for {what} at offset {offset}",
                module=_MODULE,
            )
        chunk = data[offset : offset + n]
        offset += n
        return chunk

    magic = take(4, "magic")
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r} in {path} (expected {MAGIC!r})", module=_MODULE)
    version, count = struct.unpack("<II", take(8, "header"))
    tensors = {}
    for t in range(count):
        (name_len,) = struct.unpack("<H", take(2, f"tensor {t} name length"))
        try:
            name = take(name_len, f"tensor {t} name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"tensor {t} name is not valid UTF-8", module=_MODULE) from exc
        if name in tensors:
            raise ParseError(f"duplicate tensor name {name!r} in {path}", module=_MODULE)
        (ndim,) = struct.unpack("<B", take(1, f"{name} ndim"))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim, f"{name} dims"))
        numel = 1
        for d in dims:
            numel *= d
        payload = take(4 * numel, f"{name} payload")
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
        if arr.size and not np.isfinite(arr).all():
            raise ValidationError(f"tensor {name!r} contains NaN or Inf", module=_MODULE)
        tensors[name] = arr
    if offset != len(data):
        raise ParseError(
            f"{len(data) - offset} trailing bytes after last tensor in {path}",
            module=_MODULE,
        )
    return version, tensors
