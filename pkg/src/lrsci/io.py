"""LRSCI1 tensor container.

Layout::

    b"LRSCI1\\n"                 7 bytes of magic
    uint32 little-endian L       length of the JSON header
    L bytes of UTF-8 JSON        {"kind", "dtype", "shape", optional "step", "noise_sigma", ...}
    payload                      little-endian, row-major

A ``weights`` file stores many named tensors. Its header carries a ``manifest``
list of ``{"name", "shape"}`` entries and the payload is their concatenation in
manifest order; ``shape`` is then the flat total length.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"LRSCI1\n"
KINDS = ("hsi", "mask", "meas", "basis", "subspace", "weights")
_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


def _dtype_tag(dtype) -> str:
    dtype = np.dtype(dtype)
    if dtype.kind == "f" and dtype.itemsize in (4, 8):
        return "f32" if dtype.itemsize == 4 else "f64"
    raise ValueError(f"unsupported dtype {dtype}; LRSCI1 stores f32 or f64")


def atomic_write_bytes(path, data: bytes) -> None:
    """Write ``data`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode(array, kind: str, **meta) -> bytes:
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    array = np.asarray(array)
    tag = _dtype_tag(array.dtype)
    header = {"kind": kind, "dtype": tag, "shape": [int(n) for n in array.shape]}
    header.update(meta)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(array, dtype=_DTYPES[tag]).tobytes()
    return MAGIC + struct.pack("<I", len(blob)) + blob + payload


def decode(data: bytes):
    """Return ``(array, header)`` from LRSCI1 bytes."""
    if data[: len(MAGIC)] != MAGIC:
        raise ValueError("not an LRSCI1 file (bad magic)")
    offset = len(MAGIC)
    (length,) = struct.unpack_from("<I", data, offset)
    offset += 4
    header = json.loads(data[offset : offset + length].decode("utf-8"))
    offset += length
    dtype = _DTYPES[header["dtype"]]
    shape = tuple(header["shape"])
    count = int(np.prod(shape, dtype=np.int64))
    if len(data) - offset != count * dtype.itemsize:
        raise ValueError("payload size does not match header shape")
    array = np.frombuffer(data, dtype=dtype, count=count, offset=offset).reshape(shape)
    return array.astype(dtype.newbyteorder("="), copy=True), header


def save_tensor(path, array, kind: str, **meta) -> None:
    atomic_write_bytes(path, encode(array, kind, **meta))


def load_tensor(path):
    """Load ``(array, header)`` from an LRSCI1 file."""
    return decode(Path(path).read_bytes())


def save_weights(path, tensors: dict, dtype="f32", **meta) -> None:
    """Store an ordered mapping of named arrays as one ``weights`` container."""
    atomic_write_bytes(path, encode_weights(tensors, dtype, **meta))


def encode_weights(tensors: dict, dtype="f32", **meta) -> bytes:
    np_dtype = _DTYPES[dtype]
    manifest = []
    flat = []
    for name, value in tensors.items():
        value = np.asarray(value, dtype=np_dtype)
        manifest.append({"name": name, "shape": list(value.shape)})
        flat.append(value.ravel())
    payload = np.concatenate(flat) if flat else np.zeros(0, dtype=np_dtype)
    return encode(payload, "weights", manifest=manifest, **meta)


def load_weights(path):
    """Return ``(dict of named arrays, header)`` from a ``weights`` container."""
    flat, header = load_tensor(path)
    if header["kind"] != "weights":
        raise ValueError(f"expected kind 'weights', got {header['kind']!r}")
    out = {}
    pos = 0
    for entry in header["manifest"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape, dtype=np.int64))
        out[entry["name"]] = flat[pos : pos + size].reshape(shape).copy()
        pos += size
    return out, header
