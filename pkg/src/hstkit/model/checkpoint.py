"""Checkpoint container.

Layout::

    b"HSTCKPT\\x00" + version (u32 LE) + header length (u64 LE)
    UTF-8 JSON header
    raw little-endian arrays, concatenated in header order

The header holds the model config, the storage dtype, one
``{"name", "shape", "offset"}`` record per array (offsets relative to the
start of the data section) and a free-form ``meta`` object.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from ..tensor import Tensor
from .config import HSTConfig
from .network import ParamStore

MAGIC = b"HSTCKPT\x00"
VERSION = 1
DTYPES = {"float32": "<f4", "float64": "<f8"}


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: HSTConfig
    params: ParamStore
    extra: dict = field(default_factory=dict)  # name -> ndarray, e.g. optimizer moments
    meta: dict = field(default_factory=dict)


def save_checkpoint(path, ckpt: Checkpoint, dtype: str | None = None) -> None:
    """Write atomically; ``dtype`` defaults to the parameters' own precision."""
    if dtype is None:
        dtype = "float64" if ckpt.params.dtype == np.float64 else "float32"
    if dtype not in DTYPES:
        raise CheckpointError(f"unsupported checkpoint dtype {dtype!r}")
    le = np.dtype(DTYPES[dtype])
    arrays = [(f"param.{n}", t.data) for n, t in ckpt.params.items()]
    arrays += [(f"extra.{n}", np.asarray(a)) for n, a in ckpt.extra.items()]
    table, offset = [], 0
    for name, a in arrays:
        table.append({"name": name, "shape": list(a.shape), "offset": offset})
        offset += a.size * le.itemsize
    header = json.dumps({"config": ckpt.config.to_dict(), "dtype": dtype,
                         "arrays": table, "meta": ckpt.meta}, sort_keys=True).encode()
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC + struct.pack("<IQ", VERSION, len(header)))
        f.write(header)
        for _, a in arrays:
            f.write(np.ascontiguousarray(a, dtype=le).tobytes())
    os.replace(tmp, path)


def load_checkpoint(path, dtype=None) -> Checkpoint:
    """Read a checkpoint; arrays come back in native byte order, cast to ``dtype`` if given."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    if len(blob) < 20:
        raise CheckpointError(f"{path}: truncated preamble")
    version, hlen = struct.unpack("<IQ", blob[8:20])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    try:
        header = json.loads(blob[20:20 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header ({e})") from None
    le = np.dtype(DTYPES[header["dtype"]])
    data = memoryview(blob)[20 + hlen:]
    native = np.dtype(dtype) if dtype is not None else le.newbyteorder("=")
    params, extra = ParamStore(), {}
    for rec in header["arrays"]:
        n = int(np.prod(rec["shape"], dtype=np.int64))
        start = rec["offset"]
        end = start + n * le.itemsize
        if end > len(data):
            raise CheckpointError(f"{path}: data section truncated at {rec['name']}")
        a = np.frombuffer(data[start:end], dtype=le).reshape(rec["shape"]).astype(native)
        kind, name = rec["name"].split(".", 1)
        if kind == "param":
            params.add(name, Tensor(a))
        else:
            extra[name] = a
    cfg = HSTConfig.from_dict(header["config"])
    return Checkpoint(cfg, params, extra, header.get("meta", {}))
