"""Binary checkpoint container.

Layout::

    b"ADVLCKPT"                 8-byte magic
    uint32 LE                   format version
    uint32 LE                   header length N
    N bytes                     UTF-8 JSON header
    payload                     float64 LE values, row-major, in record order

The header carries ``config_hash``, free-form ``metadata``, the architecture
of every stored stack, and the ordered record list. Each record is
``{"stack", "layer", "kind", "name", "shape"}``; records with ``stack`` set
to null are standalone named arrays (e.g. a fixed perturbation vector).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .stack import LayerStack

MAGIC = b"ADVLCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    stacks: dict[str, LayerStack] = field(default_factory=dict)
    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    config_hash: str = ""


def _stack_records(name: str, stack: LayerStack):
    for i, layer in enumerate(stack.layers):
        for pname, t in layer.params() + layer.buffers():
            yield {
                "stack": name,
                "layer": i,
                "kind": layer.kind,
                "name": pname,
                "shape": list(t.shape),
            }, t.value


def to_bytes(ckpt: Checkpoint) -> bytes:
    records, blobs = [], []
    for name in ckpt.stacks:
        for rec, value in _stack_records(name, ckpt.stacks[name]):
            records.append(rec)
            blobs.append(value)
    for name, arr in ckpt.arrays.items():
        arr = np.asarray(arr, dtype=np.float64)
        records.append({"stack": None, "layer": None, "kind": "array", "name": name,
                        "shape": list(arr.shape)})
        blobs.append(arr)
    header = {
        "config_hash": ckpt.config_hash,
        "metadata": ckpt.metadata,
        "architectures": {name: s.architecture() for name, s in ckpt.stacks.items()},
        "records": records,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(b, dtype="<f8").tobytes() for b in blobs)
    return MAGIC + struct.pack("<II", FORMAT_VERSION, len(head)) + head + payload


def from_bytes(data: bytes) -> Checkpoint:
    if data[:8] != MAGIC:
        raise CheckpointError("not an advlink checkpoint (bad magic)")
    version, head_len = struct.unpack("<II", data[8:16])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    header = json.loads(data[16:16 + head_len].decode("utf-8"))
    offset = 16 + head_len
    stacks = {
        name: LayerStack.from_architecture(arch)
        for name, arch in header["architectures"].items()
    }
    arrays = {}
    for rec in header["records"]:
        n = math.prod(rec["shape"])
        end = offset + 8 * n
        if end > len(data):
            raise CheckpointError("truncated checkpoint payload")
        value = np.frombuffer(data[offset:end], dtype="<f8").astype(np.float64)
        value = value.reshape(rec["shape"])
        offset = end
        if rec["stack"] is None:
            arrays[rec["name"]] = value
            continue
        layer = stacks[rec["stack"]].layers[rec["layer"]]
        if layer.kind != rec["kind"]:
            raise CheckpointError(f"record kind {rec['kind']} != layer kind {layer.kind}")
        tensors = dict(layer.params() + layer.buffers())
        target = tensors[rec["name"]]
        if target.shape != value.shape:
            raise CheckpointError(f"shape mismatch for {rec}")
        target.value = value
    if offset != len(data):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return Checkpoint(stacks=stacks, arrays=arrays, metadata=header["metadata"],
                      config_hash=header["config_hash"])


def save(path, ckpt: Checkpoint) -> None:
    Path(path).write_bytes(to_bytes(ckpt))


def load(path) -> Checkpoint:
    return from_bytes(Path(path).read_bytes())
