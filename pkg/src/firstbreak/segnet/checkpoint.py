"""Versioned binary checkpoints.

Layout (little-endian)::

    b"FBCK" | u32 version | u32 header_bytes | UTF-8 JSON header | f64 tensors

The JSON header (sorted keys) holds the network configuration, the
iteration counter, the optimizer name and step, free-form metadata and the
ordered tensor table ``[group, name, shape]``. Tensors follow back to back
in table order, C-contiguous.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import FormatError, TruncatedFileError
from .unet import ModelParams, UNetConfig, check_params

MAGIC = b"FBCK"
VERSION = 1
_PREFIX = struct.Struct("<4sII")


@dataclass
class Checkpoint:
    config: UNetConfig
    params: ModelParams
    optimizer: str = "adam"
    opt_state: dict | None = None
    iteration: int = 0
    meta: dict = field(default_factory=dict)


def _tensor_table(ck: Checkpoint):
    groups = [("weights", ck.params.weights), ("buffers", ck.params.buffers)]
    st = ck.opt_state or {}
    for g in ("m", "v"):
        if g in st:
            groups.append((g, st[g]))
    return [(g, name, store[name]) for g, store in groups for name in sorted(store)]


def dumps(ck: Checkpoint) -> bytes:
    table = _tensor_table(ck)
    header = {
        "config": {**asdict(ck.config), "input_shape": list(ck.config.input_shape)},
        "iteration": int(ck.iteration),
        "meta": ck.meta,
        "optimizer": ck.optimizer,
        "optimizer_step": int((ck.opt_state or {}).get("t", 0)),
        "has_opt_state": ck.opt_state is not None,
        "tensors": [[g, n, list(a.shape)] for g, n, a in table],
    }
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, _, a in table)
    return _PREFIX.pack(MAGIC, VERSION, len(hb)) + hb + body


def loads(raw: bytes) -> Checkpoint:
    if len(raw) < _PREFIX.size:
        raise FormatError("checkpoint too short")
    magic, version, hlen = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"bad checkpoint magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    end = _PREFIX.size + hlen
    if len(raw) < end:
        raise TruncatedFileError("checkpoint header truncated")
    try:
        header = json.loads(raw[_PREFIX.size:end].decode("utf-8"))
        cfg = UNetConfig(**header["config"])
        table = header["tensors"]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"unreadable checkpoint header: {exc}") from None
    stores = {"weights": {}, "buffers": {}, "m": {}, "v": {}}
    pos = end
    for group, name, shape in table:
        count = int(np.prod(shape))
        if pos + 8 * count > len(raw):
            raise TruncatedFileError(f"checkpoint ends inside tensor {name}")
        stores[group][name] = np.frombuffer(raw, "<f8", count, pos).reshape(shape).astype(np.float64)
        pos += 8 * count
    if pos != len(raw):
        raise FormatError(f"{len(raw) - pos} trailing bytes in checkpoint")
    params = ModelParams(stores["weights"], stores["buffers"])
    check_params(params, cfg)
    opt = None
    if header.get("has_opt_state"):
        opt = {"t": header["optimizer_step"]}
        if header["optimizer"] == "adam":
            opt["m"], opt["v"] = stores["m"], stores["v"]
    return Checkpoint(cfg, params, header["optimizer"], opt, header["iteration"], header["meta"])


def save_checkpoint(ck: Checkpoint, path) -> None:
    Path(path).write_bytes(dumps(ck))


def load_checkpoint(path) -> Checkpoint:
    return loads(Path(path).read_bytes())
