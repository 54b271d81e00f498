"""Self-describing binary checkpoint container.

Layout (all integers little-endian):

    magic    4 bytes  b"ADDN"
    version  u32      currently 1
    hlen     u32      header length
    header   hlen bytes of UTF-8 JSON: {"config", "epoch", "adam_step"}
    nblocks  u32
    blocks   nblocks of:
        nlen u32, name (nlen bytes UTF-8)
        ndim u32, extents (ndim x u32)
        data (prod(extents) float64 little-endian)

Parameters are stored under their model names; Adam moments, when present,
under ``adam.m:<name>`` / ``adam.v:<name>``. Roundtrips are bitwise.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig, validate_config
from .errors import BadMagicError, CheckpointError, ShapeError, TruncatedError, VersionError
from .model import Model
from .optim import AdamState
from .tensor import Tensor

MAGIC = b"ADDN"
VERSION = 1


@dataclass
class Checkpoint:
    config: dict
    epoch: int
    params: dict[str, np.ndarray]
    adam_step: int | None = None
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)

    def run_config(self) -> RunConfig:
        return validate_config(RunConfig(**self.config))


def checkpoint_from_model(model: Model, epoch: int, adam: AdamState | None = None) -> Checkpoint:
    params = {name: p.data.copy() for name, p in model.params.items()}
    if adam is None:
        return Checkpoint(model.cfg.snapshot(), epoch, params)
    return Checkpoint(
        model.cfg.snapshot(), epoch, params,
        adam_step=adam.step,
        adam_m={k: v.copy() for k, v in adam.m.items()},
        adam_v={k: v.copy() for k, v in adam.v.items()},
    )


def _write_block(fh, name: str, arr: np.ndarray) -> None:
    raw = name.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)
    fh.write(struct.pack("<I", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def save_checkpoint(ckpt: Checkpoint, path: str) -> None:
    header = json.dumps(
        {"config": ckpt.config, "epoch": ckpt.epoch, "adam_step": ckpt.adam_step},
        sort_keys=True,
    ).encode("utf-8")
    blocks: list[tuple[str, np.ndarray]] = list(ckpt.params.items())
    if ckpt.adam_step is not None:
        blocks += [(f"adam.m:{k}", v) for k, v in ckpt.adam_m.items()]
        blocks += [(f"adam.v:{k}", v) for k, v in ckpt.adam_v.items()]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(struct.pack("<I", len(blocks)))
        for name, arr in blocks:
            _write_block(fh, name, arr)


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedError(f"checkpoint truncated while reading {what}")
    return data


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
        version = struct.unpack("<I", _read_exact(fh, 4, "version"))[0]
        if version != VERSION:
            raise VersionError(f"unsupported checkpoint version {version}, expected {VERSION}")
        hlen = struct.unpack("<I", _read_exact(fh, 4, "header length"))[0]
        try:
            header = json.loads(_read_exact(fh, hlen, "header"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
        nblocks = struct.unpack("<I", _read_exact(fh, 4, "block count"))[0]
        params: dict[str, np.ndarray] = {}
        adam_m: dict[str, np.ndarray] = {}
        adam_v: dict[str, np.ndarray] = {}
        for _ in range(nblocks):
            nlen = struct.unpack("<I", _read_exact(fh, 4, "name length"))[0]
            name = _read_exact(fh, nlen, "block name").decode("utf-8")
            ndim = struct.unpack("<I", _read_exact(fh, 4, f"ndim of '{name}'"))[0]
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim, f"shape of '{name}'"))
            count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            raw = _read_exact(fh, 8 * count, f"data of '{name}'")
            arr = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
            if name.startswith("adam.m:"):
                adam_m[name[len("adam.m:"):]] = arr
            elif name.startswith("adam.v:"):
                adam_v[name[len("adam.v:"):]] = arr
            else:
                params[name] = arr
        if fh.read(1):
            raise CheckpointError("trailing bytes after the declared blocks")
    return Checkpoint(
        config=header.get("config", {}),
        epoch=int(header.get("epoch", 0)),
        params=params,
        adam_step=header.get("adam_step"),
        adam_m=adam_m,
        adam_v=adam_v,
    )


def model_from_checkpoint(ckpt: Checkpoint) -> Model:
    """Rebuild a model from the stored config and bind stored parameters."""
    cfg = ckpt.run_config()
    model = Model(cfg)
    bind_params(model, ckpt)
    return model


def bind_params(model: Model, ckpt: Checkpoint) -> None:
    """Copy checkpoint tensors into the model, validating names and shapes."""
    for name, p in model.params.items():
        if name not in ckpt.params:
            raise CheckpointError(f"checkpoint is missing parameter '{name}'")
        stored = ckpt.params[name]
        if stored.shape != p.data.shape:
            raise ShapeError(
                f"checkpoint tensor '{name}' has shape {stored.shape}, "
                f"model expects {p.data.shape}"
            )
        p.data = stored.astype(np.float64).copy()
    extra = set(ckpt.params) - set(model.params)
    if extra:
        raise CheckpointError(f"checkpoint has unknown parameters: {sorted(extra)}")


def adam_from_checkpoint(ckpt: Checkpoint) -> AdamState | None:
    if ckpt.adam_step is None:
        return None
    return AdamState(step=int(ckpt.adam_step),
                     m={k: v.copy() for k, v in ckpt.adam_m.items()},
                     v={k: v.copy() for k, v in ckpt.adam_v.items()})
