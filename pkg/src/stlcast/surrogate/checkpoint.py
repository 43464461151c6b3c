"""Single-file checkpoint container: versioned JSON header + parameter blob.

Layout: 8-byte magic, u32 header length, UTF-8 JSON header, then all arrays
concatenated as little-endian float64.  The header records array shapes, so
the blob is self-describing; model-specific fields ride along in the same
header.  Used for diffusion models and the mode classifier alike.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .diffusion import DiffusionModel
from .net import Mlp
from .schedule import NoiseSchedule

__all__ = [
    "write_container",
    "read_container",
    "save_diffusion_model",
    "load_diffusion_model",
]

_MAGIC = b"STLCCKPT"
_FORMAT_VERSION = 1
_LEN = struct.Struct("<I")


def write_container(path, header: dict, arrays: Sequence[np.ndarray]) -> None:
    header = dict(header)
    header["format_version"] = _FORMAT_VERSION
    header["array_shapes"] = [list(np.asarray(a).shape) for a in arrays]
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(_LEN.pack(len(head)))
        fh.write(head)
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_container(path) -> tuple[dict, list[np.ndarray]]:
    raw = Path(path).read_bytes()
    if len(raw) < len(_MAGIC) + _LEN.size or raw[: len(_MAGIC)] != _MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    head_len = _LEN.unpack_from(raw, len(_MAGIC))[0]
    head_start = len(_MAGIC) + _LEN.size
    try:
        header = json.loads(raw[head_start : head_start + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValueError(f"{path}: corrupt checkpoint header ({e})") from None
    if header.get("format_version") != _FORMAT_VERSION:
        raise ValueError(
            f"{path}: unsupported checkpoint version {header.get('format_version')!r}"
        )
    shapes = [tuple(s) for s in header["array_shapes"]]
    need = sum(int(np.prod(s)) for s in shapes)
    blob = np.frombuffer(raw, dtype="<f8", offset=head_start + head_len)
    if blob.size != need:
        raise ValueError(f"{path}: parameter blob has {blob.size} values, expected {need}")
    arrays, at = [], 0
    for s in shapes:
        size = int(np.prod(s))
        arrays.append(blob[at : at + size].reshape(s).astype(np.float64))
        at += size
    return header, arrays


def save_diffusion_model(model: DiffusionModel, path) -> None:
    header = {
        "kind": "diffusion",
        "scenario": model.scenario_id,
        "dim": model.dim,
        "horizon": model.horizon,
        "emb_dim": model.emb_dim,
        "net_sizes": list(model.net.sizes),
        "betas": model.schedule.betas.tolist(),
        "trained_epochs": model.trained_epochs,
        "loss_trace": [float(v) for v in model.loss_trace],
    }
    arrays = [
        *model.net.params,
        model.suffix_mean,
        model.suffix_std,
        model.cond_mean,
        model.cond_std,
    ]
    write_container(path, header, arrays)


def load_diffusion_model(path) -> DiffusionModel:
    header, arrays = read_container(path)
    if header.get("kind") != "diffusion":
        raise ValueError(f"{path}: checkpoint holds a {header.get('kind')!r}, not a diffusion model")
    sizes = tuple(header["net_sizes"])
    net = Mlp(sizes, np.random.default_rng(0))
    n_params = 2 * (len(sizes) - 1)
    params = arrays[:n_params]
    for i in range(len(sizes) - 1):
        net.weights[i] = params[2 * i]
        net.biases[i] = params[2 * i + 1]
    suffix_mean, suffix_std, cond_mean, cond_std = arrays[n_params : n_params + 4]
    return DiffusionModel(
        scenario_id=header["scenario"],
        dim=int(header["dim"]),
        horizon=int(header["horizon"]),
        schedule=NoiseSchedule(np.asarray(header["betas"])),
        net=net,
        emb_dim=int(header["emb_dim"]),
        suffix_mean=suffix_mean,
        suffix_std=suffix_std,
        cond_mean=cond_mean,
        cond_std=cond_std,
        trained_epochs=int(header["trained_epochs"]),
        loss_trace=[float(v) for v in header["loss_trace"]],
    )
