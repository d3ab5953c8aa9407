"""Versioned checkpoints: an npz archive with a JSON header, float64
parameters, optimizer moments and the loss history.

Archive members are written with a fixed timestamp so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import io
import json
import zipfile

import numpy as np

from .config import TrainConfig
from .errors import DataError
from .optim import OptimizerState

FORMAT = "softdebias.checkpoint"
VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)
HISTORY_KEYS = ("total", "norm1", "norm2")


def _write_member(zf, name, arr):
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.asanyarray(arr), allow_pickle=False)
    info = zipfile.ZipInfo(name + ".npy", date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, buf.getvalue())


def save_checkpoint(path, method: str, result) -> None:
    """Write a :class:`~softdebias.baseline.TrainResult` to ``path``."""
    cfg = result.config
    if method == "dsd":
        params = result.model.state_dict()
        blocks = len(result.model.blocks)
        dim = result.model.dim
    elif method == "baseline":
        params = {"T": result.model}
        blocks = 0
        dim = result.model.shape[0]
    else:
        raise ValueError(f"unknown method {method!r}")
    header = {
        "format": FORMAT,
        "version": VERSION,
        "method": method,
        "dim": int(dim),
        "blocks": blocks,
        "seed": cfg.seed,
        "optimizer": result.optimizer.kind,
        "config": cfg.to_dict(),
        "param_names": sorted(params),
    }
    hist = np.array([[h[k] for k in HISTORY_KEYS] for h in result.history], dtype=np.float64).reshape(-1, 3)
    with zipfile.ZipFile(path, "w") as zf:
        _write_member(zf, "header", np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8))
        for name in sorted(params):
            _write_member(zf, "param/" + name, np.asarray(params[name], dtype=np.float64))
        for name, arr in sorted(result.optimizer.to_arrays().items()):
            _write_member(zf, "opt/" + name, arr)
        _write_member(zf, "history", hist)


def load_checkpoint(path) -> dict:
    """Returns header, params, optimizer (OptimizerState), history and config."""
    try:
        data = np.load(path, allow_pickle=False)
    except (OSError, ValueError, zipfile.BadZipFile) as exc:
        raise DataError(f"{path}: not a checkpoint ({exc})") from None
    with data:
        if "header" not in data.files:
            raise DataError(f"{path}: checkpoint header missing")
        header = json.loads(bytes(data["header"]).decode())
        if header.get("format") != FORMAT:
            raise DataError(f"{path}: unknown checkpoint format {header.get('format')!r}")
        if header.get("version") != VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {header.get('version')}")
        params = {k[len("param/"):]: data[k] for k in data.files if k.startswith("param/")}
        opt = {k[len("opt/"):]: data[k] for k in data.files if k.startswith("opt/")}
        history = data["history"]
    return {
        "header": header,
        "params": params,
        "optimizer": OptimizerState.from_arrays(header["optimizer"], opt),
        "history": history,
        "config": TrainConfig(**header["config"]),
    }


def restore_net(ckpt: dict):
    from .dsd import DebiasNet

    header = ckpt["header"]
    if header["method"] != "dsd":
        raise DataError("checkpoint does not hold a residual network")
    net = DebiasNet(header["dim"], header["blocks"])
    net.load_state_dict(ckpt["params"])
    return net
