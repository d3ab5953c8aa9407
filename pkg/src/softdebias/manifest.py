"""Run manifests: enough information to repeat a run exactly."""

from __future__ import annotations

import hashlib
import json
import os
import platform
from pathlib import Path

import numpy as np

MANIFEST_FORMAT = "softdebias.manifest/1"
THREADS_ENV = "SOFTDEBIAS_THREADS"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(command, argv, config: dict, seed, inputs, outputs, timings, losses=None, threads=None, diagnostics=None) -> dict:
    config_blob = json.dumps(config, sort_keys=True).encode()
    return {
        "format": MANIFEST_FORMAT,
        "command": command,
        "argv": list(argv),
        "config": config,
        "config_hash": hashlib.sha256(config_blob).hexdigest(),
        "seed": seed,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "timings": timings,
        "losses": losses or [],
        "threads": threads,
        "diagnostics": diagnostics or {},
        "environment": {"python": platform.python_version(), "numpy": np.__version__},
    }


def write_manifest(manifest: dict, path) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def verify_manifest(path) -> list:
    """Paths whose current digest no longer matches the manifest."""
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    stale = []
    for group in ("inputs", "outputs"):
        for p, digest in manifest[group].items():
            if not os.path.exists(p) or sha256_file(p) != digest:
                stale.append(p)
    return stale
