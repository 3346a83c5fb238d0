"""On-disk cache of reference solutions keyed by a hash of their settings."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .grid import GridSolution

ENV_VAR = "PC2_CACHE_DIR"


def default_cache_dir() -> Path:
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "pc2"


def cache_key(scheme: str, params: dict) -> str:
    text = json.dumps({"scheme": scheme, "params": params}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:24]


def load_cached(key: str, cache_dir=None) -> GridSolution | None:
    path = Path(cache_dir or default_cache_dir()) / f"{key}.npz"
    if not path.exists():
        return None
    with np.load(path, allow_pickle=False) as z:
        names = json.loads(str(z["names"]))
        meta = json.loads(str(z["metadata"]))
        axes = {n: z[f"axis_{i}"] for i, n in enumerate(names)}
        return GridSolution(axes, z["values"], meta)


def store(key: str, sol: GridSolution, cache_dir=None) -> Path:
    d = Path(cache_dir or default_cache_dir())
    d.mkdir(parents=True, exist_ok=True)
    path = d / f"{key}.npz"
    tmp = d / f".{key}.{os.getpid()}.npz"
    arrays = {f"axis_{i}": v for i, v in enumerate(sol.axes.values())}
    np.savez(tmp, values=sol.values, names=json.dumps(sol.names),
             metadata=json.dumps(sol.metadata, sort_keys=True, default=float), **arrays)
    os.replace(tmp, path)
    return path


def cached_solve(scheme: str, params: dict, compute, cache_dir=None, use_cache: bool = True):
    """Return ``(solution, key, hit)``; ``compute()`` runs only on a miss."""
    key = cache_key(scheme, params)
    if use_cache:
        hit = load_cached(key, cache_dir)
        if hit is not None:
            return hit, key, True
    sol = compute()
    if use_cache:
        store(key, sol, cache_dir)
    return sol, key, False
