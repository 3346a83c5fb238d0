"""Experiment configuration files (TOML) and their schema.

A config is one TOML document.  Top-level keys::

    experiment   "heat2d" | "burgers" | "eos" | "beam"
    name         free text, used in reports
    seed         root seed (default 0)
    [problem]    variables, parameters, sources, pde, ic, bc, inequalities,
                 output_scale (multiplies the surrogate for reporting)
    [basis]      degree
    [training]   weights, gtol, max_iter, init, continuation_rounds,
                 continuation_factor, violation_tol
    [data]       model evaluations used as training data (``full_training =
                 false`` keeps them out of the train command)
    [sparse]     tau, degree (overrides basis.degree), p_min, step, cap
    [stochastic] kl (beam random field)
    [reference]  solver resolution and Monte Carlo size
    [report]     evaluation grids and probe points
    [eos]        dataset and split settings for the inequality study

Unknown keys anywhere are rejected.  See ``docs/config.md`` in the
repository for every field.
"""

from __future__ import annotations

import hashlib
import json
import sys
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib


class ConfigError(ValueError):
    pass


NUM = (int, float)

VARIABLE = {"name": str, "lower": NUM, "upper": NUM, "family": str, "kind": str, "time": bool}
FACE = {"at": str, "residual": str}
BLOCK = {"residual": str, "points": int}
BC = {"points": int, "faces": [FACE]}
INEQ = {"residual": str, "points": int, "penalty": NUM, "boundary_points": int, "label": str}

SCHEMA = {
    "experiment": str,
    "name": str,
    "seed": int,
    "problem": {
        "variables": [VARIABLE],
        "parameters": {"*": NUM},
        "sources": {"*": str},
        "pde": BLOCK,
        "ic": BLOCK,
        "bc": BC,
        "inequalities": [INEQ],
        "output_scale": NUM,
    },
    "basis": {"degree": int},
    "training": {
        "weights": (str, dict),
        "gtol": NUM,
        "max_iter": int,
        "init": str,
        "continuation_rounds": int,
        "continuation_factor": NUM,
        "violation_tol": NUM,
    },
    "data": {"evaluations": int, "points_per_evaluation": int, "points": int, "full_training": bool},
    "sparse": {"tau": NUM, "degree": int, "p_min": int, "step": int, "cap": int},
    "stochastic": {
        "kl": {"mean": NUM, "cov": NUM, "corr_length": NUM, "terms": int, "grid": int,
               "prefix": str, "field_source": str},
    },
    "reference": {"nx": int, "nt": int, "mcs_samples": int, "probe": NUM},
    "report": {"grid": int, "time_grid": int, "t_eval": NUM, "probes": [[NUM]],
               "pdf_samples": int, "mse_threshold": NUM},
    "eos": {
        "n_points": int, "n_train": int, "splits": int, "holdout": int,
        "targets": [{"name": str, "truth": str, "constraint": str, "margin": NUM,
                     "points": int, "boundary_points": int, "penalty": NUM}],
        "test_grid": int,
    },
}

REQUIRED = {"experiment", "problem", "basis"}
EXPERIMENTS = ("heat2d", "burgers", "eos", "beam")


def _type_name(t):
    if isinstance(t, tuple):
        return " or ".join(x.__name__ for x in t)
    return t.__name__


def _check(value, schema, path):
    if isinstance(schema, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{path or 'config'}: expected a table")
        if "*" in schema:
            for k, v in value.items():
                _check(v, schema["*"], f"{path}.{k}")
            return
        unknown = sorted(set(value) - set(schema))
        if unknown:
            raise ConfigError(f"{path or 'config'}: unknown key(s) {unknown}")
        for k, v in value.items():
            _check(v, schema[k], f"{path}.{k}" if path else k)
    elif isinstance(schema, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        for i, v in enumerate(value):
            _check(v, schema[0], f"{path}[{i}]")
    else:
        ok = isinstance(value, schema) and not (isinstance(value, bool) and schema in (int, NUM))
        if not ok:
            raise ConfigError(f"{path}: expected {_type_name(schema)}, got {type(value).__name__}")


def validate(cfg: dict) -> dict:
    _check(cfg, SCHEMA, "")
    missing = sorted(REQUIRED - set(cfg))
    if missing:
        raise ConfigError(f"missing required key(s) {missing}")
    if cfg["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
    if not cfg["problem"].get("variables"):
        raise ConfigError("problem.variables must list at least one variable")
    if cfg["basis"].get("degree", 0) < 0:
        raise ConfigError("basis.degree must be >= 0")
    w = cfg.get("training", {}).get("weights", "adaptive")
    if isinstance(w, str) and w != "adaptive":
        raise ConfigError("training.weights must be 'adaptive' or a table of fixed weights")
    if cfg["experiment"] == "eos" and "eos" not in cfg:
        raise ConfigError("eos experiments need an [eos] table")
    return cfg


def loads(text: str) -> dict:
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from None
    return validate(cfg)


def preset_names() -> list:
    return sorted(p.name[:-5] for p in resources.files("pc2.presets").iterdir() if p.name.endswith(".toml"))


def resolve_path(spec) -> Path | None:
    """A file path, or the name of a shipped preset."""
    p = Path(spec)
    if p.exists():
        return p
    if str(spec) in preset_names():
        return Path(str(resources.files("pc2.presets") / f"{spec}.toml"))
    return None


def load(spec) -> tuple:
    """``(config dict, source text)`` from a path or preset name."""
    path = resolve_path(spec)
    if path is None:
        raise ConfigError(f"no config file or preset named {spec!r}")
    text = path.read_text()
    return loads(text), text


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
