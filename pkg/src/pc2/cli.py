"""Command-line driver: ``pc2 {train,sparse,uq,reference,report}``.

Exit codes::

    0  success (optimizer converged, or stopped at the round-off floor)
    1  unexpected error
    2  invalid config or arguments
    3  non-finite loss during training
    4  iteration cap reached before convergence
    5  reference solver failure
    6  report: no runs found

Every command writes into ``--out`` (default ``runs/<preset or file stem>``).
Outputs are assembled in a staging directory and moved into place only when
the command succeeds.  CSV files start with a ``# config_sha256: ...`` line;
wall-clock timings go to ``timings_<command>.json`` only, so reruns with the same seed
reproduce every other file byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import experiments as ex
from . import surrogate
from .optimize import NonFinite
from .reference import MCSError, NewtonNonconvergence, NonPositiveStiffness
from .reference.cache import ENV_VAR
from .report import NoRuns, build_report

log = logging.getLogger("pc2")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_NONFINITE, EXIT_CAP, EXIT_SOLVER, EXIT_NORUNS = range(7)

# Statuses that mean "not a clean convergence, but the result is usable":
# the line search cannot make progress once the gradient sits at round-off.
ACCEPTED_STATUS = {"converged", "line search failed"}


def _run_name(spec: str) -> str:
    return Path(spec).stem if spec.endswith(".toml") else spec


def _json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


class Stage:
    """Collects output files in a temporary directory next to ``out``."""

    def __init__(self, out: Path):
        self.out = Path(out)
        self.out.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=f".{self.out.name}.", dir=self.out.parent))

    def path(self, name: str) -> Path:
        return self.tmp / name

    def commit(self) -> list:
        self.out.mkdir(parents=True, exist_ok=True)
        moved = []
        for p in sorted(self.tmp.iterdir()):
            os.replace(p, self.out / p.name)
            moved.append(self.out / p.name)
        shutil.rmtree(self.tmp, ignore_errors=True)
        return moved

    def discard(self):
        shutil.rmtree(self.tmp, ignore_errors=True)


def _write_outcome(stage: Stage, outcome: ex.Outcome, command: str, cfg: dict, cfg_hash: str,
                   config_text: str):
    header = [f"config_sha256: {cfg_hash}"]
    for stem, model in outcome.models.items():
        surrogate.save(model, stage.path(f"{stem}.json"))
    for stem, table in outcome.tables.items():
        table.write(stage.path(f"{stem}.csv"), header)
    metrics = {"command": command, "experiment": cfg["experiment"], "name": cfg.get("name", ""),
               "seed": ex.seed_of(cfg), "config_sha256": cfg_hash, "status": outcome.status,
               "metrics": outcome.metrics}
    stage.path(f"metrics_{command}.json").write_text(_json(metrics))
    stage.path(f"timings_{command}.json").write_text(_json(outcome.timings))
    stage.path("config.toml").write_text(config_text)


def _load_config(args):
    cfg, text = cfgmod.load(args.config)
    if args.seed is not None:
        cfg = {**cfg, "seed": int(args.seed)}
        text = text + f"\n# seed overridden on the command line: {args.seed}\n"
    return cfg, text, cfgmod.config_hash(cfg)


def _out_dir(args) -> Path:
    return Path(args.out) if args.out else Path("runs") / _run_name(args.config)


def _status_code(status: str) -> int:
    if status in ACCEPTED_STATUS:
        return EXIT_OK
    if status.startswith("iteration"):
        return EXIT_CAP
    return EXIT_OK


def _warn_extrapolation(model, X):
    lo = np.array([b[0] for b in model.scaling.bounds])
    hi = np.array([b[1] for b in model.scaling.bounds])
    fam = [f.value for f in model.scaling.families]
    X = np.atleast_2d(X)
    for d in range(model.dims):
        if fam[d] == "legendre" and (np.any(X[:, d] < lo[d]) or np.any(X[:, d] > hi[d])):
            warnings.warn(f"evaluating {model.variables[d]} outside its training range "
                          f"[{lo[d]}, {hi[d]}]; predictions are extrapolated", stacklevel=2)


def cmd_train(args) -> int:
    cfg, text, h = _load_config(args)
    stage = Stage(_out_dir(args))
    try:
        outcome = ex.run_train(cfg, h, args.cache_dir, not args.no_cache, args.threads)
        _write_outcome(stage, outcome, "train", cfg, h, text)
        written = stage.commit()
    except BaseException:
        stage.discard()
        raise
    _print_summary(outcome, written)
    return _status_code(outcome.status)


def cmd_sparse(args) -> int:
    cfg, text, h = _load_config(args)
    stage = Stage(_out_dir(args))
    try:
        outcome = ex.run_sparse(cfg, h, args.cache_dir, not args.no_cache, args.threads)
        _write_outcome(stage, outcome, "sparse", cfg, h, text)
        written = stage.commit()
    except BaseException:
        stage.discard()
        raise
    _print_summary(outcome, written)
    return _status_code(outcome.status)


def cmd_uq(args) -> int:
    cfg, text, h = _load_config(args)
    out = _out_dir(args)
    model_path = Path(args.model) if args.model else out / "model.json"
    if not model_path.exists():
        raise cfgmod.ConfigError(f"no model at {model_path}; run train or sparse first, or pass --model")
    model = surrogate.load(model_path)
    if args.points:
        pts = np.array([[float(v) for v in p.split(",")] for p in args.points])
        _warn_extrapolation(model, np.column_stack([pts, np.zeros((len(pts), model.dims - pts.shape[1]))]))
        cfg = {**cfg, "report": {**cfg.get("report", {}), "probes": pts.tolist()}}
    stage = Stage(out)
    try:
        outcome = ex.run_uq(cfg, h, model, args.cache_dir, not args.no_cache, args.threads)
        _write_outcome(stage, outcome, "uq", cfg, h, text)
        written = stage.commit()
    except BaseException:
        stage.discard()
        raise
    _print_summary(outcome, written)
    return EXIT_OK


def cmd_reference(args) -> int:
    if args.self_test:
        table = ex.self_test()
        w = max(len(r[0]) for r in table.rows)
        for name, res, err, tol, ok in table.rows:
            print(f"{'PASS' if ok else 'FAIL'}  {name:<{w}}  n={res}  error={err:.3e}  tol={tol:.0e}")
        if args.config is None:
            return EXIT_OK if all(r[-1] for r in table.rows) else EXIT_SOLVER
    if args.config is None:
        raise cfgmod.ConfigError("--config is required unless --self-test is given")
    cfg, text, h = _load_config(args)
    if args.nx is not None:
        cfg = {**cfg, "reference": {**cfg.get("reference", {}), "nx": int(args.nx)}}
    sol, key, hit = ex.reference(cfg, args.cache_dir, not args.no_cache, args.threads)
    print(f"cache key {key} ({'hit' if hit else 'computed'})")
    stage = Stage(_out_dir(args))
    try:
        sol.write_csv(stage.path("reference.csv"), [f"config_sha256: {h}", f"cache_key: {key}"])
        stage.path("reference.json").write_text(_json({"cache_key": key, "config_sha256": h,
                                                      "axes": sol.names, "metadata": sol.metadata}))
        if args.self_test:
            table.write(stage.path("self_test.csv"), [f"config_sha256: {h}"])
        stage.commit()
    except BaseException:
        stage.discard()
        raise
    ok = not args.self_test or all(r[-1] for r in table.rows)
    return EXIT_OK if ok else EXIT_SOLVER


def cmd_report(args) -> int:
    root = Path(args.run_dir)
    stage = Stage(Path(args.out) if args.out else root / "report")
    try:
        build_report(root, stage.tmp)
        written = stage.commit()
    except BaseException:
        stage.discard()
        raise
    for f in written:
        print(f)
    return EXIT_OK


def _print_summary(outcome: ex.Outcome, written):
    for k in sorted(outcome.metrics):
        v = outcome.metrics[k]
        if isinstance(v, float):
            print(f"{k}: {v:.6g}")
        elif not isinstance(v, dict):
            print(f"{k}: {v}")
        else:
            for kk, vv in v.items():
                print(f"{k}.{kk}: {vv}")
    for p in written:
        log.info("wrote %s", p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pc2", description="Physics-constrained polynomial chaos surrogates.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="TOML experiment file or preset name (" + ", ".join(cfgmod.preset_names()) + ")")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory (default runs/<config name>)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo (default 1)")
        p.add_argument("--cache-dir", help=f"reference cache directory (default ${ENV_VAR} or ~/.cache/pc2)")
        p.add_argument("--no-cache", action="store_true", help="recompute references without the cache")

    common(sub.add_parser("train", help="train a full-basis surrogate"))
    common(sub.add_parser("sparse", help="train a sparse surrogate grown along the LAR ranking"))
    p = sub.add_parser("uq", help="moments, PDFs and Sobol indices of a stochastic surrogate")
    common(p)
    p.add_argument("--model", help="model file (default <out>/model.json)")
    p.add_argument("--points", nargs="+", metavar="X,Y,...",
                   help="physical probe points for PDFs/Sobol indices, comma separated")
    p = sub.add_parser("reference", help="compute (or fetch from cache) the reference solution")
    common(p, config_required=False)
    p.add_argument("--nx", type=int, help="override the reference resolution")
    p.add_argument("--self-test", action="store_true", help="check the solvers against closed forms")
    p = sub.add_parser("report", help="collect runs into Markdown and CSV tables")
    p.add_argument("run_dir", help="directory searched recursively for run outputs")
    p.add_argument("--out", help="report directory (default <run_dir>/report)")
    return parser


COMMANDS = {"train": cmd_train, "sparse": cmd_sparse, "uq": cmd_uq, "reference": cmd_reference,
            "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (cfgmod.ConfigError, ex.ExperimentError) as exc:
        print(f"pc2: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFinite as exc:
        print(f"pc2: non-finite loss: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except (NewtonNonconvergence, NonPositiveStiffness, MCSError, FloatingPointError) as exc:
        print(f"pc2: reference solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except NoRuns as exc:
        print(f"pc2: {exc}", file=sys.stderr)
        return EXIT_NORUNS
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # noqa: BLE001 - last-resort handler for the exit code
        log.debug("unexpected error", exc_info=True)
        print(f"pc2: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
