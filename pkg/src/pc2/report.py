"""Consolidated result tables from a tree of run directories.

A run directory is any directory holding ``metrics_<command>.json`` files
written by the CLI.  Rows are grouped into one table per experiment family:

    table1_heat2d_deterministic    model, N, P, MSE, time
    table2_heat2d_uq               model, N, P, MAE of mean, MAE of std, time
    table3_burgers_deterministic   model, N, P, MSE, time
    table4_burgers_uq              model, N, P, MAE of mean, MAE of std, time
    table5_beam_uq                 model, N, P, mean, std, time (plus the MCS row)
    table6_eos_constraints         target, violation counts, median errors

CSV tables leave out wall-clock columns so they are reproducible; the
Markdown file shows the timings next to the same numbers.
"""

from __future__ import annotations

import json
from pathlib import Path

from .experiments import Table

TABLES = {
    "table1_heat2d_deterministic": ("2D heat equation, deterministic",
                                    ["run", "model", "N", "P", "MSE"]),
    "table2_heat2d_uq": ("2D heat equation, uncertain diffusivity",
                         ["run", "model", "N", "P", "MAE_mean", "MAE_std"]),
    "table3_burgers_deterministic": ("Burgers equation, deterministic",
                                     ["run", "model", "N", "P", "MSE"]),
    "table4_burgers_uq": ("Burgers equation, uncertain viscosity",
                          ["run", "model", "N", "P", "MAE_mean", "MAE_std"]),
    "table5_beam_uq": ("Beam with random stiffness, midspan deflection",
                       ["run", "model", "N", "P", "mean", "std", "KS"]),
    "table6_eos_constraints": ("Synthetic EOS with monotonicity constraints",
                               ["run", "target", "splits", "baseline_violating_fraction",
                                "pc2_violating_splits", "baseline_median_error", "pc2_median_error"]),
}


class NoRuns(RuntimeError):
    pass


def _load(path: Path):
    return json.loads(path.read_text())


def _model_label(command: str) -> str:
    return "Sparse PC2" if command == "sparse" else "Full PC2"


def collect(root: Path) -> dict:
    """Rows per table, each row ``(csv values, seconds or None)``."""
    rows = {k: [] for k in TABLES}
    dirs = sorted({p.parent for p in Path(root).rglob("metrics_*.json") if "report" not in p.parent.name})
    for d in dirs:
        run = str(d.relative_to(root)) if d != Path(root) else "."
        runs = {}
        for cmd in ("train", "sparse", "uq"):
            p = d / f"metrics_{cmd}.json"
            if p.exists():
                t = d / f"timings_{cmd}.json"
                runs[cmd] = (_load(p), _load(t) if t.exists() else {})
        if not runs:
            continue
        exp = next(iter(runs.values()))[0]["experiment"]
        if exp == "eos":
            m = runs.get("train", (None,))[0]
            if m is None:
                continue
            secs = runs["train"][1].get("study_s")
            for target, s in sorted(m["metrics"]["targets"].items()):
                rows["table6_eos_constraints"].append(([
                    run, target, m["metrics"]["splits"], s["baseline_violating_fraction"],
                    s["pc2_violating_splits"], s["baseline_median_error"], s["pc2_median_error"]], secs))
            continue
        uq = runs.get("uq")
        model_cmd = None
        model_file = d / "model.json"
        if uq is not None and model_file.exists():
            meta = json.loads(model_file.read_text()).get("metadata", {})
            model_cmd = "sparse" if "sparse_k" in meta else "train"
        for cmd in ("train", "sparse"):
            if cmd not in runs:
                continue
            m, t = runs[cmd]
            mm = m["metrics"]
            secs = t.get("train_s")
            base = [run, _model_label(cmd), mm.get("n_data_rows", 0), mm.get("n_coef")]
            if "mse" in mm:
                key = "table1_heat2d_deterministic" if exp == "heat2d" else "table3_burgers_deterministic"
                rows[key].append((base + [mm["mse"]], secs))
            elif uq is not None and model_cmd == cmd:
                u = uq[0]["metrics"]
                if exp == "beam":
                    rows["table5_beam_uq"].append((base + [u["mean"], u["std"], u["ks_statistic"]], secs))
                else:
                    key = "table2_heat2d_uq" if exp == "heat2d" else "table4_burgers_uq"
                    rows[key].append((base + [u["mae_mean"], u["mae_std"]], secs))
        if uq is not None and exp == "beam":
            u = uq[0]["metrics"]
            rows["table5_beam_uq"].append(([run, "MCS", u["mcs_samples"], "", u["mcs_mean"], u["mcs_std"], ""],
                                           uq[1].get("reference_s")))
    return rows


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def build_report(root, out_dir) -> list:
    root, out_dir = Path(root), Path(out_dir)
    rows = collect(root)
    if not any(rows.values()):
        raise NoRuns(f"no runs found under {root}")
    files = []
    md = ["# Results", ""]
    for key, (title, columns) in TABLES.items():
        if not rows[key]:
            continue
        Table(columns, [r for r, _ in rows[key]]).write(out_dir / f"{key}.csv")
        files.append(out_dir / f"{key}.csv")
        md += [f"## {title}", "", "| " + " | ".join(columns + ["time (s)"]) + " |",
               "|" + "---|" * (len(columns) + 1)]
        for r, secs in rows[key]:
            md.append("| " + " | ".join(_fmt(v) for v in r) + f" | {_fmt(secs) if secs is not None else ''} |")
        md.append("")
    (out_dir / "report.md").write_text("\n".join(md))
    files.append(out_dir / "report.md")
    return files
