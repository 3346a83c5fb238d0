import json
import warnings
from pathlib import Path

import numpy as np
import pytest

from pc2 import surrogate
from pc2.cli import main

SMALL_BURGERS = """
experiment = "burgers"
name = "small burgers"
seed = 0

[problem]
variables = [
  { name = "x", lower = 0.0, upper = 1.0 },
  { name = "t", lower = 0.0, upper = 0.3, time = true },
]
parameters = { nu = 0.1 }
sources = { s = "(sin (* pi x))" }
pde = { residual = "(+ (dt u) (* u (dx u)) (* -1 nu (dxx u)))", points = 300 }
ic = { residual = "(- u s)", points = 40 }

[problem.bc]
points = 40
faces = [
  { at = "x=lower", residual = "u" },
  { at = "x=upper", residual = "u" },
]

[basis]
degree = 6

[training]
gtol = 1e-7

[data]
points = 60
full_training = false

[sparse]
tau = 1e300

[reference]
nx = 101
nt = 150

[report]
grid = 21
time_grid = 21
t_eval = 0.3
mse_threshold = 5e-3
"""


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL_BURGERS)
    return p


def run(*argv):
    return main([str(a) for a in argv])


def files(d: Path):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if not p.name.startswith("timings_")}


def test_train_writes_outputs_and_reruns_identically(small, tmp_path, capsys):
    cache = tmp_path / "cache"
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("train", "--config", small, "--out", a, "--cache-dir", cache) == 0
    assert run("train", "--config", small, "--out", b, "--cache-dir", cache) == 0
    fa, fb = files(a), files(b)
    assert {"model.json", "metrics_train.json", "history.csv", "field.csv", "config.toml"} <= set(fa)
    assert fa == fb
    metrics = json.loads(fa["metrics_train.json"])
    assert metrics["metrics"]["L_PDE"] < 5e-3 and metrics["metrics"]["mse"] < 5e-3
    h = metrics["config_sha256"]
    assert fa["history.csv"].decode().startswith(f"# config_sha256: {h}\n")
    model = surrogate.load(a / "model.json")
    assert model.metadata["config_sha256"] == h
    assert "mse:" in capsys.readouterr().out


def test_seed_override_changes_the_model(small, tmp_path):
    cache = tmp_path / "cache"
    assert run("train", "--config", small, "--out", tmp_path / "a", "--cache-dir", cache) == 0
    assert run("train", "--config", small, "--out", tmp_path / "b", "--cache-dir", cache, "--seed", 5) == 0
    assert (tmp_path / "a/model.json").read_bytes() != (tmp_path / "b/model.json").read_bytes()
    assert json.loads((tmp_path / "b/metrics_train.json").read_text())["seed"] == 5


def test_sparse_with_huge_tau_logs_one_round(small, tmp_path):
    out = tmp_path / "s"
    assert run("sparse", "--config", small, "--out", out, "--cache-dir", tmp_path / "cache") == 0
    rows = [l for l in (out / "sparse_losses.csv").read_text().splitlines() if not l.startswith("#")]
    assert rows[0].startswith("k,") and len(rows) == 2
    assert surrogate.load(out / "model.json").metadata["sparse_k"] == 10


def test_malformed_config_exits_2_without_output(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(SMALL_BURGERS.replace("[basis]", "[basis]\nfamily = 'x'"))
    out = tmp_path / "runs" / "bad"
    assert run("train", "--config", bad, "--out", out) == 2
    assert "unknown key" in capsys.readouterr().err
    assert not (tmp_path / "runs").exists()


def test_nonfinite_loss_exits_3_without_output(small, tmp_path):
    bad = tmp_path / "nan.toml"
    bad.write_text(SMALL_BURGERS.replace('(sin (* pi x))', '(log (- x 2))'))
    out = tmp_path / "runs" / "nan"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        assert run("train", "--config", bad, "--out", out) == 3
    assert not out.exists() and list((tmp_path / "runs").iterdir()) == []


def test_iteration_cap_exits_4(tmp_path):
    capped = tmp_path / "cap.toml"
    capped.write_text(SMALL_BURGERS.replace("gtol = 1e-7", "gtol = 1e-7\nmax_iter = 3"))
    out = tmp_path / "cap"
    assert run("train", "--config", capped, "--out", out, "--cache-dir", tmp_path / "cache") == 4
    assert json.loads((out / "metrics_train.json").read_text())["status"] == "iteration cap reached"


def test_reference_cache_and_resolution_override(small, tmp_path, capsys):
    cache = tmp_path / "cache"
    args = ["reference", "--config", small, "--out", tmp_path / "r", "--cache-dir", cache]
    assert run(*args) == 0
    first = capsys.readouterr().out
    assert run(*args) == 0
    second = capsys.readouterr().out
    assert "(computed)" in first and "(hit)" in second
    assert first.split()[2] == second.split()[2]
    assert run(*args, "--nx", 51) == 0
    third = capsys.readouterr().out
    assert third.split()[2] != first.split()[2] and "(computed)" in third
    assert (tmp_path / "r/reference.csv").exists()


def test_reference_self_test(capsys):
    assert run("reference", "--self-test") == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 4 and all(l.startswith("PASS") for l in out)


def test_uq_constant_model_has_zero_std(tmp_path):
    beam = tmp_path / "beam.toml"
    from pc2.config import resolve_path
    text = resolve_path("beam_kl").read_text()
    beam.write_text(text.replace("mcs_samples = 10000", "mcs_samples = 500")
                    .replace("pdf_samples = 10000", "pdf_samples = 2000"))
    out = tmp_path / "beam"
    from pc2.basis import MultiIndexSet
    from pc2 import experiments as ex, config
    cfg, _ = config.load(str(beam))
    problem = ex.build_problem(cfg, ex.beam_setup(cfg))
    const = surrogate.SurrogateModel(problem.scaling, MultiIndexSet([(0,) * 8], 8), [0.0],
                                     problem.names, 1, {"output_scale": 1.0})
    surrogate.save(const, tmp_path / "const.json")
    assert run("uq", "--config", beam, "--out", out, "--model", tmp_path / "const.json",
               "--cache-dir", tmp_path / "cache") == 0
    m = json.loads((out / "metrics_uq.json").read_text())["metrics"]
    assert m["std"] == 0.0 and m["mean"] == 0.0 and m["mcs_samples"] == 500
    assert (out / "pdf.csv").exists()


def test_uq_without_model_exits_2(small, tmp_path):
    assert run("uq", "--config", small, "--out", tmp_path / "none") == 2


def test_report_on_empty_tree_exits_6(tmp_path):
    (tmp_path / "empty").mkdir()
    assert run("report", tmp_path / "empty") == 6
    assert not (tmp_path / "empty/report").exists()


def test_report_collects_runs(small, tmp_path, capsys):
    runs = tmp_path / "runs"
    cache = tmp_path / "cache"
    assert run("train", "--config", small, "--out", runs / "full", "--cache-dir", cache) == 0
    assert run("sparse", "--config", small, "--out", runs / "sparse", "--cache-dir", cache) == 0
    capsys.readouterr()
    assert run("report", runs) == 0
    printed = capsys.readouterr().out.split()
    assert str(runs / "report" / "report.md") in printed
    csv = (runs / "report/table3_burgers_deterministic.csv").read_text().splitlines()
    assert csv[0] == "run,model,N,P,MSE" and len(csv) == 3
    md = (runs / "report/report.md").read_text()
    assert "Sparse PC2" in md and "Full PC2" in md and "time (s)" in md
    first = (runs / "report/table3_burgers_deterministic.csv").read_bytes()
    assert run("report", runs) == 0
    assert (runs / "report/table3_burgers_deterministic.csv").read_bytes() == first


def test_heat_preset_train_meets_report_threshold(tmp_path):
    out = tmp_path / "heat"
    assert run("train", "--config", "heat2d_det", "--out", out, "--cache-dir", tmp_path / "cache") == 0
    assert (out / "model.json").exists()
    m = json.loads((out / "metrics_train.json").read_text())["metrics"]
    assert m["L_PDE"] < 1e-3, f"L_PDE {m['L_PDE']:.3e} at the end of training"
