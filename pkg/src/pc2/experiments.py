"""Experiment pipelines behind the command-line driver.

Each pipeline takes a validated config dict (see :mod:`pc2.config`) and
returns an :class:`Outcome` holding models, metric values and tables.  The
pipelines never touch the filesystem except through the reference-solution
cache; writing outputs is the caller's job, so a failed run leaves nothing
behind.

Supported experiments: ``heat2d`` and ``burgers`` (deterministic when every
variable is physical, stochastic otherwise), ``beam`` (random Young's
modulus through a Karhunen–Loève expansion) and ``eos`` (monotonicity
constraints on a synthetic equation-of-state dataset).
"""

from __future__ import annotations

import csv
import dataclasses
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import ks_2samp

from .basis import DomainScaling, total_degree_index_set
from .constraints import CompiledResidual, Problem, build_constraint_set
from .postprocess import Reducer, ZeroVariance, pdf_estimate, sample_reduced
from .randomfield import kl_expand
from .reference import (BeamProblem, GridSolution, beam_solve, burgers_solve, cached_solve,
                        heat2d_solve, mcs_moments, uniform_midspan_deflection)
from .sampling import draw_inputs, rng_for, sample_inputs
from .sparse import SparseConfig, lar_path, sparse_pc2_train
from .surrogate import DesignSystem, RankDeficient, SurrogateModel, build_design_matrix, ols_solve
from .trainer import TrainConfig, TrainingData, train


class ExperimentError(ValueError):
    """The config is valid TOML but does not describe a runnable experiment."""


@dataclass
class Table:
    columns: list
    rows: list

    def write(self, path, header_lines=()) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([_cell(v) for v in row])
        return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer, np.bool_)):
        return repr(v.item())
    return v


@dataclass
class Outcome:
    models: dict = field(default_factory=dict)       # file stem -> SurrogateModel
    metrics: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)       # file stem -> Table
    timings: dict = field(default_factory=dict)
    status: str = "converged"
    notes: list = field(default_factory=list)


# -- problem assembly --------------------------------------------------------

def seed_of(cfg: dict) -> int:
    return int(cfg.get("seed", 0))


def train_config(cfg: dict) -> TrainConfig:
    t = cfg.get("training", {})
    return TrainConfig(
        degree=int(cfg["basis"]["degree"]),
        weights=t.get("weights", "adaptive"),
        max_iter=t.get("max_iter"),
        gtol=float(t.get("gtol", 1e-8)),
        init=t.get("init", "auto"),
        continuation_rounds=int(t.get("continuation_rounds", 3)),
        continuation_factor=float(t.get("continuation_factor", 10.0)),
        violation_tol=float(t.get("violation_tol", 0.0)),
        seed=seed_of(cfg),
    )


def sparse_config(cfg: dict) -> SparseConfig:
    s = cfg.get("sparse")
    if not s or "tau" not in s:
        raise ExperimentError("the sparse command needs a [sparse] table with tau")
    return SparseConfig(float(s["tau"]), s.get("p_min"), s.get("step"), s.get("cap"))


@dataclass
class BeamSetup:
    kl: object
    length: float
    load: float
    inertia: float
    e_mean: float
    wref: float


def beam_setup(cfg: dict) -> BeamSetup:
    par = cfg["problem"].get("parameters", {})
    kl_cfg = cfg.get("stochastic", {}).get("kl")
    if kl_cfg is None:
        raise ExperimentError("beam experiments need a [stochastic.kl] table")
    try:
        L, q, I = float(par["length"]), float(par["load"]), float(par["inertia"])
    except KeyError as exc:
        raise ExperimentError(f"beam parameter {exc} missing") from None
    e_mean = float(kl_cfg["mean"])
    kl = kl_expand(float(kl_cfg["cov"]) * e_mean, float(kl_cfg["corr_length"]) * L, L,
                   int(kl_cfg["terms"]), int(kl_cfg.get("grid", 256)), e_mean)
    wref = abs(uniform_midspan_deflection(q, L, e_mean, I))
    return BeamSetup(kl, L, q, I, e_mean, wref)


def _beam_inputs(cfg, variables, sources, setup: BeamSetup):
    """Append the KL germ variables and the stiffness/moment sources.

    The surrogate predicts the deflection divided by the constant-stiffness
    midspan value, which keeps the unknowns of order one.
    """
    kl_cfg = cfg["stochastic"]["kl"]
    prefix = kl_cfg.get("prefix", "z")
    r = setup.kl.r
    variables = variables + [dict(name=f"{prefix}{i + 1}", lower=-1.0, upper=1.0,
                                  family="hermite", kind="stochastic") for i in range(r)]
    modes = setup.kl.eigenfunctions * np.sqrt(setup.kl.eigenvalues) / setup.e_mean
    grid = setup.kl.grid

    def stiffness(X):
        out = np.ones(X.shape[0])
        for i in range(r):
            out = out + np.interp(X[:, 0], grid, modes[:, i]) * X[:, 1 + i]
        return out

    scale = 2.0 * setup.e_mean * setup.inertia * setup.wref

    def moment(X):
        return setup.load * X[:, 0] * (X[:, 0] - setup.length) / scale

    sources = dict(sources)
    sources[kl_cfg.get("field_source", "Ehat")] = stiffness
    sources["m"] = moment
    return variables, sources


def build_problem(cfg: dict, beam: BeamSetup | None = None) -> Problem:
    pb = cfg["problem"]
    variables = [dict(v) for v in pb["variables"]]
    sources = dict(pb.get("sources", {}))
    if cfg["experiment"] == "beam":
        variables, sources = _beam_inputs(cfg, variables, sources, beam or beam_setup(cfg))
    try:
        return Problem(variables, dict(pb.get("parameters", {})), sources, pb.get("pde"),
                       pb.get("ic"), pb.get("bc"), list(pb.get("inequalities", [])))
    except (ValueError, KeyError, TypeError) as exc:
        raise ExperimentError(f"problem block: {exc}") from None


def _stochastic_scaling(problem: Problem) -> DomainScaling:
    sc = problem.scaling
    n = problem.n_physical
    return DomainScaling(sc.bounds[n:], sc.families[n:])


def _param_values(problem: Problem, stoch_values=()) -> dict:
    names = problem.names[problem.n_physical:]
    out = dict(problem.parameters)
    out.update({k: float(v) for k, v in zip(names, stoch_values)})
    return out


def output_scale(cfg: dict, model: SurrogateModel | None = None) -> float:
    if model is not None and "output_scale" in model.metadata:
        return float(model.metadata["output_scale"])
    return float(cfg["problem"].get("output_scale", 1.0))


# -- reference solutions -----------------------------------------------------

def _time_var(problem: Problem):
    td = problem.time_dim
    if td is None:
        raise ExperimentError("this experiment needs a time variable")
    return problem.variables[td]


def _store_every(nt: int, frames: int) -> int:
    return nt // (frames - 1) if frames > 1 and nt % (frames - 1) == 0 else 1


def solve_deterministic(cfg: dict, problem: Problem, params: dict, t_final: float | None = None,
                        frames: int | None = None) -> GridSolution:
    """One reference solve for the given parameter values."""
    ref = cfg.get("reference", {})
    t_final = float(_time_var(problem).upper if t_final is None else t_final)
    exp = cfg["experiment"]
    if exp == "heat2d":
        nx, nt = int(ref.get("nx", 197)), int(ref.get("nt", 980))
        frames = frames or int(cfg.get("report", {}).get("time_grid", 50))
        return heat2d_solve(params["alpha"], nx, nt=nt, t_final=t_final,
                            store_every=_store_every(nt, frames))
    if exp == "burgers":
        nx, nt = int(ref.get("nx", 1001)), int(ref.get("nt", 1500))
        frames = frames or int(cfg.get("report", {}).get("time_grid", 101))
        return burgers_solve(params["nu"], nx, nt=nt, t_final=t_final,
                             store_every=_store_every(nt, frames))
    raise ExperimentError(f"no gridded reference solver for {exp!r}")


def reference_params(cfg: dict, problem: Problem) -> dict:
    """Everything that determines the reference; the cache key hashes this."""
    ref = cfg.get("reference", {})
    out = {"experiment": cfg["experiment"], "bounds": [list(b) for b in problem.scaling.bounds],
           "families": [f.value for f in problem.scaling.families],
           "parameters": dict(sorted(problem.parameters.items())), "reference": dict(sorted(ref.items()))}
    rep = cfg.get("report", {})
    if "time_grid" in rep:
        out["time_grid"] = rep["time_grid"]
    if problem.n_physical < len(problem.variables) or cfg["experiment"] == "beam":
        out["seed"] = seed_of(cfg)
        out["t_eval"] = rep.get("t_eval")
    if cfg["experiment"] == "beam":
        out["kl"] = dict(sorted(cfg["stochastic"]["kl"].items()))
    return out


def _mcs_grid(cfg, problem, threads):
    """Monte Carlo mean/std of the gridded solver output (stat axis first)."""
    ref = cfg.get("reference", {})
    n_mc = int(ref.get("mcs_samples", 500))
    stoch = _stochastic_scaling(problem)
    rep = cfg.get("report", {})
    tv = _time_var(problem)
    t_eval = rep.get("t_eval")
    t_final = float(tv.upper if t_eval is None else t_eval)
    frames = 2 if t_eval is not None else None
    template = []

    def solver(inp):
        sol = solve_deterministic(cfg, problem, _param_values(problem, inp), t_final, frames)
        if t_eval is not None:
            sol = GridSolution({**{k: v for k, v in sol.axes.items() if k != "t"}, "t": sol.axes["t"][-1:]},
                               sol.values[..., -1:], sol.metadata)
        if not template:
            template.append(sol)
        return sol.values

    res = mcs_moments(solver, lambda rng: draw_inputs(stoch, 1, rng)[0], n_mc, seed_of(cfg),
                      threads=threads)
    grid = template[0]
    shape = grid.values.shape
    vals = np.stack([res.mean.reshape(shape), res.std.reshape(shape)])
    axes = {"stat": np.array([0.0, 1.0]), **grid.axes}
    return GridSolution(axes, vals, {"n_mc": n_mc, "scheme": grid.metadata.get("scheme", "")})


def beam_mcs(cfg, setup: BeamSetup, threads=1) -> GridSolution:
    """Midspan (probe) deflection samples of the beam under the KL field."""
    ref = cfg.get("reference", {})
    n_mc = int(ref.get("mcs_samples", 10000))
    nx = int(ref.get("nx", 1001))
    probe = float(ref.get("probe", 0.5)) * setup.length
    from .randomfield import sample_field

    def solver(xi):
        x, w = beam_solve(BeamProblem(setup.length, setup.load, setup.inertia,
                                      lambda s: sample_field(setup.kl, xi, s)), nx)
        return np.interp(probe, x, w)

    res = mcs_moments(solver, lambda rng: rng.standard_normal(setup.kl.r), n_mc, seed_of(cfg),
                      probes=0, threads=threads)
    return GridSolution({"sample": np.arange(n_mc, dtype=float)}, res.samples[:, 0],
                        {"mean": float(res.mean[0]), "std": float(res.std[0]), "probe": probe})


def reference(cfg: dict, cache_dir=None, use_cache: bool = True, threads: int = 1):
    """``(GridSolution, cache key, cache hit)`` for the experiment's reference."""
    exp = cfg["experiment"]
    if exp == "eos":
        raise ExperimentError("the eos experiment uses its analytic truth; there is no reference solve")
    if exp == "beam":
        setup = beam_setup(cfg)
        problem = build_problem(cfg, setup)
        return cached_solve("beam/mcs", reference_params(cfg, problem),
                            lambda: beam_mcs(cfg, setup, threads), cache_dir, use_cache)
    problem = build_problem(cfg)
    params = reference_params(cfg, problem)
    if problem.n_physical < len(problem.variables):
        return cached_solve(f"{exp}/mcs", params, lambda: _mcs_grid(cfg, problem, threads),
                            cache_dir, use_cache)
    return cached_solve(f"{exp}/fd", params,
                        lambda: solve_deterministic(cfg, problem, _param_values(problem)),
                        cache_dir, use_cache)


def self_test(nx_heat: int = 257) -> Table:
    """Reference solvers against closed-form solutions; one row per check."""
    from .reference import cole_hopf_sine, heat2d_analytic_cos

    rows = []
    sol = heat2d_solve(0.01, nx_heat, nt=1000, ic=lambda X, Y: heat2d_analytic_cos(0.01, X, Y, 0.0),
                       store_every=1000)
    X, Y = np.meshgrid(sol.axes["x"], sol.axes["y"], indexing="ij")
    err = float(np.max(np.abs(sol.values[..., -1] - heat2d_analytic_cos(0.01, X, Y, 1.0))))
    rows.append(["heat2d cosine mode, alpha=0.01, t=1", nx_heat, err, 1e-4, err < 1e-4])
    for nu, tol in ((0.1, 1e-4), (0.01, 1e-3)):
        b = burgers_solve(nu, 1001, nt=1500, store_every=1500)
        e = float(np.max(np.abs(b.values[:, -1] - cole_hopf_sine(nu, b.axes["x"], 0.3, 200))))
        rows.append([f"burgers Cole-Hopf, nu={nu}, t=0.3", 1001, e, tol, e < tol])
    L, q, E, I = 10.0, -5000.0, 80e9, 1e-4
    x, w = beam_solve(BeamProblem(L, q, I, E), 1001)
    exact = uniform_midspan_deflection(q, L, E, I)
    e = abs(w[500] - exact) / abs(exact)
    rows.append(["beam constant E midspan (relative)", 1001, e, 1e-3, e < 1e-3])
    return Table(["check", "resolution", "error", "tolerance", "passed"], rows)


# -- training data -------------------------------------------------------------

def training_data(cfg: dict, problem: Problem, cache_dir=None, use_cache=True, beam=None):
    """Model evaluations used as training data (``None`` when not configured)."""
    d = cfg.get("data", {})
    seed = seed_of(cfg)
    exp = cfg["experiment"]
    if exp == "beam":
        n_ev = int(d.get("evaluations", 0))
        if not n_ev:
            return None
        setup = beam or beam_setup(cfg)
        from .randomfield import sample_field
        Z = sample_inputs(_stochastic_scaling(problem), n_ev, seed, "ED")
        m = int(d.get("points_per_evaluation", 10))
        nx = int(cfg.get("reference", {}).get("nx", 1001))
        blocks = []
        for j in range(n_ev):
            xg, w = beam_solve(BeamProblem(setup.length, setup.load, setup.inertia,
                                           lambda s, z=Z[j]: sample_field(setup.kl, z, s)), nx)
            xs = rng_for(seed, "ED-x", j).uniform(0.0, setup.length, m)
            X = np.column_stack([xs, np.repeat(Z[j][None], m, axis=0)])
            blocks.append((X, np.interp(xs, xg, w) / setup.wref))
        return TrainingData.from_evaluations(blocks)
    if problem.n_physical == len(problem.variables):
        n = int(d.get("points", 0))
        if not n:
            return None
        ref, _, _ = reference(cfg, cache_dir, use_cache)
        X = sample_inputs(problem.scaling, n, seed, "ED")
        return TrainingData(X, ref.interpolate(X, "cubic"))
    n_ev = int(d.get("evaluations", 0))
    if not n_ev:
        return None
    m = int(d.get("points_per_evaluation", 20))
    Z = sample_inputs(_stochastic_scaling(problem), n_ev, seed, "ED")
    phys = DomainScaling(problem.scaling.bounds[:problem.n_physical],
                         problem.scaling.families[:problem.n_physical])
    blocks = []
    for j in range(n_ev):
        sol = solve_deterministic(cfg, problem, _param_values(problem, Z[j]))
        P = sample_inputs(phys, m, seed, f"ED-x:{j}")
        blocks.append((np.column_stack([P, np.repeat(Z[j][None], m, axis=0)]), sol.interpolate(P, "cubic")))
    return TrainingData.from_evaluations(blocks)


# -- metrics -------------------------------------------------------------------

def evaluation_grid(cfg: dict, problem: Problem) -> tuple:
    """Tensor grid over the physical variables: ``(axes dict, points)``."""
    rep = cfg.get("report", {})
    n = int(rep.get("grid", 50))
    nt = int(rep.get("time_grid", n))
    axes = {}
    for v in problem.variables[:problem.n_physical]:
        axes[v.name] = np.linspace(v.lower, v.upper, nt if v.time else n)
    mesh = np.meshgrid(*axes.values(), indexing="ij")
    return axes, np.column_stack([m.ravel() for m in mesh])


def deterministic_metrics(cfg, problem, model, ref: GridSolution, out: Outcome):
    axes, G = evaluation_grid(cfg, problem)
    pred = model(G) * output_scale(cfg, model)
    truth = ref.interpolate(G)
    out.metrics["mse"] = float(np.mean((pred - truth) ** 2))
    out.metrics["max_abs_error"] = float(np.max(np.abs(pred - truth)))
    threshold = cfg.get("report", {}).get("mse_threshold")
    if threshold is not None:
        out.metrics["mse_below_threshold"] = bool(out.metrics["mse"] < threshold)
    tv = problem.time_dim
    t_eval = cfg.get("report", {}).get("t_eval")
    if tv is not None and t_eval is not None:
        t_axis = axes[problem.variables[tv].name]
        k = int(np.argmin(np.abs(t_axis - t_eval)))
        sel = np.isclose(G[:, tv], t_axis[k])
        names = list(axes)
        out.tables["field"] = Table(names + ["prediction", "reference"],
                                    [list(g) + [p, r] for g, p, r in zip(G[sel], pred[sel], truth[sel])])


def _loss_metrics(report, out: Outcome):
    L = report.losses
    out.metrics.update({"iterations": int(report.iterations), "status": report.status,
                        "converged": bool(report.converged), "n_coef": int(report.n_coef),
                        "L_T": L.L_T, "L_PDE": L.L_PDE, "L_IC": L.L_IC, "L_BC": L.L_BC,
                        "penalty": L.penalty_total, "objective": L.total, "modified_mse": L.modified_mse,
                        "inequality_violations": int(report.violations)})


def _history_table(report) -> Table:
    return Table(["k", "objective", "L_T", "L_PDE", "L_IC", "L_BC", "penalty", "grad_inf"],
                 [list(r) for r in report.history])


# -- pipelines ---------------------------------------------------------------------

def _finish_model(model: SurrogateModel, cfg: dict, cfg_hash: str, scale: float) -> SurrogateModel:
    meta = dict(model.metadata)
    meta.update({"experiment": cfg["experiment"], "name": cfg.get("name", ""), "config_sha256": cfg_hash})
    if scale != 1.0:
        meta["output_scale"] = scale
    return model.with_coefficients(model.coefficients, **meta)


def run_train(cfg: dict, cfg_hash: str, cache_dir=None, use_cache=True, threads=1) -> Outcome:
    if cfg["experiment"] == "eos":
        return run_eos(cfg, cfg_hash)
    out = Outcome()
    beam = beam_setup(cfg) if cfg["experiment"] == "beam" else None
    problem = build_problem(cfg, beam)
    cs = build_constraint_set(problem, seed_of(cfg))
    use_data = cfg.get("data", {}).get("full_training", True)
    data = training_data(cfg, problem, cache_dir, use_cache, beam) if use_data else None
    t0 = time.perf_counter()
    model, report = train(train_config(cfg), data, cs, problem.scaling, problem.names, problem.n_physical)
    out.timings["train_s"] = time.perf_counter() - t0
    scale = beam.wref if beam else output_scale(cfg)
    out.models["model"] = _finish_model(model, cfg, cfg_hash, scale)
    out.status = report.status if not report.converged else "converged"
    _loss_metrics(report, out)
    out.metrics["n_data_rows"] = int(data.n_rows) if data is not None else 0
    out.tables["history"] = _history_table(report)
    if problem.n_physical == len(problem.variables):
        t0 = time.perf_counter()
        ref, key, hit = reference(cfg, cache_dir, use_cache, threads)
        out.timings["reference_s"] = time.perf_counter() - t0
        out.metrics["reference_key"] = key
        deterministic_metrics(cfg, problem, out.models["model"], ref, out)
    return out


def run_sparse(cfg: dict, cfg_hash: str, cache_dir=None, use_cache=True, threads=1) -> Outcome:
    if cfg["experiment"] == "eos":
        raise ExperimentError("the eos study has its own baseline; use the train command")
    scfg = sparse_config(cfg)
    out = Outcome()
    beam = beam_setup(cfg) if cfg["experiment"] == "beam" else None
    problem = build_problem(cfg, beam)
    cs = build_constraint_set(problem, seed_of(cfg))
    t0 = time.perf_counter()
    data = training_data(cfg, problem, cache_dir, use_cache, beam)
    out.timings["data_s"] = time.perf_counter() - t0
    if data is None:
        raise ExperimentError("sparse training needs model evaluations: set [data] points or evaluations")
    t0 = time.perf_counter()
    tcfg = train_config(cfg)
    if "degree" in cfg["sparse"]:
        tcfg = dataclasses.replace(tcfg, degree=int(cfg["sparse"]["degree"]))
    model, rep = sparse_pc2_train(tcfg, data, cs, problem.scaling, scfg,
                                  problem.names, problem.n_physical)
    out.timings["train_s"] = time.perf_counter() - t0
    scale = beam.wref if beam else output_scale(cfg)
    out.models["model"] = _finish_model(model, cfg, cfg_hash, scale)
    tr = rep.train_report
    out.status = "converged" if tr.converged else tr.status
    _loss_metrics(tr, out)
    out.metrics.update({"selected_terms": int(rep.selected), "candidate_terms": len(rep.order),
                        "above_threshold": bool(rep.above_threshold), "n_data_rows": int(data.n_rows)})
    out.tables["sparse_losses"] = Table(["k", "L_T", "L_PDE", "L_IC", "L_BC", "total"],
                                        [list(r) for r in rep.rows])
    if problem.n_physical == len(problem.variables):
        ref, key, _ = reference(cfg, cache_dir, use_cache, threads)
        out.metrics["reference_key"] = key
        deterministic_metrics(cfg, problem, out.models["model"], ref, out)
    return out


def _probe_points(cfg, problem) -> np.ndarray:
    probes = cfg.get("report", {}).get("probes")
    if probes:
        P = np.array(probes, dtype=np.float64)
        if P.ndim != 2 or P.shape[1] != problem.n_physical:
            raise ExperimentError(f"report.probes must be points with {problem.n_physical} coordinates")
        return P
    return np.array([[0.5 * (v.lower + v.upper) for v in problem.variables[:problem.n_physical]]])


def run_uq(cfg: dict, cfg_hash: str, model: SurrogateModel, cache_dir=None, use_cache=True,
           threads=1) -> Outcome:
    """Moments, PDFs and Sobol indices of a stochastic surrogate vs Monte Carlo."""
    out = Outcome()
    beam = beam_setup(cfg) if cfg["experiment"] == "beam" else None
    problem = build_problem(cfg, beam)
    if model.n_physical >= model.dims:
        raise ExperimentError("uq needs a model with stochastic inputs")
    if list(model.variables) != problem.names:
        raise ExperimentError("model variables do not match the config")
    scale = output_scale(cfg, model)
    red = Reducer(model)
    rep = cfg.get("report", {})
    seed = seed_of(cfg)
    t0 = time.perf_counter()
    ref, key, hit = reference(cfg, cache_dir, use_cache, threads)
    out.timings["reference_s"] = time.perf_counter() - t0
    out.metrics["reference_key"] = key
    t0 = time.perf_counter()
    n_pdf = int(rep.get("pdf_samples", 100_000))
    if cfg["experiment"] == "beam":
        P = np.array([[ref.metadata["probe"]]])
        mu, var = red.moments(P)
        mean, std = float(mu[0]) * scale, math.sqrt(max(float(var[0]), 0.0)) * scale
        mc_mean, mc_std = float(ref.metadata["mean"]), float(ref.metadata["std"])
        sur = sample_reduced(model, P[0], n_pdf, seed) * scale
        out.metrics.update({
            "probe": float(P[0, 0]), "mean": mean, "std": std, "mcs_mean": mc_mean, "mcs_std": mc_std,
            "mean_rel_error": (mean - mc_mean) / abs(mc_mean), "std_rel_error": (std - mc_std) / mc_std,
            "ks_statistic": float(ks_2samp(sur, ref.values).statistic),
            "mcs_samples": int(ref.values.size),
        })
        probes = P
    else:
        grid = GridSolution({k: v for k, v in ref.axes.items() if k != "stat"}, ref.values[0])
        G = grid.points()
        mu, var = red.moments(G)
        m = mu * scale
        s = np.sqrt(np.maximum(var, 0.0)) * scale
        mc_m, mc_s = ref.values[0].ravel(), ref.values[1].ravel()
        out.metrics.update({"mae_mean": float(np.mean(np.abs(m - mc_m))),
                            "mae_std": float(np.mean(np.abs(s - mc_s))),
                            "max_mcs_std": float(mc_s.max()), "mcs_samples": int(ref.metadata["n_mc"])})
        out.tables["moments"] = Table(grid.names + ["mean", "std", "mcs_mean", "mcs_std"],
                                      [list(g) + [a, b, c, d] for g, a, b, c, d in zip(G, m, s, mc_m, mc_s)])
        probes = _probe_points(cfg, problem)
    pdf_rows, sobol_rows = [], []
    stoch_names = problem.names[problem.n_physical:]
    for j, p in enumerate(probes):
        est = pdf_estimate(model, p, n_pdf, seed)
        for g, dens in zip(est.grid, est.density):
            pdf_rows.append([j] + list(p) + [g * scale, dens / scale])
        try:
            first, total = red.sobol(p)
        except ZeroVariance:
            first = total = np.full(len(stoch_names), float("nan"))
        for name, a, b in zip(stoch_names, first, total):
            sobol_rows.append([j] + list(p) + [name, a, b])
    phys = problem.names[:problem.n_physical]
    out.tables["pdf"] = Table(["probe"] + phys + ["value", "density"], pdf_rows)
    out.tables["sobol"] = Table(["probe"] + phys + ["dimension", "S_first", "S_total"], sobol_rows)
    out.timings["postprocess_s"] = time.perf_counter() - t0
    return out


# -- inequality-constrained equation-of-state study ------------------------------

def _eos_problem(cfg):
    vars_ = cfg["problem"]["variables"]
    if len(vars_) != 2:
        raise ExperimentError("the eos study expects two input variables")
    return build_problem(cfg)


def _baseline_sparse(A, y, rng, holdout: int):
    """Sparse PCE: LAR ranking on part of the data, size chosen on held-out points, OLS refit."""
    perm = rng.permutation(len(y))
    ho, fit = perm[:holdout], perm[holdout:]
    order = lar_path(DesignSystem(A[fit], y[fit])).basis_order()
    best = None
    for k in range(1, min(len(order), len(fit)) + 1):
        cols = sorted(order[:k])
        try:
            c = ols_solve(DesignSystem(A[fit][:, cols], y[fit]))
        except RankDeficient:
            continue
        err = float(np.mean((A[ho][:, cols] @ c - y[ho]) ** 2))
        if best is None or err < best[0]:
            best = (err, cols)
    cols = best[1]
    return cols, ols_solve(DesignSystem(A[:, cols], y))


def run_eos(cfg: dict, cfg_hash: str) -> Outcome:
    import warnings

    from .sparse import DegenerateColumns

    out = Outcome()
    problem = _eos_problem(cfg)
    e = cfg["eos"]
    seed = seed_of(cfg)
    sc = problem.scaling
    names = problem.names
    n_points, n_train = int(e.get("n_points", 96)), int(e.get("n_train", 8))
    splits, holdout = int(e.get("splits", 100)), int(e.get("holdout", 2))
    D = sample_inputs(sc, n_points, seed, "ED")
    idx = total_degree_index_set(sc.dims, int(cfg["basis"]["degree"]))
    A = build_design_matrix(idx, sc, D)
    n = int(e.get("test_grid", 100))
    g = [np.linspace(v.lower, v.upper, n) for v in problem.variables]
    G = np.column_stack([m.ravel() for m in np.meshgrid(*g, indexing="ij")])
    parser = problem.parser()
    tcfg = train_config(cfg)
    rows = []
    t0 = time.perf_counter()
    summary = {}
    for target in e["targets"]:
        from .constraints import parse_source
        truth = parse_source(target["truth"], names, problem.parameters)
        y = truth(D)
        check = parser.parse(target["constraint"])
        margin = float(target.get("margin", 0.0))
        residual = f"(- {target['constraint']} {margin!r})" if margin else target["constraint"]
        viol_b = viol_p = 0
        err_b, err_p = [], []
        for s in range(splits):
            rng = rng_for(seed, "split", s)
            perm = rng.permutation(n_points)
            tr, va = perm[:n_train], perm[n_train:]
            yv = y[va]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateColumns)
                cols, cb = _baseline_sparse(A[tr], y[tr], rng, holdout)
            mb = SurrogateModel(sc, idx.subset(cols), cb, tuple(names), sc.dims)
            vb = int(np.sum(CompiledResidual(check, mb.indices, sc, G).values(cb) < 0))
            eb = float(np.linalg.norm(mb(D[va]) - yv) / np.linalg.norm(yv))
            prob_s = Problem(problem.variables, problem.parameters, {}, inequalities=[dict(
                residual=residual, points=int(target.get("points", 1000)),
                boundary_points=int(target.get("boundary_points", 200)),
                penalty=float(target.get("penalty", 1.0)), label=f"{target['name']} constraint")])
            cs = build_constraint_set(prob_s, seed * 100003 + s)
            mp, rp = train(tcfg, TrainingData(D[tr], y[tr]), cs, sc, names, sc.dims, indices=idx)
            vp = int(np.sum(CompiledResidual(check, idx, sc, G).values(mp.coefficients) < 0))
            ep = float(np.linalg.norm(mp(D[va]) - yv) / np.linalg.norm(yv))
            viol_b += vb > 0
            viol_p += vp > 0
            err_b.append(eb)
            err_p.append(ep)
            rows.append([target["name"], s, len(cols), vb, eb, vp, ep, rp.status])
            if s == 0:
                out.models[f"model_{target['name']}"] = _finish_model(mp, cfg, cfg_hash, 1.0)
        summary[target["name"]] = {
            "baseline_violating_fraction": viol_b / splits,
            "pc2_violating_splits": int(viol_p),
            "baseline_median_error": float(np.median(err_b)),
            "pc2_median_error": float(np.median(err_p)),
        }
    out.timings["study_s"] = time.perf_counter() - t0
    out.metrics["splits"] = splits
    out.metrics["targets"] = summary
    out.tables["splits"] = Table(["target", "split", "baseline_terms", "baseline_violations",
                                  "baseline_error", "pc2_violations", "pc2_error", "pc2_status"], rows)
    return out
