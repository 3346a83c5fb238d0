import numpy as np
import pytest

from pc2.reference import (BeamProblem, GridSolution, MCSError, NonPositiveStiffness, beam_solve,
                           burgers_solve, cache_key, cached_solve, cole_hopf_sine, heat2d_analytic_cos,
                           heat2d_solve, mcs_moments, uniform_midspan_deflection)
from pc2.reference.heat import default_ic


def test_heat_cosine_mode_matches_closed_form():
    sol = heat2d_solve(0.01, 257, nt=1000, ic=lambda X, Y: heat2d_analytic_cos(0.01, X, Y, 0.0),
                       store_every=1000)
    X, Y = np.meshgrid(sol.axes["x"], sol.axes["y"], indexing="ij")
    assert np.max(np.abs(sol.values[..., -1] - heat2d_analytic_cos(0.01, X, Y, 1.0))) < 1e-4


def test_heat_eig_and_lu_agree():
    a = heat2d_solve(0.01, 33, nt=50, store_every=10)
    b = heat2d_solve(0.01, 33, nt=50, store_every=10, method="lu")
    assert a.names == ["x", "y", "t"] and a.values.shape == (33, 33, 6)
    assert np.max(np.abs(a.values - b.values)) < 1e-11


def test_heat_conserves_mean_with_insulated_walls():
    sol = heat2d_solve(0.05, 65, nt=200, store_every=200)
    from pc2.randomfield import trapezoid_weights
    w = trapezoid_weights(65, 1.0)
    means = np.einsum("i,j,ijk->k", w, w, sol.values)
    assert np.allclose(means, means[0], atol=1e-12)


def test_heat_default_ic():
    x = np.array([0.125])
    assert default_ic(x, x)[0] == pytest.approx(0.5 * (np.sin(np.pi / 2) * 2))


@pytest.mark.parametrize("nu,tol", [(0.1, 1e-4), (0.01, 1e-3)])
def test_burgers_matches_cole_hopf(nu, tol):
    b = burgers_solve(nu, 1001, nt=1500, store_every=1500)
    assert b.values.shape == (1001, 2)
    assert np.max(np.abs(b.values[:, -1] - cole_hopf_sine(nu, b.axes["x"], 0.3, 200))) < tol


def test_burgers_converges_under_refinement():
    exact = lambda s: cole_hopf_sine(0.05, s.axes["x"], 0.3, 200)
    e1 = np.max(np.abs(burgers_solve(0.05, 101, 150, store_every=150).values[:, -1] - exact(
        burgers_solve(0.05, 101, 150, store_every=150))))
    fine = burgers_solve(0.05, 201, 300, store_every=300)
    e2 = np.max(np.abs(fine.values[:, -1] - exact(fine)))
    assert 3.0 < e1 / e2 < 5.0  # second order


def test_cole_hopf_initial_condition():
    x = np.linspace(0, 1, 11)
    assert np.allclose(cole_hopf_sine(0.1, x, 0.0, 200), np.sin(np.pi * x), atol=1e-10)


def test_beam_constant_stiffness_midspan():
    L, q, E, I = 10.0, -5000.0, 8e10, 1e-4
    x, w = beam_solve(BeamProblem(L, q, I, E), 1001)
    exact = uniform_midspan_deflection(q, L, E, I)
    assert exact == pytest.approx(-0.08138, rel=1e-3)
    assert abs(w[500] - exact) / abs(exact) < 1e-3
    assert w[0] == 0 and abs(w[-1]) < 1e-15


def test_beam_closed_form_profile():
    L, q, E, I = 2.0, 3.0, 5.0, 0.5
    x, w = beam_solve(BeamProblem(L, q, I, lambda s: np.full_like(s, E)), 2001)
    exact = q * x * (L ** 3 - 2 * L * x ** 2 + x ** 3) / (24 * E * I)
    assert np.max(np.abs(w - exact)) / np.max(np.abs(exact)) < 1e-5


def test_beam_rejects_nonpositive_stiffness():
    with pytest.raises(NonPositiveStiffness):
        beam_solve(BeamProblem(1.0, 1.0, 1.0, lambda x: 1 - 2 * x), 11)
    with pytest.raises(ValueError):
        BeamProblem(-1.0, 1.0, 1.0, 1.0)


def quad_solver(z):
    return np.array([z, z ** 2, np.sin(z)])


def test_mcs_threads_match_serial():
    sampler = lambda rng: rng.normal()
    a = mcs_moments(quad_solver, sampler, 2500, seed=3, probes=[0, 2], threads=1)
    b = mcs_moments(quad_solver, sampler, 2500, seed=3, probes=[0, 2], threads=4)
    assert np.allclose(a.mean, b.mean, rtol=0, atol=1e-15) and np.allclose(a.std, b.std, rtol=0, atol=1e-15)
    assert np.array_equal(a.samples, b.samples) and a.samples.shape == (2500, 2)


def test_mcs_moments_match_numpy():
    sampler = lambda rng: rng.normal()
    r = mcs_moments(quad_solver, sampler, 3000, seed=4, probes=0)
    s = r.samples[:, 0]
    outs = np.array([quad_solver(z) for z in s])
    assert np.allclose(r.mean, outs.mean(axis=0), atol=1e-13)
    assert np.allclose(r.std, outs.std(axis=0, ddof=1), atol=1e-13)


def test_mcs_reports_failing_sample():
    def solver(z):
        if z > 2.5:
            raise FloatingPointError("boom")
        return np.array([z])
    with pytest.raises(MCSError) as info:
        mcs_moments(solver, lambda rng: rng.normal(), 5000, seed=0)
    assert info.value.index >= 0
    with pytest.raises(ValueError):
        mcs_moments(solver, lambda rng: 0.0, 1)


def test_cache_hit_and_key(tmp_path):
    calls = []

    def compute():
        calls.append(1)
        return GridSolution({"x": [0.0, 1.0]}, [1.0, 2.0], {"nx": 2})

    s1, k1, hit1 = cached_solve("demo", {"nx": 2}, compute, tmp_path)
    s2, k2, hit2 = cached_solve("demo", {"nx": 2}, compute, tmp_path)
    assert (hit1, hit2) == (False, True) and k1 == k2 and len(calls) == 1
    assert np.array_equal(s1.values, s2.values) and s2.metadata == {"nx": 2}
    assert cache_key("demo", {"nx": 3}) != k1
    assert cache_key("other", {"nx": 2}) != k1
    cached_solve("demo", {"nx": 2}, compute, tmp_path, use_cache=False)
    assert len(calls) == 2


def test_grid_solution_validation_and_interpolation(tmp_path):
    g = GridSolution({"x": [0, 1, 2], "t": [0, 1]}, [[0, 1], [2, 3], [4, 5]])
    assert g.interpolate([[0.5, 0.5]])[0] == pytest.approx(1.5)
    with pytest.raises(ValueError):
        GridSolution({"x": [0, 1]}, [1.0, np.nan])
    lines = g.write_csv(tmp_path / "g.csv", ["k: v"]).read_text().splitlines()
    assert lines[:2] == ["# k: v", "x,t,value"] and len(lines) == 8
