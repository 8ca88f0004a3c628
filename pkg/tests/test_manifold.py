import numpy as np
import pytest

from cfisac.crlb import CrlbModel, phasor_from_ts
from cfisac.manifold import (ManifoldSolverConfig, manifold_inner,
                             project_tangent, recover_ts, retract,
                             riemannian_cg_maximize, ts_phase_residual,
                             worst_case_ts)
from cfisac.scenario import ScenarioConfig, build_scenario
from cfisac.channel import uniform_layout
from cfisac.metrics import mrt_beams

from conftest import desk_config, desk_instance, random_beams


def test_project_tangent_basics():
    ones = np.ones(4, dtype=complex)
    assert np.allclose(project_tangent(ones, 1j * ones), 1j * ones)
    assert np.allclose(project_tangent(ones, ones), 0.0)

    rng = np.random.default_rng(0)
    theta = np.exp(1j * rng.uniform(-np.pi, np.pi, 32))
    g = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    t = project_tangent(theta, g)
    assert np.max(np.abs(np.real(t * np.conj(theta)))) < 1e-12
    twice = project_tangent(theta, t)
    assert np.max(np.abs(twice - t)) < 1e-12


def test_retract_properties():
    rng = np.random.default_rng(1)
    theta = np.exp(1j * rng.uniform(-np.pi, np.pi, 16))
    d = project_tangent(theta, rng.standard_normal(16)
                        + 1j * rng.standard_normal(16))
    assert np.allclose(retract(theta, d, 0.0), theta)
    out = retract(theta, d, 0.3)
    assert np.max(np.abs(np.abs(out) - 1.0)) < 1e-14

    # first-order motion along +j at theta = 1 increases the phase
    t = 1e-6
    moved = retract(np.ones(1, dtype=complex), np.array([1j]), t)
    assert np.angle(moved[0]) == pytest.approx(t, rel=1e-6)

    # a step that would annihilate an entry is caught by halving
    theta0 = np.ones(2, dtype=complex)
    out = retract(theta0, np.array([-1.0 + 0j, 0j]), 1.0)
    assert np.all(np.abs(out) == 1.0)


def test_cg_on_circle_closed_form():
    # maximize Re(theta) over the unit circle: maximizer is theta = 1
    fun = lambda th: float(np.real(th).sum())
    grad = lambda th: np.ones_like(th)
    theta0 = np.array([np.exp(1j * 2.5)])
    res = riemannian_cg_maximize(fun, grad, theta0,
                                 ManifoldSolverConfig(grad_tol=1e-10))
    assert abs(res.phasor[0] - 1.0) < 1e-8
    assert res.trace == sorted(res.trace)

    # already stationary: returns immediately
    res = riemannian_cg_maximize(fun, grad, np.array([1.0 + 0j]))
    assert res.status == "grad_tol"
    assert len(res.trace) == 1


def test_cg_on_crlb_instances():
    for seed in range(3):
        sc, layout, beams = desk_instance(seed=seed)
        model = CrlbModel(sc, layout, beams)
        ts0 = np.full((2, 1), np.mean(sc.config.ts_bounds))
        theta0 = phasor_from_ts(ts0, sc.freq_grid)
        seen = []

        def fun(th, model=model, seen=seen):
            seen.append(np.max(np.abs(np.abs(th) - 1.0)))
            return model.total(th)

        cfg = ManifoldSolverConfig(max_cg_iters=200, grad_tol=1e-5)
        res = riemannian_cg_maximize(fun, model.grad, theta0, cfg)
        diffs = np.diff(res.trace)
        assert np.all(diffs >= 0)
        assert max(seen) < 1e-12  # every evaluated iterate on the manifold
        assert res.grad_norm < 1e-5 or res.status in ("stalled", "max_iters")


def test_cg_trace_csv(tmp_path):
    sc, layout, beams = desk_instance(seed=2)
    model = CrlbModel(sc, layout, beams)
    theta0 = phasor_from_ts(np.full((2, 1), 0.5e-9), sc.freq_grid)
    path = tmp_path / "trace.csv"
    riemannian_cg_maximize(model.total, model.grad, theta0,
                           ManifoldSolverConfig(max_cg_iters=20),
                           trace_csv=path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "iteration,objective,grad_norm,step"
    assert len(lines) > 1


def test_recover_ts_consistency_and_clipping():
    cfg = desk_config(seed=1)
    sc = build_scenario(cfg)
    freq = sc.freq_grid
    lo, hi = cfg.ts_bounds

    ts0 = np.array([[0.47e-9], [0.55e-9]])
    rec = recover_ts(phasor_from_ts(ts0, freq), freq, (lo, hi))
    assert np.max(np.abs(rec - ts0)) < 1e-12 * 1e-9 + 1e-21

    # unconstrained minimizer just below the interval clips to the lower
    # bound exactly (far enough below, a 2*pi wrap branch inside the box
    # fits better, which is the intended reading of the phase objective)
    below = np.array([[0.38e-9], [0.39e-9]])
    rec = recover_ts(phasor_from_ts(below, freq), freq, (lo, hi))
    assert np.all(rec == lo)


def test_recover_ts_beats_grid():
    rng = np.random.default_rng(9)
    cfg = desk_config(seed=1)
    sc = build_scenario(cfg)
    freq = sc.freq_grid
    lo, hi = cfg.ts_bounds
    grid = np.linspace(lo, hi, 10_000)
    resolution = grid[1] - grid[0]
    for _ in range(25):
        theta = np.exp(1j * rng.uniform(-np.pi, np.pi,
                                        (2, 1, cfg.num_freq_samples)))
        rec = recover_ts(theta, freq, (lo, hi))
        for a in range(2):
            grid_best = min(ts_phase_residual(theta[a, 0], freq, t)
                            for t in grid)
            ours = ts_phase_residual(theta[a, 0], freq, rec[a, 0])
            assert ours <= grid_best + resolution


def test_worst_case_collapsed_bounds():
    cfg = desk_config(seed=4, num_freq_samples=1, freq_grid=[3.5e9],
                      ts_bounds=(0.5e-9, 0.5e-9))
    sc = build_scenario(cfg)
    layout = uniform_layout(cfg)
    beams = mrt_beams(sc, layout)
    model = CrlbModel(sc, layout, beams)
    res = worst_case_ts(sc, layout, beams, model=model)
    forced = model.total(phasor_from_ts(np.full((2, 1), 0.5e-9),
                                        sc.freq_grid))
    assert res.worst_crlb == pytest.approx(forced, rel=1e-12)
    assert np.all(res.ts_errors == 0.5e-9)


def test_worst_case_dominates_random_feasible_points():
    rng = np.random.default_rng(5)
    for seed in range(4):
        sc, layout, _ = desk_instance(seed=seed)
        beams = random_beams(sc, rng)
        model = CrlbModel(sc, layout, beams)
        res = worst_case_ts(sc, layout, beams, model=model)
        lo, hi = sc.config.ts_bounds
        for _ in range(10):
            ts = rng.uniform(lo, hi, (2, 1))
            val = model.total(phasor_from_ts(ts, sc.freq_grid))
            assert res.worst_crlb >= val - 1e-9 * abs(val)
        diffs = np.diff(res.trace)
        assert np.all(diffs >= -1e-15)
        assert np.all(res.ts_errors >= lo) and np.all(res.ts_errors <= hi)


def test_worst_case_warm_start_ts0():
    sc, layout, beams = desk_instance(seed=7)
    model = CrlbModel(sc, layout, beams)
    lo, hi = sc.config.ts_bounds
    cold = worst_case_ts(sc, layout, beams, model=model)
    warm = worst_case_ts(sc, layout, beams, model=model,
                         ts0=cold.ts_errors)
    assert warm.worst_crlb >= cold.worst_crlb - 1e-9 * cold.worst_crlb


def test_solver_config_validation():
    with pytest.raises(ValueError):
        ManifoldSolverConfig(armijo_c1=1.5)
    with pytest.raises(ValueError):
        ManifoldSolverConfig(armijo_shrink=0.0)
    with pytest.raises(ValueError):
        ManifoldSolverConfig(grad_tol=-1.0)


def test_inner_product_metric():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    assert manifold_inner(x, x) == pytest.approx(float(np.sum(np.abs(x) ** 2)))
