"""Worst-case TS-error search on the unit-modulus phasor manifold.

The feasible TS phasors form a product of unit circles. A Riemannian
conjugate-gradient ascent (Polak-Ribiere+ directions, Armijo backtracking,
normalization retraction) maximizes the total CRLB trace over that
manifold; a per-pair box-constrained least-squares fit recovers physical TS
errors from the relaxed phasor; an outer loop alternates the two and a
final projected ascent over the TS box polishes the feasible point whose
objective is reported.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .crlb import CrlbModel, phasor_from_ts
from .channel import MaLayout
from .scenario import Scenario

log = logging.getLogger(__name__)


@dataclass
class ManifoldSolverConfig:
    max_outer: int = 20
    max_cg_iters: int = 500
    grad_tol: float = 1e-6
    armijo_c1: float = 1e-4
    armijo_shrink: float = 0.5
    armijo_init_step: float = 1.0
    armijo_max_backtracks: int = 50
    outer_tol: float = 1e-6
    scan_points: int = 160
    scan_sweeps: int = 2
    scan_starts: int = 4
    polish_iters: int = 40

    def __post_init__(self):
        if not 0.0 < self.armijo_c1 < 1.0:
            raise ValueError("armijo_c1 must be in (0, 1)")
        if not 0.0 < self.armijo_shrink < 1.0:
            raise ValueError("armijo_shrink must be in (0, 1)")
        for name in ("grad_tol", "outer_tol", "armijo_init_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def manifold_inner(x: np.ndarray, y: np.ndarray) -> float:
    """Canonical real inner product sum Re(x * conj(y))."""
    return float(np.sum(np.real(x * np.conj(y))))


def project_tangent(phasor: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Project `vec` onto the tangent space of the circle product at `phasor`."""
    return vec - np.real(vec * np.conj(phasor)) * phasor


def retract(phasor: np.ndarray, direction: np.ndarray, step: float) -> np.ndarray:
    """Entrywise renormalization retraction; halves a degenerate step."""
    for _ in range(64):
        moved = phasor + step * direction
        mags = np.abs(moved)
        if np.all(mags > 0):
            return moved / mags
        step *= 0.5
    raise ArithmeticError("retraction degenerate even after step halving")


@dataclass
class CgResult:
    phasor: np.ndarray
    trace: list = field(default_factory=list)
    grad_norm: float = np.inf
    status: str = "max_iters"


def riemannian_cg_maximize(fun, grad, phasor0: np.ndarray,
                           cfg: ManifoldSolverConfig | None = None,
                           trace_csv=None) -> CgResult:
    """Maximize `fun` over the unit-modulus manifold starting at `phasor0`.

    `fun` maps a phasor array to a scalar and `grad` returns its Euclidean
    gradient (dL/dRe + j*dL/dIm per entry). The objective trace over
    accepted iterates is non-decreasing by construction of the Armijo test.
    """
    cfg = cfg or ManifoldSolverConfig()
    theta = np.asarray(phasor0, dtype=complex)
    theta = theta / np.abs(theta)
    value = fun(theta)
    rgrad = project_tangent(theta, grad(theta))
    direction = rgrad
    trace = [value]
    rows = []
    fails = 0
    status = "max_iters"
    gnorm = float(np.sqrt(manifold_inner(rgrad, rgrad)))

    for it in range(cfg.max_cg_iters):
        if gnorm < cfg.grad_tol:
            status = "grad_tol"
            break
        slope = manifold_inner(rgrad, direction)
        if slope <= 0:
            direction = rgrad  # Polak-Ribiere reset to steepest ascent
            slope = gnorm * gnorm
        step = cfg.armijo_init_step
        accepted = False
        for _ in range(cfg.armijo_max_backtracks):
            cand = retract(theta, direction, step)
            cand_value = fun(cand)
            if np.isfinite(cand_value) and \
                    cand_value >= value + cfg.armijo_c1 * step * slope:
                accepted = True
                break
            step *= cfg.armijo_shrink
        if not accepted:
            fails += 1
            if fails >= 2:
                status = "stalled"
                break
            direction = rgrad  # restart from steepest ascent, then retry
            continue
        fails = 0

        prev_rgrad, prev_direction = rgrad, direction
        theta, value = cand, cand_value
        rgrad = project_tangent(theta, grad(theta))
        transported = project_tangent(theta, prev_rgrad)
        denom = manifold_inner(prev_rgrad, prev_rgrad)
        beta = 0.0
        if denom > 0:
            beta = max(0.0, manifold_inner(rgrad, rgrad - transported) / denom)
        direction = rgrad + beta * project_tangent(theta, prev_direction)
        if manifold_inner(direction, rgrad) <= 0:
            direction = rgrad
        gnorm = float(np.sqrt(manifold_inner(rgrad, rgrad)))
        trace.append(value)
        rows.append((it, value, gnorm, step))

    if trace_csv is not None:
        with open(trace_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "objective", "grad_norm", "step"])
            writer.writerows(rows)
    return CgResult(phasor=theta, trace=trace, grad_norm=gnorm, status=status)


def ts_phase_residual(phasor_block: np.ndarray, freq_grid: np.ndarray,
                      ts: float) -> float:
    """Wrapped-angle least-squares misfit of one (a, b) phasor block at `ts`."""
    resid = np.angle(phasor_block) + 2.0 * np.pi * np.asarray(freq_grid) * ts
    resid = np.angle(np.exp(1j * resid))  # wrap to (-pi, pi]
    return float(np.sum(resid ** 2))


def _refine_quadratic(angles: np.ndarray, freq: np.ndarray, ts: float,
                      lo: float, hi: float) -> float:
    """Exact minimizer of the locally unwrapped quadratic fit, clipped."""
    sum_f2 = np.sum(freq ** 2)
    if sum_f2 == 0:
        return ts
    for _ in range(3):
        resid = np.angle(np.exp(1j * (angles + 2.0 * np.pi * freq * ts)))
        step = -np.sum(freq * resid) / (2.0 * np.pi * sum_f2)
        new_ts = float(np.clip(ts + step, lo, hi))
        if abs(new_ts - ts) < 1e-18:
            return new_ts
        ts = new_ts
    return ts


def _recover_single(block: np.ndarray, freq: np.ndarray,
                    lo: float, hi: float) -> float:
    angles = np.angle(block)
    if hi <= lo:
        return lo
    # The wrapped residual is piecewise quadratic in ts with pieces no
    # narrower than 1/(2 f_max); a scan finer than that locates the global
    # basin and the clipped quadratic step finishes it in closed form.
    wraps = (hi - lo) * np.sum(freq)
    n = int(min(8192, max(128, 16 * wraps)))
    grid = np.linspace(lo, hi, n)
    resid = np.angle(np.exp(1j * (angles[:, None]
                                  + 2.0 * np.pi * freq[:, None] * grid[None, :])))
    misfit = np.sum(resid ** 2, axis=0)
    best_ts, best_res = lo, np.inf
    for idx in np.argsort(misfit)[:3]:
        ts = _refine_quadratic(angles, freq, float(grid[idx]), lo, hi)
        res = ts_phase_residual(block, freq, ts)
        if res < best_res:
            best_ts, best_res = ts, res
    return best_ts


def recover_ts(phasor: np.ndarray, freq_grid: np.ndarray,
               bounds: tuple[float, float]) -> np.ndarray:
    """Physical TS errors that best explain a relaxed phasor, per (a, b).

    Solves the box-constrained quadratic phase fit in closed form (clipped
    unconstrained minimizer) over the unwrap branches of each block.
    """
    theta = np.asarray(phasor)
    freq = np.asarray(freq_grid, dtype=float)
    lo, hi = bounds
    A, B = theta.shape[0], theta.shape[1]
    out = np.empty((A, B))
    for a in range(A):
        for b in range(B):
            out[a, b] = _recover_single(theta[a, b], freq, lo, hi)
    return out


@dataclass
class WorstCaseResult:
    phasor: np.ndarray         # relaxed manifold maximizer
    ts_errors: np.ndarray      # feasible worst-case TS errors (A, B)
    worst_crlb: float          # total objective at the feasible point
    trace: list                # best-so-far feasible objective per round
    per_receiver: np.ndarray | None = None  # (B,) traces at the worst point
    cg_status: str = ""


def _receiver_value(model: CrlbModel, b: int, ts_col: np.ndarray,
                    freq: np.ndarray) -> float:
    theta_b = np.exp(-2j * np.pi * freq[None, :] * ts_col[:, None])
    return model.receiver_trace(b, theta_b)


def _scan_receiver(model: CrlbModel, b: int, freq: np.ndarray,
                   lo: float, hi: float, cfg: ManifoldSolverConfig,
                   seeds: list[np.ndarray]) -> tuple[np.ndarray, float]:
    """Cyclic dense coordinate maximization of one receiver's CRLB trace.

    The per-receiver objective is smooth but multimodal in the TS column;
    a dense 1-D scan per coordinate is reliable because each coordinate
    only enters through phases 2*pi*f*ts.
    """
    A = model.shape[0]
    grid = np.linspace(lo, hi, cfg.scan_points) if hi > lo else np.array([lo])
    best_ts, best_val = None, -np.inf
    for start in seeds:
        ts = np.clip(np.asarray(start, dtype=float).copy(), lo, hi)
        val = _receiver_value(model, b, ts, freq)
        for _ in range(cfg.scan_sweeps):
            for a in range(A):
                trial = ts.copy()
                for cand in grid:
                    trial[a] = cand
                    v = _receiver_value(model, b, trial, freq)
                    if v > val:
                        val = v
                        ts = trial.copy()
        if val > best_val:
            best_ts, best_val = ts, val
    return best_ts, best_val


def _gradient_polish(model: CrlbModel, ts: np.ndarray, freq: np.ndarray,
                     lo: float, hi: float, iters: int):
    """Projected gradient ascent to finish off the scanned feasible point."""
    ts = np.clip(np.asarray(ts, dtype=float), lo, hi)
    value, g = model.grad_ts(ts, freq)
    if not np.isfinite(value):
        return ts, -np.inf
    width = hi - lo
    for _ in range(iters):
        gmax = np.max(np.abs(g))
        if gmax == 0 or width == 0:
            break
        step = 0.05 * width / gmax
        improved = False
        for _ in range(25):
            cand = np.clip(ts + step * g, lo, hi)
            cand_value = model.total(phasor_from_ts(cand, freq))
            if np.isfinite(cand_value) and cand_value > value + 0.0:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        ts = cand
        value, g = model.grad_ts(ts, freq)
    return ts, value


def worst_case_ts(scenario: Scenario, layout: MaLayout, beams: np.ndarray,
                  cfg: ManifoldSolverConfig | None = None,
                  ts0: np.ndarray | None = None,
                  model: CrlbModel | None = None,
                  bounds: tuple[float, float] | None = None
                  ) -> WorstCaseResult:
    """Worst-case TS-error search: manifold ascent, recovery, feasible polish.

    Each outer round lifts the current TS errors to the manifold, runs the
    conjugate-gradient ascent there, projects back to feasible TS errors
    and re-evaluates. Because the total objective decouples across
    receivers (disjoint phasor blocks), a per-receiver dense coordinate
    scan then strengthens the feasible point, followed by a projected
    gradient polish. The reported objective is the best feasible value
    seen, so it dominates every feasible candidate visited.
    """
    cfg = cfg or ManifoldSolverConfig()
    conf = scenario.config
    freq = scenario.freq_grid
    lo, hi = conf.ts_bounds if bounds is None else bounds
    A, B = conf.num_tx_aps, conf.num_rx_aps
    if model is None:
        model = CrlbModel(scenario, layout, beams)

    best_ts = None
    best_value = -np.inf

    def consider(ts):
        nonlocal best_ts, best_value
        value = model.total(phasor_from_ts(ts, freq))
        if np.isfinite(value) and value > best_value:
            best_ts, best_value = ts.copy(), value
        return value

    ts = (np.full((A, B), 0.5 * (lo + hi)) if ts0 is None
          else np.clip(np.asarray(ts0, dtype=float), lo, hi))
    prev = consider(ts)
    outer_trace = [best_value]
    cg_status = "skipped"
    theta_star = phasor_from_ts(ts, freq)

    for _ in range(cfg.max_outer):
        theta0 = phasor_from_ts(ts, freq)
        cg = riemannian_cg_maximize(model.total, model.grad, theta0, cfg)
        theta_star, cg_status = cg.phasor, cg.status
        ts = recover_ts(theta_star, freq, (lo, hi))
        value = consider(ts)
        outer_trace.append(best_value)
        if abs(value - prev) < cfg.outer_tol:
            break
        prev = value

    # Per-receiver feasible-point search (the objective decouples in b).
    rng = np.random.default_rng(conf.seed)
    if np.isfinite(best_value) and cfg.scan_starts > 0:
        scanned = np.array(best_ts, dtype=float)
        for b in range(B):
            seeds = [best_ts[:, b], np.full(A, lo), np.full(A, hi),
                     np.full(A, float(np.clip(0.0, lo, hi)))]
            for _ in range(max(cfg.scan_starts - len(seeds), 0)):
                seeds.append(rng.uniform(lo, hi, A))
            col, _ = _scan_receiver(model, b, freq, lo, hi, cfg,
                                    seeds[:max(cfg.scan_starts, 1)])
            scanned[:, b] = col
        consider(scanned)
        ts_p, value_p = _gradient_polish(model, best_ts, freq, lo, hi,
                                         cfg.polish_iters)
        if value_p > best_value:
            best_ts, best_value = ts_p, value_p
        outer_trace.append(best_value)

    if not np.isfinite(best_value):
        log.warning("worst-case search found no finite feasible objective")
        best_ts = ts
        best_value = model.total(phasor_from_ts(ts, freq))
    per_rx = model.result(phasor_from_ts(best_ts, freq)).traces
    return WorstCaseResult(phasor=theta_star, ts_errors=best_ts,
                           worst_crlb=float(best_value),
                           trace=outer_trace, per_receiver=per_rx,
                           cg_status=cg_status)
