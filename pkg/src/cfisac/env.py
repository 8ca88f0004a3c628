"""MDP wrapper around the CF-ISAC design problem.

One shared action vector carries the beam coefficients (applied at every
transmit AP), the transmit MA positions and the receive MA positions;
decoding repairs positions onto the feasible spacing chain and projects
beams onto the power ball, so only the rate constraint can be violated by
a decoded action. The reward is the negative worst-case CRLB total minus a
constraint penalty; the worst-case TS errors come from a full solve, a
periodically refreshed cached solve, or the zero-error ideal depending on
the configured mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import MaLayout, comm_channel_matrix, uniform_layout
from .crlb import CrlbModel, phasor_from_ts
from .manifold import ManifoldSolverConfig, worst_case_ts
from .metrics import audit_constraints, cap_beam_power, weighted_sum_rate
from .scenario import Scenario

# Reward assigned when the Fisher information is singular (e.g. zero beams).
REWARD_FLOOR = -1.0e6

# Light solver settings for the cached per-step worst-case refresh.
CACHED_SOLVER = ManifoldSolverConfig(max_outer=1, max_cg_iters=20,
                                     grad_tol=1e-5, scan_points=48,
                                     scan_sweeps=1, scan_starts=2,
                                     polish_iters=5)


@dataclass
class MdpSpec:
    num_users: int
    num_tx_mas: int
    num_rx_mas: int
    horizon: int = 64
    discount: float = 0.99

    def __post_init__(self):
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must be in (0, 1]")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    @property
    def action_dim(self) -> int:
        return (2 * self.num_users + 1) * self.num_tx_mas + self.num_rx_mas

    @property
    def env_dim(self) -> int:
        return self.num_users + 2  # per-user rates, power cap, spacing

    @property
    def state_dim(self) -> int:
        return self.env_dim + self.action_dim + 1

    @classmethod
    def for_scenario(cls, scenario: Scenario, horizon: int = 64,
                     discount: float = 0.99) -> "MdpSpec":
        cfg = scenario.config
        return cls(num_users=cfg.num_users, num_tx_mas=cfg.num_tx_mas,
                   num_rx_mas=cfg.num_rx_mas, horizon=horizon,
                   discount=discount)


def repair_spacing(raw: np.ndarray, lo: float, hi: float,
                   d0: float) -> np.ndarray:
    """Monotone cumulative-max repair onto the feasible spacing chain.

    Sorts the raw coordinates, pushes each at least d0 above its
    predecessor, then sweeps back from the box ceiling so the chain fits;
    feasibility of (lo, hi, d0, n) guarantees the result stays in the box.
    """
    raw = np.sort(np.asarray(raw, dtype=float))
    n = raw.size
    fwd = np.empty(n)
    prev = -np.inf
    for t in range(n):
        prev = max(raw[t], prev + d0 if t else raw[t])
        fwd[t] = prev
    out = np.empty(n)
    out[-1] = min(fwd[-1], hi)
    for t in range(n - 2, -1, -1):
        out[t] = min(fwd[t], out[t + 1] - d0)
    return out


def decode_action(action: np.ndarray, scenario: Scenario,
                  fpa: bool = False) -> tuple[np.ndarray, MaLayout]:
    """Map a [-1, 1] action onto feasible beams and MA positions.

    Beam coordinates stack real then imaginary parts per user, scaled by
    sqrt(p_max) and projected onto the per-beam power ball; position
    coordinates map affinely into each box and are spacing-repaired. With
    `fpa` set, position coordinates are ignored and the uniform chain is
    used instead.
    """
    cfg = scenario.config
    K, Nt, Nr = cfg.num_users, cfg.num_tx_mas, cfg.num_rx_mas
    action = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
    n_beam = 2 * K * Nt
    beam_part = action[:n_beam].reshape(K, 2, Nt)
    w = (beam_part[:, 0] + 1j * beam_part[:, 1]) * np.sqrt(cfg.p_max)
    beams = cap_beam_power(np.tile(w[None], (cfg.num_tx_aps, 1, 1)),
                           cfg.p_max)

    if fpa:
        layout = uniform_layout(cfg)
    else:
        tx_raw = action[n_beam:n_beam + Nt]
        rx_raw = action[n_beam + Nt:]
        lo_t, hi_t = cfg.tx_ma_range
        lo_r, hi_r = cfg.rx_ma_range
        tx = repair_spacing(lo_t + (tx_raw + 1.0) / 2.0 * (hi_t - lo_t),
                            lo_t, hi_t, cfg.d0_spacing)
        rx = repair_spacing(lo_r + (rx_raw + 1.0) / 2.0 * (hi_r - lo_r),
                            lo_r, hi_r, cfg.d0_spacing)
        layout = MaLayout(tx=np.tile(tx, (cfg.num_tx_aps, 1)),
                          rx=np.tile(rx, (cfg.num_rx_aps, 1)))
    return beams, layout


def encode_state(rates_per_user: np.ndarray, scenario: Scenario,
                 prev_action: np.ndarray, prev_reward: float) -> np.ndarray:
    """Concatenate environment features, previous action and reward."""
    cfg = scenario.config
    state = np.concatenate([
        np.asarray(rates_per_user, dtype=float),
        [cfg.p_max, cfg.d0_spacing],
        np.asarray(prev_action, dtype=float),
        [float(prev_reward)],
    ])
    if not np.all(np.isfinite(state)):
        raise ValueError("state features must be finite")
    return state


def split_state(state: np.ndarray, spec: MdpSpec):
    """Inverse of encode_state: (rates, p_max, d0, prev_action, prev_reward)."""
    K = spec.num_users
    rates = state[:K]
    p_max, d0 = state[K], state[K + 1]
    action = state[K + 2:K + 2 + spec.action_dim]
    reward = state[-1]
    return rates, p_max, d0, action, reward


class CfIsacEnv:
    """Fixed-horizon environment over one scenario.

    ts_mode selects how the CRLB inside the reward treats TS errors:
    "full" re-solves the worst case every step, "cached" refreshes a
    warm-started light solve periodically and evaluates at the cached
    worst-case TS in between, "ideal" assumes zero TS error.
    """

    def __init__(self, scenario: Scenario, ts_mode: str = "cached",
                 horizon: int = 64, penalty: float = 10.0,
                 refresh_every: int = 16, fpa: bool = False,
                 discount: float = 0.99):
        if ts_mode not in ("full", "cached", "ideal"):
            raise ValueError(f"unknown ts_mode {ts_mode!r}")
        self.scenario = scenario
        self.ts_mode = ts_mode
        self.penalty = penalty
        self.refresh_every = refresh_every
        self.fpa = fpa
        self.spec = MdpSpec.for_scenario(scenario, horizon=horizon,
                                         discount=discount)
        self._step_count = 0
        self._cached_ts = None
        self._steps_since_refresh = 0

    @property
    def state_dim(self) -> int:
        return self.spec.state_dim

    @property
    def action_dim(self) -> int:
        return self.spec.action_dim

    @property
    def horizon(self) -> int:
        return self.spec.horizon

    # -- reward internals ------------------------------------------------------

    def _ideal_ts(self) -> np.ndarray:
        cfg = self.scenario.config
        return np.zeros((cfg.num_tx_aps, cfg.num_rx_aps))

    def crlb_value(self, beams: np.ndarray, layout: MaLayout) -> float:
        """CRLB total for the decoded decision under the configured mode."""
        sc = self.scenario
        if self.ts_mode == "ideal":
            model = CrlbModel(sc, layout, beams)
            return model.total(phasor_from_ts(self._ideal_ts(), sc.freq_grid))
        if self.ts_mode == "full":
            return worst_case_ts(sc, layout, beams).worst_crlb
        # cached: periodic warm-started light refresh
        if self._cached_ts is None or \
                self._steps_since_refresh >= self.refresh_every:
            res = worst_case_ts(sc, layout, beams, cfg=CACHED_SOLVER,
                                ts0=self._cached_ts)
            self._cached_ts = res.ts_errors
            self._steps_since_refresh = 0
            return res.worst_crlb
        self._steps_since_refresh += 1
        model = CrlbModel(sc, layout, beams)
        return model.total(phasor_from_ts(self._cached_ts, sc.freq_grid))

    def reward_for(self, beams: np.ndarray, layout: MaLayout):
        """Reward plus diagnostics for an already-decoded decision."""
        sc = self.scenario
        channels = comm_channel_matrix(sc, layout)
        rsum, rates = weighted_sum_rate(sc, channels, beams)
        report = audit_constraints(sc, beams, layout, channels=channels)
        crlb_val = self.crlb_value(beams, layout)
        if np.isfinite(crlb_val):
            reward = -crlb_val - self.penalty * report.num_violated
        else:
            reward = REWARD_FLOOR
        info = {"crlb": crlb_val, "rate_sum": rsum,
                "rates": rates.mean(axis=1),
                "violations": report.num_violated, "report": report}
        return reward, info

    # -- gym-style interface ---------------------------------------------------

    def reset(self) -> np.ndarray:
        self._step_count = 0
        prev_action = np.zeros(self.spec.action_dim)
        beams, layout = decode_action(prev_action, self.scenario,
                                      fpa=self.fpa)
        channels = comm_channel_matrix(self.scenario, layout)
        _, rates = weighted_sum_rate(self.scenario, channels, beams)
        return encode_state(rates.mean(axis=1), self.scenario, prev_action,
                            0.0)

    def step(self, action: np.ndarray):
        action = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
        beams, layout = decode_action(action, self.scenario, fpa=self.fpa)
        reward, info = self.reward_for(beams, layout)
        state = encode_state(info["rates"], self.scenario, action, reward)
        self._step_count += 1
        done = self._step_count >= self.spec.horizon
        if done:
            self._step_count = 0
        info["beams"] = beams
        info["layout"] = layout
        return state, reward, done, info


class ToyQuadraticEnv:
    """1-D sanity environment: reward -(a - 0.5)^2, no dynamics."""

    def __init__(self, horizon: int = 32, optimum: float = 0.5):
        self.horizon = int(horizon)
        self.optimum = optimum
        self._step_count = 0
        self.state_dim = 2   # [prev_action, prev_reward]
        self.action_dim = 1

    def reset(self) -> np.ndarray:
        self._step_count = 0
        return np.zeros(2)

    def step(self, action):
        a = float(np.clip(np.asarray(action).ravel()[0], -1.0, 1.0))
        reward = -(a - self.optimum) ** 2
        self._step_count += 1
        done = self._step_count >= self.horizon
        if done:
            self._step_count = 0
        return np.array([a, reward]), reward, done, {}


def evaluate_decision(scenario: Scenario, beams: np.ndarray,
                      layout: MaLayout,
                      solver_cfg: ManifoldSolverConfig | None = None) -> dict:
    """Full-fidelity evaluation of a decision: worst-case and nominal CRLB.

    The nominal point is zero TS error projected into the configured
    bounds, so it is always feasible and never exceeds the worst case.
    """
    sc = scenario
    cfg = sc.config
    model = CrlbModel(sc, layout, beams)
    worst = worst_case_ts(sc, layout, beams, cfg=solver_cfg, model=model)
    lo, hi = cfg.ts_bounds
    nominal_ts = np.full((cfg.num_tx_aps, cfg.num_rx_aps),
                         float(np.clip(0.0, lo, hi)))
    nominal = model.total(phasor_from_ts(nominal_ts, sc.freq_grid))
    channels = comm_channel_matrix(sc, layout)
    rsum, _ = weighted_sum_rate(sc, channels, beams)
    report = audit_constraints(sc, beams, layout, channels=channels)
    ideal_model_total = model.total(phasor_from_ts(
        np.zeros((cfg.num_tx_aps, cfg.num_rx_aps)), sc.freq_grid))
    return {"worst_crlb": worst.worst_crlb, "nominal_crlb": float(nominal),
            "ideal_crlb": float(ideal_model_total),
            "rate_sum": rsum, "violations": report.num_violated,
            "ts_errors": worst.ts_errors,
            "per_receiver": worst.per_receiver}
