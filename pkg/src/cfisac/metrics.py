"""Communication metrics and constraint auditing.

SINR and weighted sum rate follow the coherent multi-AP downlink model:
every AP carries a beam per user, the per-user signal is the coherent sum
over APs, and interference stacks the other users' beams. The constraint
audit covers the whole feasible set of the joint design problem; audits
never raise, they report violation magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import MaLayout, comm_channel_matrix
from .scenario import ConfigError, Scenario

CONSTRAINT_IDS = ("ts_bounds", "rate", "tx_box", "rx_box",
                  "tx_spacing", "rx_spacing", "power")


def sinr(scenario: Scenario, channels: np.ndarray, beams: np.ndarray,
         k: int, s: int = 0) -> float:
    """SINR of user `k` on subcarrier `s`.

    `channels` is the (A, K, N_t) downlink channel array, `beams` the
    (A, K, N_t) beamformer array. The channels are frequency flat, so the
    subcarrier index only selects the (constant) noise power.
    """
    del s  # identical noise on every subcarrier
    sigma2 = scenario.noise_power
    if sigma2 <= 0:
        raise ConfigError("noise power must be positive")
    # effective[j] = sum_a h_{a,k}^H w_{a,j}
    effective = np.einsum("an,ajn->j", np.conj(channels[:, k, :]), beams)
    desired = np.abs(effective[k]) ** 2
    interference = np.sum(np.abs(effective) ** 2) - desired
    return float(desired / (interference + sigma2))


def weighted_sum_rate(scenario: Scenario, channels: np.ndarray,
                      beams: np.ndarray):
    """Weighted sum rate and the (K, S) per-user per-subcarrier rate table."""
    K = scenario.config.num_users
    S = scenario.config.num_freq_samples
    per_user = np.array([np.log2(1.0 + sinr(scenario, channels, beams, k))
                         for k in range(K)])
    rates = np.tile(per_user[:, None], (1, S))
    total = float(np.sum(scenario.config.rate_weights[:, None] * rates))
    return total, rates


@dataclass
class ConstraintReport:
    """Violation magnitudes per constraint family; zero means satisfied."""

    magnitudes: dict[str, float] = field(default_factory=dict)

    @property
    def violated(self) -> dict[str, bool]:
        return {key: mag > 0.0 for key, mag in self.magnitudes.items()}

    @property
    def num_violated(self) -> int:
        return sum(1 for mag in self.magnitudes.values() if mag > 0.0)

    @property
    def all_satisfied(self) -> bool:
        return self.num_violated == 0


def audit_constraints(scenario: Scenario, beams: np.ndarray,
                      layout: MaLayout, ts_errors: np.ndarray | None = None,
                      channels: np.ndarray | None = None) -> ConstraintReport:
    """Evaluate every design constraint; equality counts as satisfied.

    Passing precomputed `channels` skips their reconstruction from the
    layout. The TS-bound check is only emitted when `ts_errors` is given.
    """
    cfg = scenario.config
    mags: dict[str, float] = {}

    if ts_errors is not None:
        ts = np.asarray(ts_errors, dtype=float)
        lo, hi = cfg.ts_bounds
        mags["ts_bounds"] = float(max(np.max(lo - ts, initial=0.0),
                                      np.max(ts - hi, initial=0.0), 0.0))

    if channels is None:
        channels = comm_channel_matrix(scenario, layout)
    _, rates = weighted_sum_rate(scenario, channels, beams)
    mags["rate"] = float(max(np.max(cfg.rate_floor - rates), 0.0))

    for label, pos, (lo, hi) in (
        ("tx", layout.tx, cfg.tx_ma_range),
        ("rx", layout.rx, cfg.rx_ma_range),
    ):
        box = max(np.max(lo - pos, initial=0.0),
                  np.max(pos - hi, initial=0.0), 0.0)
        mags[f"{label}_box"] = float(box)
        if pos.shape[1] > 1:
            gap = float(np.min(np.diff(np.sort(pos, axis=1), axis=1)))
            mags[f"{label}_spacing"] = float(max(cfg.d0_spacing - gap, 0.0))
        else:
            mags[f"{label}_spacing"] = 0.0

    powers = np.sum(np.abs(beams) ** 2, axis=2)
    mags["power"] = float(max(np.max(powers - cfg.p_max), 0.0))
    return ConstraintReport(magnitudes=mags)


def cap_beam_power(beams: np.ndarray, p_max: float) -> np.ndarray:
    """Rescale any beam above the per-beam power cap back onto it."""
    beams = np.array(beams, dtype=complex)
    for _ in range(3):
        power = np.sum(np.abs(beams) ** 2, axis=2, keepdims=True)
        hot = power > p_max
        if not np.any(hot):
            break
        factor = np.sqrt(p_max / np.where(hot, power, 1.0)) * (1 - 1e-15)
        beams = np.where(hot, beams * factor, beams)
    return beams


def mrt_beams(scenario: Scenario, layout: MaLayout,
              power_fraction: float = 1.0) -> np.ndarray:
    """Matched-filter beams toward each user at the per-beam power cap."""
    channels = comm_channel_matrix(scenario, layout)
    norms = np.linalg.norm(channels, axis=2, keepdims=True)
    norms = np.where(norms == 0, 1.0, norms)
    scale = np.sqrt(power_fraction * scenario.config.p_max)
    return cap_beam_power(scale * channels / norms, scenario.config.p_max)
