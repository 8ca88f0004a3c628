"""Movable-antenna steering vectors, communication and sensing channels.

All antenna positions are 1-D coordinates in carrier wavelengths. Steering
entries use the uniform rule exp(-j*2*pi*p*sin(angle)) for every element;
an element parked at p = 0 contributes the constant 1. The module also
provides the analytic derivatives of every position-dependent quantity with
respect to the 2-D target coordinates, which feed the Fisher information
assembly. Central finite differences are the reference semantics for each
derivative here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import SPEED_OF_LIGHT, GeometryError, Scenario, ScenarioConfig


@dataclass
class MaLayout:
    """Sorted movable-antenna coordinates for every array.

    tx has shape (A, N_t), rx has shape (B, N_r); rows must be ascending
    with adjacent spacing >= d0 and stay within the per-array box.
    """

    tx: np.ndarray
    rx: np.ndarray

    def __post_init__(self):
        self.tx = np.atleast_2d(np.asarray(self.tx, dtype=float))
        self.rx = np.atleast_2d(np.asarray(self.rx, dtype=float))

    def validate(self, config: ScenarioConfig):
        for label, pos, (lo, hi) in (
            ("tx", self.tx, config.tx_ma_range),
            ("rx", self.rx, config.rx_ma_range),
        ):
            if np.any(pos < lo) or np.any(pos > hi):
                raise ValueError(f"{label} MA positions leave [{lo}, {hi}]")
            if pos.shape[1] > 1:
                gaps = np.diff(pos, axis=1)
                if np.any(gaps < config.d0_spacing - 1e-12):
                    raise ValueError(
                        f"{label} MA spacing below d0={config.d0_spacing}")


def uniform_layout(config: ScenarioConfig) -> MaLayout:
    """Fixed-position baseline: d0-spaced chain centered in each box."""
    def chain(n, lo, hi):
        center = 0.5 * (lo + hi)
        offs = (np.arange(n) - (n - 1) / 2.0) * config.d0_spacing
        return center + offs

    tx = np.tile(chain(config.num_tx_mas, *config.tx_ma_range),
                 (config.num_tx_aps, 1))
    rx = np.tile(chain(config.num_rx_mas, *config.rx_ma_range),
                 (config.num_rx_aps, 1))
    return MaLayout(tx=tx, rx=rx)


def steering_tx(positions, angle):
    """Transmit field-response vector exp(-j*2*pi*p*sin(angle)) per element."""
    positions = np.asarray(positions, dtype=float)
    return np.exp(-2j * np.pi * positions * np.sin(angle))


def steering_rx(positions, angle):
    """Receive field-response vector; same rule as the transmit side."""
    return steering_tx(positions, angle)


def comm_channel(scenario: Scenario, layout: MaLayout, a: int, k: int) -> np.ndarray:
    """Frequency-flat downlink channel from AP `a` to user `k` (N_t vector)."""
    gains = scenario.path_gains[a, k]
    aods = scenario.path_aods[a, k]
    delays = scenario.path_delays[a, k]
    steer = np.exp(-2j * np.pi * layout.tx[a][None, :] * np.sin(aods)[:, None])
    coeff = gains * np.exp(-2j * np.pi * delays)
    return coeff @ steer


def comm_channel_matrix(scenario: Scenario, layout: MaLayout) -> np.ndarray:
    """All downlink channels stacked as an (A, K, N_t) array."""
    coeff = scenario.path_gains * np.exp(-2j * np.pi * scenario.path_delays)
    steer = np.exp(-2j * np.pi * layout.tx[:, None, None, :]
                   * np.sin(scenario.path_aods)[:, :, :, None])
    return np.einsum("akl,akln->akn", coeff, steer)


def sensing_channel(scenario: Scenario, layout: MaLayout, a: int, b: int,
                    s: int) -> np.ndarray:
    """Rank-one target echo channel for subcarrier `s` (N_r x N_t matrix)."""
    geo = scenario.geometry
    phase = np.exp(-2j * np.pi * scenario.freq_grid[s] * geo.delay_round[a, b])
    g_rx = steering_rx(layout.rx[b], geo.angle_rx[b])
    g_tx = steering_tx(layout.tx[a], geo.angle_tx[a])
    return scenario.reflectivity[a, b] * phase * np.outer(g_rx, np.conj(g_tx))


def angle_delay_derivs(d, d_a, d_b):
    """Derivatives of the round-trip delay and both angles in the target.

    Returns (dtau_dx, dtau_dy, dang_tx_dx, dang_rx_dx, dang_tx_dy,
    dang_rx_dy). `d_a`, `d_b` may be single points or (N, 2) arrays; outputs
    follow the input shape (delay derivatives combine the tx and rx legs and
    broadcast to (A, B) for array inputs).
    """
    d = np.asarray(d, dtype=float)
    d_a = np.atleast_2d(np.asarray(d_a, dtype=float))
    d_b = np.atleast_2d(np.asarray(d_b, dtype=float))
    u_a = d[None, :] - d_a
    u_b = d[None, :] - d_b
    r_a = np.linalg.norm(u_a, axis=1)
    r_b = np.linalg.norm(u_b, axis=1)
    if np.any(r_a == 0) or np.any(r_b == 0):
        raise GeometryError("target coincides with an AP position")
    # d||d - d_a||/dd = (d - d_a)/||d - d_a||; delay sums both legs.
    dtau_dx = (u_a[:, 0] / r_a)[:, None] + (u_b[:, 0] / r_b)[None, :]
    dtau_dy = (u_a[:, 1] / r_a)[:, None] + (u_b[:, 1] / r_b)[None, :]
    dtau_dx = dtau_dx / SPEED_OF_LIGHT
    dtau_dy = dtau_dy / SPEED_OF_LIGHT
    # d atan2(u_y, u_x)/d d_x = -u_y/r^2, d/d d_y = u_x/r^2.
    dang_tx_dx = -u_a[:, 1] / r_a**2
    dang_tx_dy = u_a[:, 0] / r_a**2
    dang_rx_dx = -u_b[:, 1] / r_b**2
    dang_rx_dy = u_b[:, 0] / r_b**2
    return dtau_dx, dtau_dy, dang_tx_dx, dang_rx_dx, dang_tx_dy, dang_rx_dy


def steering_angle_deriv(positions, angle):
    """d/d(angle) of the steering vector: (-j*2*pi*p*cos(angle)) * entry."""
    positions = np.asarray(positions, dtype=float)
    vec = steering_tx(positions, angle)
    return (-2j * np.pi * positions * np.cos(angle)) * vec


def steering_position_derivs(layout: MaLayout, geometry, a: int, b: int):
    """Derivatives of both sensing steering vectors in the target coordinates.

    Returns (dg_rx_dx, dg_tx_dx, dg_rx_dy, dg_tx_dy) for the (a, b) pair,
    chaining the per-angle steering derivative with the angle derivatives.
    """
    derivs = angle_delay_derivs(geometry.target,
                                geometry.tx_ap_pos, geometry.rx_ap_pos)
    _, _, dang_tx_dx, dang_rx_dx, dang_tx_dy, dang_rx_dy = derivs
    base_tx = steering_angle_deriv(layout.tx[a], geometry.angle_tx[a])
    base_rx = steering_angle_deriv(layout.rx[b], geometry.angle_rx[b])
    return (base_rx * dang_rx_dx[b], base_tx * dang_tx_dx[a],
            base_rx * dang_rx_dy[b], base_tx * dang_tx_dy[a])
