"""Reproducible problem instances for the movable-antenna cell-free ISAC simulator.

A scenario bundles the node geometry (transmit APs, sensing receive APs and
users on a ring around a static target), the drawn channel path parameters,
the sensing reflectivities, the frequency-domain symbol block and every
constraint constant. Building a scenario is a pure function of the config,
so two builds with the same seed are bit-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s


class ConfigError(ValueError):
    """Raised for infeasible or malformed scenario configuration."""


class GeometryError(ValueError):
    """Raised for degenerate geometry (coincident target and AP)."""


def _default_freq_grid(num_samples: int, carrier_hz: float = 3.5e9,
                       bandwidth_hz: float = 100e6) -> np.ndarray:
    """Uniform frequency samples spanning `bandwidth_hz` around the carrier."""
    half = bandwidth_hz / 2.0
    return np.linspace(carrier_hz - half, carrier_hz + half, num_samples)


@dataclass
class ScenarioConfig:
    """Declarative description of one CF-ISAC problem instance.

    Positions of movable antennas are expressed in carrier wavelengths;
    powers in watts; the TS error bounds in seconds.
    """

    num_tx_aps: int = 3
    num_rx_aps: int = 2
    num_users: int = 2
    num_tx_mas: int = 16
    num_rx_mas: int = 4
    num_freq_samples: int = 16
    freq_grid: np.ndarray | None = None  # Hz, strictly increasing
    ring_radius: float = 100.0           # m
    pl0_db: float = -30.0                # reference path loss at 1 m
    exp_user: float = 2.8                # path-loss exponent AP-user
    exp_target: float = 2.2              # path-loss exponent AP-target
    num_paths: int = 3
    noise_power_dbm: float = -80.0       # per-sample noise power
    rcs: float = 3.0                     # target radar cross-section scale
    d0_spacing: float = 0.5              # minimum inter-MA spacing, wavelengths
    tx_ma_range: tuple[float, float] = (-4.0, 4.0)  # wavelengths
    rx_ma_range: tuple[float, float] = (-2.0, 2.0)  # wavelengths
    p_max: float = 1.0                   # per-beam power cap, W
    rate_floor: float = 1.0              # bit/s/Hz per user per subcarrier
    rate_weights: np.ndarray | None = None
    ts_bounds: tuple[float, float] = (0.4e-9, 0.6e-9)  # seconds
    sensing_accuracy: float = 0.05       # stored for completeness, unused
    seed: int = 0

    def __post_init__(self):
        if self.freq_grid is None:
            self.freq_grid = _default_freq_grid(self.num_freq_samples)
        self.freq_grid = np.asarray(self.freq_grid, dtype=float)
        if self.rate_weights is None:
            self.rate_weights = np.ones(self.num_users)
        self.rate_weights = np.asarray(self.rate_weights, dtype=float)
        self.tx_ma_range = (float(self.tx_ma_range[0]), float(self.tx_ma_range[1]))
        self.rx_ma_range = (float(self.rx_ma_range[0]), float(self.rx_ma_range[1]))
        self.ts_bounds = (float(self.ts_bounds[0]), float(self.ts_bounds[1]))
        self.validate()

    def validate(self):
        counts = {
            "num_tx_aps": self.num_tx_aps, "num_rx_aps": self.num_rx_aps,
            "num_users": self.num_users, "num_tx_mas": self.num_tx_mas,
            "num_rx_mas": self.num_rx_mas, "num_freq_samples": self.num_freq_samples,
            "num_paths": self.num_paths,
        }
        for name, value in counts.items():
            if int(value) < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.ts_bounds[0] > self.ts_bounds[1]:
            raise ConfigError(
                f"ts_bounds violate ts_min <= ts_max: {self.ts_bounds}")
        for label, (lo, hi), n in (
            ("tx", self.tx_ma_range, self.num_tx_mas),
            ("rx", self.rx_ma_range, self.num_rx_mas),
        ):
            if lo + (n - 1) * self.d0_spacing > hi:
                raise ConfigError(
                    f"infeasible {label} MA spacing: p_min + (N-1)*D0 <= p_max "
                    f"fails ({lo} + {n - 1}*{self.d0_spacing} > {hi})")
        if len(self.freq_grid) != self.num_freq_samples:
            raise ConfigError(
                f"freq_grid has {len(self.freq_grid)} entries, expected "
                f"{self.num_freq_samples}")
        if np.any(self.freq_grid <= 0):
            raise ConfigError("freq_grid entries must be positive")
        if self.num_freq_samples > 1 and np.any(np.diff(self.freq_grid) <= 0):
            raise ConfigError("freq_grid must be strictly increasing")
        if self.p_max <= 0:
            raise ConfigError(f"p_max must be positive, got {self.p_max}")
        if self.ring_radius <= 0:
            raise ConfigError(f"ring_radius must be positive, got {self.ring_radius}")
        if len(self.rate_weights) != self.num_users:
            raise ConfigError("rate_weights length must equal num_users")
        if np.any(self.rate_weights <= 0):
            raise ConfigError("rate_weights must be positive")

    @property
    def noise_power(self) -> float:
        """Per-sample noise power in watts."""
        return 10.0 ** ((self.noise_power_dbm - 30.0) / 10.0)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def fingerprint(self) -> str:
        """Stable hex digest of the full configuration."""
        doc = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                v = v.tolist()
            doc[f.name] = v
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def path_loss_linear(distance_m, exponent: float, pl0_db: float):
    """Linear power gain 10^(pl0_db/10) * (d/1m)^(-exponent)."""
    distance_m = np.asarray(distance_m, dtype=float)
    if np.any(distance_m <= 0):
        raise ValueError("path_loss_linear requires distance > 0")
    return 10.0 ** (pl0_db / 10.0) * distance_m ** (-exponent)


def target_geometry(d, d_a, d_b):
    """Distances, bistatic round-trip delays and angles for a target at `d`.

    `d_a` and `d_b` are arrays of shape (A, 2) and (B, 2). Returns
    (dist_tx (A,), dist_rx (B,), delay_round (A, B), angle_tx (A,),
    angle_rx (B,)). Angles follow the two-argument arctangent convention,
    range (-pi, pi].
    """
    d = np.asarray(d, dtype=float)
    d_a = np.atleast_2d(np.asarray(d_a, dtype=float))
    d_b = np.atleast_2d(np.asarray(d_b, dtype=float))
    diff_a = d[None, :] - d_a  # vector from AP to target
    diff_b = d[None, :] - d_b
    dist_tx = np.linalg.norm(diff_a, axis=1)
    dist_rx = np.linalg.norm(diff_b, axis=1)
    if np.any(dist_tx == 0) or np.any(dist_rx == 0):
        raise GeometryError("target coincides with an AP position")
    angle_tx = np.arctan2(diff_a[:, 1], diff_a[:, 0])
    angle_rx = np.arctan2(diff_b[:, 1], diff_b[:, 0])
    # summed after the division so delay_round == delay_tx + delay_rx exactly
    delay_round = (dist_tx / SPEED_OF_LIGHT)[:, None] \
        + (dist_rx / SPEED_OF_LIGHT)[None, :]
    return dist_tx, dist_rx, delay_round, angle_tx, angle_rx


@dataclass
class Geometry:
    """Node placement plus all derived target-path quantities."""

    target: np.ndarray            # (2,)
    tx_ap_pos: np.ndarray         # (A, 2)
    rx_ap_pos: np.ndarray         # (B, 2)
    dist_tx: np.ndarray = field(init=False)    # (A,) AP-to-target, m
    dist_rx: np.ndarray = field(init=False)    # (B,)
    delay_tx: np.ndarray = field(init=False)   # (A,) s
    delay_rx: np.ndarray = field(init=False)   # (B,)
    delay_round: np.ndarray = field(init=False)  # (A, B) s
    angle_tx: np.ndarray = field(init=False)   # (A,) rad, AoD toward target
    angle_rx: np.ndarray = field(init=False)   # (B,) rad, AoA from target

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float)
        self.tx_ap_pos = np.atleast_2d(np.asarray(self.tx_ap_pos, dtype=float))
        self.rx_ap_pos = np.atleast_2d(np.asarray(self.rx_ap_pos, dtype=float))
        out = target_geometry(self.target, self.tx_ap_pos, self.rx_ap_pos)
        self.dist_tx, self.dist_rx, self.delay_round, self.angle_tx, self.angle_rx = out
        self.delay_tx = self.dist_tx / SPEED_OF_LIGHT
        self.delay_rx = self.dist_rx / SPEED_OF_LIGHT


@dataclass
class Scenario:
    """A fully drawn problem instance (geometry, channels, constants)."""

    config: ScenarioConfig
    geometry: Geometry
    user_pos: np.ndarray        # (K, 2)
    user_ap_dist: np.ndarray    # (A, K) m
    path_gains: np.ndarray      # (A, K, L) complex
    path_aods: np.ndarray       # (A, K, L) rad
    path_delays: np.ndarray     # (A, K, L) phase cycles
    reflectivity: np.ndarray    # (A, B) complex sensing reflectivity
    symbols: np.ndarray         # (S, K) complex unit-power QPSK block

    @property
    def noise_power(self) -> float:
        return self.config.noise_power

    @property
    def freq_grid(self) -> np.ndarray:
        return self.config.freq_grid


def build_scenario(config: ScenarioConfig, target=(0.0, 0.0)) -> Scenario:
    """Draw a scenario from `config` using its seed.

    The target defaults to the origin; `target` exists for target-motion
    studies and does not consume randomness, so node placement for a given
    seed is independent of it.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    A, B, K = config.num_tx_aps, config.num_rx_aps, config.num_users
    L, S = config.num_paths, config.num_freq_samples

    def ring_points(n):
        ang = rng.uniform(0.0, 2.0 * np.pi, size=n)
        return config.ring_radius * np.stack(
            [np.cos(ang), np.sin(ang)], axis=1)

    tx_pos = ring_points(A)
    rx_pos = ring_points(B)
    user_pos = ring_points(K)
    geometry = Geometry(target=np.asarray(target, float),
                        tx_ap_pos=tx_pos, rx_ap_pos=rx_pos)

    # Per-(a,k) geometric channel paths: circular Gaussian gains with
    # per-path variance PL(d)/L, angles of departure uniform on (-pi/2, pi/2),
    # delays as pre-normalized phases in cycles.
    user_ap_dist = np.linalg.norm(
        tx_pos[:, None, :] - user_pos[None, :, :], axis=2)
    pl_user = path_loss_linear(user_ap_dist, config.exp_user, config.pl0_db)
    gain_std = np.sqrt(pl_user / L)
    raw = rng.standard_normal((A, K, L)) + 1j * rng.standard_normal((A, K, L))
    path_gains = raw * (gain_std[:, :, None] / np.sqrt(2.0))
    path_aods = rng.uniform(-np.pi / 2, np.pi / 2, size=(A, K, L))
    path_delays = rng.uniform(0.0, 1.0, size=(A, K, L))

    # Bistatic sensing reflectivity: |beta|^2 = rcs * PL(k_a) * PL(k_b),
    # uniformly random phase.
    pl_a = path_loss_linear(geometry.dist_tx, config.exp_target, config.pl0_db)
    pl_b = path_loss_linear(geometry.dist_rx, config.exp_target, config.pl0_db)
    mag = np.sqrt(config.rcs * pl_a[:, None] * pl_b[None, :])
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(A, B))
    reflectivity = mag * np.exp(1j * phase)

    # Unit-power QPSK frequency-domain symbol block, fixed per scenario.
    quad = rng.integers(0, 4, size=(S, K))
    symbols = np.exp(1j * (np.pi / 4 + np.pi / 2 * quad))

    return Scenario(config=config, geometry=geometry, user_pos=user_pos,
                    user_ap_dist=user_ap_dist, path_gains=path_gains,
                    path_aods=path_aods, path_delays=path_delays,
                    reflectivity=reflectivity, symbols=symbols)


def retarget(scenario: Scenario, target) -> Scenario:
    """Rebuild the same seeded scenario with the target moved to `target`."""
    return build_scenario(scenario.config, target=target)


def rerandomize_users(scenario: Scenario, user_seed: int) -> Scenario:
    """New task instance: same APs and target, freshly placed users.

    Redraws the user ring positions and their channel paths from
    `user_seed` while keeping the AP geometry, sensing reflectivities and
    symbol block; this is the task distribution used for meta-learning.
    """
    cfg = scenario.config
    rng = np.random.default_rng(user_seed)
    A, K, L = cfg.num_tx_aps, cfg.num_users, cfg.num_paths
    ang = rng.uniform(0.0, 2.0 * np.pi, size=K)
    user_pos = cfg.ring_radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    user_ap_dist = np.linalg.norm(
        scenario.geometry.tx_ap_pos[:, None, :] - user_pos[None, :, :],
        axis=2)
    pl_user = path_loss_linear(user_ap_dist, cfg.exp_user, cfg.pl0_db)
    gain_std = np.sqrt(pl_user / L)
    raw = rng.standard_normal((A, K, L)) + 1j * rng.standard_normal((A, K, L))
    return Scenario(
        config=cfg, geometry=scenario.geometry, user_pos=user_pos,
        user_ap_dist=user_ap_dist,
        path_gains=raw * (gain_std[:, :, None] / np.sqrt(2.0)),
        path_aods=rng.uniform(-np.pi / 2, np.pi / 2, size=(A, K, L)),
        path_delays=rng.uniform(0.0, 1.0, size=(A, K, L)),
        reflectivity=scenario.reflectivity, symbols=scenario.symbols)


_CONFIG_FIELDS = None


def load_config(path) -> ScenarioConfig:
    """Read a ScenarioConfig from a TOML file; unknown keys are errors."""
    import tomli

    global _CONFIG_FIELDS
    if _CONFIG_FIELDS is None:
        _CONFIG_FIELDS = {f.name for f in dataclasses.fields(ScenarioConfig)}
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    unknown = sorted(set(doc) - _CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {', '.join(unknown)}")
    kwargs = {}
    for key, value in doc.items():
        if key in ("tx_ma_range", "rx_ma_range", "ts_bounds"):
            value = tuple(value)
        elif key in ("freq_grid", "rate_weights"):
            value = np.asarray(value, dtype=float)
        kwargs[key] = value
    return ScenarioConfig(**kwargs)
