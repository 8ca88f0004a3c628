import numpy as np
import pytest

from cfisac.channel import MaLayout, uniform_layout
from cfisac.metrics import mrt_beams
from cfisac.scenario import ScenarioConfig, build_scenario


def desk_config(seed=0, **overrides) -> ScenarioConfig:
    """Small instance used throughout the suite: A=2, B=1, K=2, Nt=4, Nr=2, S=8."""
    params = dict(num_tx_aps=2, num_rx_aps=1, num_users=2, num_tx_mas=4,
                  num_rx_mas=2, num_freq_samples=8, tx_ma_range=(-2.0, 2.0),
                  rx_ma_range=(-2.0, 2.0), seed=seed)
    params.update(overrides)
    return ScenarioConfig(**params)


def desk_instance(seed=0, **overrides):
    """Scenario, uniform layout and matched-filter beams for the desk config."""
    cfg = desk_config(seed=seed, **overrides)
    scenario = build_scenario(cfg)
    layout = uniform_layout(cfg)
    beams = mrt_beams(scenario, layout)
    return scenario, layout, beams


def random_beams(scenario, rng) -> np.ndarray:
    cfg = scenario.config
    shape = (cfg.num_tx_aps, cfg.num_users, cfg.num_tx_mas)
    w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    norms = np.linalg.norm(w, axis=2, keepdims=True)
    scale = rng.uniform(0.3, 1.0, size=norms.shape)
    return w / norms * np.sqrt(cfg.p_max) * scale


def random_layout(config, rng) -> MaLayout:
    """Feasible random layout: jittered d0 chains inside each box."""
    def rows(n_rows, n, lo, hi):
        slack = (hi - lo) - (n - 1) * config.d0_spacing
        out = np.empty((n_rows, n))
        for r in range(n_rows):
            gaps = rng.uniform(0, 1, n + 1)
            gaps = gaps / gaps.sum() * slack
            pos = lo + np.cumsum(gaps[:-1]) + np.arange(n) * config.d0_spacing
            out[r] = pos
        return out

    return MaLayout(
        tx=rows(config.num_tx_aps, config.num_tx_mas, *config.tx_ma_range),
        rx=rows(config.num_rx_aps, config.num_rx_mas, *config.rx_ma_range))


@pytest.fixture
def desk():
    return desk_instance(seed=3)
