"""Joint beamforming and antenna-position design on one scenario.

Trains the TD3 policy against the cached worst-case CRLB reward, then
compares the learned decision with the matched-filter/uniform-layout
reference under the full worst-case evaluation.
"""

from cfisac import build_scenario, evaluate_decision, mrt_beams, \
    optimize_decision, uniform_layout
from cfisac.scenario import ScenarioConfig

config = ScenarioConfig(num_tx_aps=2, num_rx_aps=1, num_users=2,
                        num_tx_mas=4, num_rx_mas=2, num_freq_samples=8,
                        tx_ma_range=(-2, 2), rx_ma_range=(-2, 2), seed=0)
scenario = build_scenario(config)

layout = uniform_layout(config)
reference = evaluate_decision(scenario, mrt_beams(scenario, layout), layout)
print("matched-filter + uniform layout reference:")
print(f"  worst-case CRLB {reference['worst_crlb']:.5g} m^2, sum rate "
      f"{reference['rate_sum']:.2f} bit/s/Hz, "
      f"violations {reference['violations']}")

decision = optimize_decision(scenario, "ma-metarl", seed=0, train_steps=600)
learned = evaluate_decision(scenario, decision.beams, decision.layout)
print("\nlearned joint design (600 training steps):")
print(f"  worst-case CRLB {learned['worst_crlb']:.5g} m^2, sum rate "
      f"{learned['rate_sum']:.2f} bit/s/Hz, "
      f"violations {learned['violations']}")
print(f"  transmit MA positions [wavelengths]: {decision.layout.tx[0]}")
print(f"  receive MA positions  [wavelengths]: {decision.layout.rx[0]}")
