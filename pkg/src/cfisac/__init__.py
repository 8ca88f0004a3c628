"""Movable-antenna cell-free ISAC simulator and optimization toolkit.

Core pieces: seeded scenario construction, movable-antenna channel models,
the target-position CRLB under bounded time-synchronization errors, a
Riemannian worst-case solver over the unit-modulus phasor manifold, and a
TD3-based meta-reinforcement-learning loop for joint beamforming and
antenna placement.
"""

from .scenario import (ConfigError, Geometry, GeometryError, Scenario,
                       ScenarioConfig, build_scenario, load_config,
                       path_loss_linear, target_geometry)
from .channel import (MaLayout, comm_channel, comm_channel_matrix,
                      sensing_channel, steering_rx, steering_tx,
                      uniform_layout)
from .metrics import (ConstraintReport, audit_constraints, mrt_beams, sinr,
                      weighted_sum_rate)
from .crlb import (CrlbModel, FimResult, SingularFimError, crlb_total, fim,
                   grad_crlb_wrt_phasor, phasor_from_ts, stacked_tx,
                   trace_inverse_2x2)
from .manifold import (ManifoldSolverConfig, WorstCaseResult, project_tangent,
                       recover_ts, retract, riemannian_cg_maximize,
                       worst_case_ts)
from .env import (CfIsacEnv, MdpSpec, ToyQuadraticEnv, decode_action,
                  encode_state, evaluate_decision, split_state)
from .td3 import Td3Config, Td3Learner
from .replay import ReplayBuffer
from .meta import MetaConfig, meta_adapt, meta_train
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .harness import (ExperimentSpec, ResultRow, optimize_decision,
                      run_sweep, run_target_distance_study)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
