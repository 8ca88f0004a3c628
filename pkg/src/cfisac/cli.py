"""Command-line entry points.

Subcommands: solve-worst-case, train, adapt, eval, sweep. Exit codes:
0 success, 1 configuration error, 2 runtime failure. The environment
variable CFISAC_LOG in {error, warn, info, debug} controls verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .channel import uniform_layout
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .env import CfIsacEnv, decode_action, evaluate_decision
from .harness import (ExperimentSpec, ResultRow, optimize_decision,
                      run_sweep, run_target_distance_study, sweep_chart,
                      write_study_csv, write_sweep_csv, write_training_log)
from .manifold import worst_case_ts
from .meta import MetaConfig, meta_adapt
from .metrics import mrt_beams
from .scenario import ConfigError, ScenarioConfig, build_scenario, \
    load_config

log = logging.getLogger("cfisac")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level_name = os.environ.get("CFISAC_LOG", "warn").lower()
    level = _LOG_LEVELS.get(level_name, logging.WARNING)
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfisac",
        description="Movable-antenna cell-free ISAC simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None,
                       help="TOML scenario config; defaults otherwise")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=str, default="out",
                       help="output directory")
        p.add_argument("--ts-mode", choices=("full", "cached", "ideal"),
                       default="cached")

    p = sub.add_parser("solve-worst-case",
                       help="worst-case TS errors for a reference decision")
    common(p)

    p = sub.add_parser("train", help="train a TD3 policy on one scenario")
    common(p)
    p.add_argument("--steps", type=int, default=400)
    p.add_argument("--baseline", choices=("ma-metarl", "ma-metarl-ideal-ts",
                                          "fpa"), default="ma-metarl")

    p = sub.add_parser("adapt", help="adapt a checkpointed policy")
    common(p)
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--steps", type=int, default=500)

    p = sub.add_parser("eval", help="evaluate a checkpointed policy")
    common(p)
    p.add_argument("--checkpoint", type=str, required=True)

    p = sub.add_parser("sweep", help="axis sweep with a baseline optimizer")
    common(p)
    p.add_argument("--axis", choices=("transmit_power", "num_mas",
                                      "rate_floor", "target_distance"),
                   required=True)
    p.add_argument("--values", type=str, required=True,
                   help="comma-separated, strictly increasing")
    p.add_argument("--seeds", type=str, default="0")
    p.add_argument("--baseline", choices=("ma-metarl", "ma-metarl-ideal-ts",
                                          "fpa"), default="ma-metarl")
    p.add_argument("--train-steps", type=int, default=400)
    return parser


def _load_scenario_config(args) -> ScenarioConfig:
    if args.config:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        return cfg
    return ScenarioConfig(seed=args.seed)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_solve_worst_case(args) -> int:
    cfg = _load_scenario_config(args)
    scenario = build_scenario(cfg)
    layout = uniform_layout(cfg)
    beams = mrt_beams(scenario, layout)
    out = _out_dir(args)
    result = worst_case_ts(scenario, layout, beams)
    summary = evaluate_decision(scenario, beams, layout)
    row = ResultRow(axis="none", axis_value=0.0, baseline="reference",
                    seed=cfg.seed, worst_crlb=summary["worst_crlb"],
                    nominal_crlb=summary["nominal_crlb"],
                    rate_sum=summary["rate_sum"],
                    violations=summary["violations"])
    write_sweep_csv([row], out / "worst_case.csv")
    np.savetxt(out / "worst_case_ts_errors.csv", result.ts_errors,
               delimiter=",", fmt="%.9e")
    print(f"worst-case CRLB total: {summary['worst_crlb']:.6g} m^2")
    print(f"nominal CRLB total:    {summary['nominal_crlb']:.6g} m^2")
    print(f"weighted sum rate:     {summary['rate_sum']:.4f} bit/s/Hz")
    print(f"results in {out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_scenario_config(args)
    scenario = build_scenario(cfg)
    out = _out_dir(args)
    decision = optimize_decision(scenario, args.baseline, cfg.seed,
                                 train_steps=args.steps)
    write_training_log(decision.log_rows, out / "train_log.csv")
    summary = evaluate_decision(scenario, decision.beams, decision.layout)
    save_checkpoint(decision.learner, out / "checkpoint.json",
                    scenario_fingerprint=cfg.fingerprint())
    print(f"trained {args.steps} steps; worst-case CRLB of returned "
          f"decision: {summary['worst_crlb']:.6g} m^2")
    print(f"checkpoint and training log in {out}")
    return 0


def _cmd_adapt(args) -> int:
    cfg = _load_scenario_config(args)
    scenario = build_scenario(cfg)
    out = _out_dir(args)
    meta_learner = load_checkpoint(args.checkpoint,
                                   expected_fingerprint=cfg.fingerprint())
    env = CfIsacEnv(scenario, ts_mode=args.ts_mode)
    if (meta_learner.state_dim, meta_learner.action_dim) != \
            (env.state_dim, env.action_dim):
        raise ConfigError("checkpoint dimensions do not fit this scenario")
    adapted = meta_adapt(meta_learner, env, MetaConfig(), seed=cfg.seed,
                         adaptation_steps=args.steps)
    save_checkpoint(adapted, out / "adapted_checkpoint.json",
                    scenario_fingerprint=cfg.fingerprint())
    print(f"adapted for {args.steps} updates; checkpoint in {out}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_scenario_config(args)
    scenario = build_scenario(cfg)
    out = _out_dir(args)
    learner = load_checkpoint(args.checkpoint,
                              expected_fingerprint=cfg.fingerprint())
    env = CfIsacEnv(scenario, ts_mode=args.ts_mode)
    if (learner.state_dim, learner.action_dim) != \
            (env.state_dim, env.action_dim):
        raise ConfigError("checkpoint dimensions do not fit this scenario")
    action = learner.select_action(env.reset(), noise_scale=0.0)
    beams, layout = decode_action(action, scenario)
    summary = evaluate_decision(scenario, beams, layout)
    row = ResultRow(axis="none", axis_value=0.0, baseline="checkpoint",
                    seed=cfg.seed, worst_crlb=summary["worst_crlb"],
                    nominal_crlb=summary["nominal_crlb"],
                    rate_sum=summary["rate_sum"],
                    violations=summary["violations"])
    write_sweep_csv([row], out / "eval.csv")
    print(f"worst-case CRLB: {summary['worst_crlb']:.6g} m^2, sum rate "
          f"{summary['rate_sum']:.4f}, violations {summary['violations']}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_scenario_config(args)
    out = _out_dir(args)
    values = tuple(float(v) for v in args.values.split(","))
    seeds = tuple(int(s) for s in args.seeds.split(","))
    spec = ExperimentSpec(mode="sweep", axis=args.axis, values=values,
                          baseline=args.baseline, seeds=seeds,
                          out_dir=str(out), ts_mode=args.ts_mode,
                          train_steps=args.train_steps)
    if args.axis == "target_distance":
        rows = run_target_distance_study(spec, cfg)
        write_study_csv(rows, out / "sweep.csv")
        failures = sum(1 for r in rows if r["error"])
    else:
        rows = run_sweep(spec, cfg)
        write_sweep_csv(rows, out / "sweep.csv")
        sweep_chart(rows, out / "sweep.svg")
        failures = sum(1 for r in rows if r.error)
    print(f"{len(rows)} rows written to {out / 'sweep.csv'}"
          + (f" ({failures} failed)" if failures else ""))
    return 0


_COMMANDS = {
    "solve-worst-case": _cmd_solve_worst_case,
    "train": _cmd_train,
    "adapt": _cmd_adapt,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse help/version exits 0; its usage errors are config errors
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, CheckpointError, FileNotFoundError) as exc:
        log.error("%s", exc)
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.exception("runtime failure")
        print(f"runtime failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
