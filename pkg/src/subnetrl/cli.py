"""Command-line entry point.

Sub-commands: train, eval, sweep-density, sweep-clutter, baseline,
oracle-check. Flags mirror config keys and override the config file; the
SUBNETRL_OUT environment variable overrides the output directory. Exit
codes: 0 ok, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import harness
from .config import ConfigError, ExperimentConfig


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML/JSON experiment config file")
    p.add_argument("--mode", help="f-maddqn|f-mappo|c-...|d-...|cgc|greedy|random")
    p.add_argument("--tau-agg", type=int, dest="tau_agg", help="aggregation interval (steps)")
    p.add_argument("--orf", help="observation reduction: full|mean|max|median|min")
    p.add_argument("--n", type=int, help="number of subnetworks")
    p.add_argument("--seed", type=int, action="append", help="seed (repeatable)")
    p.add_argument("--episodes", type=int, help="training episodes")
    p.add_argument("--out", help="output directory")


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    cfg = cfg.with_overrides(
        train__mode=args.mode if args.mode in harness.RL_MODES else None,
        train__tau_agg=args.tau_agg,
        train__episodes=args.episodes,
        train__seeds=tuple(args.seed) if args.seed else None,
        observation__orf=args.orf,
        env__n_subnetworks=args.n,
        train__output_dir=os.environ.get("SUBNETRL_OUT") or args.out,
    )
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="subnetrl",
        description="Channel-allocation experiments for mobile in-factory subnetworks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "eval", "sweep-density", "sweep-clutter", "baseline", "oracle-check"):
        p = sub.add_parser(name)
        _add_common(p)
        if name in ("eval", "sweep-density", "sweep-clutter"):
            p.add_argument("--checkpoint", help="weight checkpoint file")
        if name == "sweep-density":
            p.add_argument(
                "--n-values", default="10,20,30,40,50", help="comma-separated N values"
            )
        if name == "oracle-check":
            p.add_argument("--snapshots", type=int, default=100)

    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        out = cfg.train.output_dir
        if args.command == "train":
            artifacts = harness.run_train(cfg, out_dir=out)
            for seed, art in artifacts.items():
                final = art["records"].mean_rewards()[-50:].mean()
                print(f"seed {seed}: final mean reward {final:.3f} -> {art['checkpoint']}")
        elif args.command == "eval":
            rows = harness.run_eval(cfg, checkpoint=args.checkpoint, mode=args.mode, out_dir=out)
            for row in rows:
                print(f"{row['method']} p{row['percentile']:02d} "
                      f"{row['rate_bps'] / 1e6:.3f} Mbps ({row['rate_bps_hz']:.3f} bps/Hz)")
        elif args.command == "sweep-density":
            n_values = [int(v) for v in args.n_values.split(",")]
            rows = harness.run_density_sweep(
                cfg, checkpoint=args.checkpoint, n_values=n_values, out_dir=out
            )
            for row in rows:
                print(f"N={row['n_subnetworks']:3d} {row['method']:<10s} "
                      f"{row['avg_rate_bps'] / 1e6:.3f} Mbps")
        elif args.command == "sweep-clutter":
            rows = harness.run_clutter_sweep(cfg, checkpoint=args.checkpoint, out_dir=out)
            for row in rows:
                print(f"{row['scenario']:<8s} {row['method']:<10s} "
                      f"min {row['min_rate_bps'] / 1e6:.3f} avg {row['avg_rate_bps'] / 1e6:.3f} "
                      f"max {row['max_rate_bps'] / 1e6:.3f} Mbps")
        elif args.command == "baseline":
            mode = args.mode or "greedy"
            if mode not in harness.BASELINE_MODES:
                raise ConfigError(f"baseline mode must be one of {harness.BASELINE_MODES}")
            rows = harness.run_eval(cfg, mode=mode, out_dir=out)
            for row in rows:
                print(f"{row['method']} p{row['percentile']:02d} "
                      f"{row['rate_bps'] / 1e6:.3f} Mbps")
        elif args.command == "oracle-check":
            report = harness.run_oracle_check(cfg, n_snapshots=args.snapshots, out_dir=out)
            for key, value in report.items():
                print(f"{key}: {value}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
