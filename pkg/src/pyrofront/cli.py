"""Command-line front door.

Subcommands:
    run        full experiment (scan episode + tracking episodes)
    scan-demo  scan phase only, reports post-scan coverage
    gradcheck  analytic-vs-finite-difference verification of the value net
    metrics    recompute summary aggregates from episode logs

The default output root is ./runs, overridable with PYROFRONT_OUT; --out wins
over both.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import artifacts
from .config import ConfigError, config_from_dict, load_config
from .mission import run_experiment_in_memory
from .nn import TwoBranchQNet, gradient_check
from .seeding import ROLE_NET_INIT, rng_stream

_SCENARIO_ALIASES = {"static": "static_batch", "static_batch": "static_batch",
                     "dynamic": "dynamic"}


def _common_run_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="JSON config file")
    parser.add_argument("--mode", choices=["observation", "belief"], default=None)
    parser.add_argument("--scenario", choices=sorted(_SCENARIO_ALIASES), default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--episodes", type=int, default=None)
    parser.add_argument("--out", type=str, default=None, help="run directory")
    parser.add_argument("--reduced-net", dest="reduced_net", action="store_true",
                        default=None, help="thin-channel network (default)")
    parser.add_argument("--full-net", dest="reduced_net", action="store_false",
                        help="full-width network (8x8x256 feature block)")
    parser.add_argument("--snapshot-maps", action="store_true", default=None)


def _overrides_from_args(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.scenario is not None:
        overrides["scenario"] = _SCENARIO_ALIASES[args.scenario]
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "episodes", None) is not None:
        overrides["num_episodes"] = args.episodes
    if getattr(args, "reduced_net", None) is not None:
        overrides["train.reduced_net"] = args.reduced_net
    if getattr(args, "snapshot_maps", None) is not None:
        overrides["snapshot_maps"] = True
    return overrides


def _run_one(cfg_dict: dict, run_dir: str | None) -> str:
    cfg = config_from_dict(cfg_dict)
    path = artifacts.run_experiment(cfg, run_dir)
    return str(path)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _overrides_from_args(args))
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        jobs = []
        for seed in seeds:
            c = config_from_dict(cfg.to_dict())
            c.seed = seed
            c.validate()
            out = (Path(args.out) / artifacts.run_dir_name(c)) if args.out else None
            jobs.append((c.to_dict(), str(out) if out else None))
        with ProcessPoolExecutor() as pool:
            for path in pool.map(_run_one, *zip(*jobs)):
                print(f"run complete: {path}")
        return 0
    run_dir = artifacts.run_experiment(cfg, args.out)
    summary = json.loads((run_dir / "summary.json").read_text())
    print(f"run complete: {run_dir}")
    print(f"  episodes:          {summary['num_episodes']}")
    print(f"  coverage ratio:    {summary['coverage_ratio']:.4f}")
    print(f"  time-average MIA:  {summary['time_average_mia']:.4f}")
    print(f"  terminations:      {summary['termination_causes']}")
    return 0


def cmd_scan_demo(args: argparse.Namespace) -> int:
    overrides = _overrides_from_args(args)
    overrides["num_episodes"] = 1
    cfg = load_config(args.config, overrides)
    result = run_experiment_in_memory(cfg)
    ep = result.episodes[0]
    print(f"scan steps:        {ep.steps}")
    print(f"termination:       {ep.termination}")
    print(f"coverage ratio:    {ep.coverage:.4f}")
    if args.out:
        run_dir = artifacts.run_experiment(cfg, args.out)
        print(f"artifacts: {run_dir}")
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    net = TwoBranchQNet(args.grid, rng_stream(args.seed, ROLE_NET_INIT),
                        reduced=not args.full_net)
    err = gradient_check(net, np.random.default_rng(args.seed),
                         n_samples=args.samples)
    print(f"max relative gradient error over {args.samples} sampled "
          f"parameters: {err:.3e}")
    passed = err < 1e-4
    print("PASS" if passed else "FAIL")
    return 0 if passed else 1


def cmd_metrics(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    ep_dir = run_dir / "episodes"
    if not ep_dir.is_dir():
        print(f"error: no episodes directory under {run_dir}", file=sys.stderr)
        return 1
    rows = []
    for path in sorted(ep_dir.glob("ep_*.csv"),
                       key=lambda p: int(p.stem.split("_")[1])):
        if path.stem.count("_") != 1:
            continue
        with open(path, newline="") as fh:
            data = list(csv.DictReader(fh))
        if not data:
            continue
        rows.append({
            "episode": int(path.stem.split("_")[1]),
            "steps": len(data),
            "coverage": float(data[-1]["coverage"]),
            "time_average_mia": float(np.mean([float(r["mia"]) for r in data])),
        })
    recomputed = {
        "num_episodes": len(rows),
        "coverage_ratio": float(np.mean([r["coverage"] for r in rows])) if rows else 0.0,
        "time_average_mia": float(np.mean([r["time_average_mia"] for r in rows])) if rows else 0.0,
        "episodes": rows,
    }
    print(json.dumps(recomputed, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pyrofront",
                                     description="Wildfire-monitoring testbed")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a full experiment")
    _common_run_args(p_run)
    p_run.add_argument("--seeds", type=str, default=None,
                       help="comma-separated seeds; runs one experiment per seed")
    p_run.set_defaults(func=cmd_run)

    p_scan = sub.add_parser("scan-demo", help="run the scan phase only")
    _common_run_args(p_scan)
    p_scan.set_defaults(func=cmd_scan_demo)

    p_grad = sub.add_parser("gradcheck", help="verify network gradients")
    p_grad.add_argument("--grid", type=int, default=16)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--samples", type=int, default=200)
    p_grad.add_argument("--full-net", action="store_true")
    p_grad.set_defaults(func=cmd_gradcheck)

    p_met = sub.add_parser("metrics", help="recompute summaries from logs")
    p_met.add_argument("--run-dir", type=str, required=True)
    p_met.set_defaults(func=cmd_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # aborts leave partial artifacts behind
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
