"""Command line entry point: `mlbsim run` executes a scenario sweep and
`mlbsim summarize` rebuilds the comparison table from a results directory."""
from __future__ import annotations

import argparse

from .experiment import parse_config, run_experiment, summarize

QUICK_PROFILE = {"seeds": (1, 2, 3), "episodes": 40, "ue_counts": (30,)}


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(",") if part != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _algo_list(text: str) -> tuple:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlbsim",
        description="Self-balancing cellular downlink simulator with a "
                    "clipped double Q-learning load balancer and A3/ReBUHA "
                    "baselines.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario sweep")
    run.add_argument("--config", default=None, metavar="PATH",
                     help="JSON config with sim/agent/reward/plan sections")
    run.add_argument("--algo", type=_algo_list, default=None,
                     help="comma-separated subset of cdql,a3,rebuha")
    run.add_argument("--ues", type=_int_list, default=None,
                     help="comma-separated UE counts")
    run.add_argument("--mobility-fraction", type=float, default=None)
    run.add_argument("--speed", type=float, default=None, metavar="MPS")
    run.add_argument("--seeds", type=_int_list, default=None,
                     help="comma-separated run seeds")
    run.add_argument("--episodes", type=int, default=None)
    run.add_argument("--steps", type=int, default=None,
                     help="agent steps per episode")
    run.add_argument("--out", default=None, metavar="DIR")
    run.add_argument("--quick", action="store_true",
                     help="small profile: seeds 1-3, 40 episodes, 30 UEs")
    run.add_argument("--quiet", action="store_true")

    summ = sub.add_parser("summarize", help="rebuild comparison.csv from runs")
    summ.add_argument("results_dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "summarize":
        summarize(args.results_dir)
        return 0

    overrides = {}
    if args.quick:
        overrides.update(QUICK_PROFILE)
    flag_map = {
        "algorithms": args.algo,
        "ue_counts": args.ues,
        "mobility_fraction": args.mobility_fraction,
        "speed_mps": args.speed,
        "seeds": args.seeds,
        "episodes": args.episodes,
        "steps_per_episode": args.steps,
        "out_dir": args.out,
    }
    for key, value in flag_map.items():
        if value is not None:
            overrides[key] = value
    sim_cfg, agent_cfg, reward_cfg, plan = parse_config(args.config, overrides)
    run_experiment(plan, sim_cfg, agent_cfg, reward_cfg, quiet=args.quiet)
    if not args.quiet:
        print(f"results written under {plan.out_dir}", flush=True)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
