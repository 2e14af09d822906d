"""Command-line entry points: the `bench` experiment harness and `serve`."""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .bench import (
    ExperimentConfig,
    format_summary,
    lambda_sweep,
    read_csv,
    run_experiment,
    summarize,
    write_csv,
)
from .envs import load_env_config
from .refine import SamplerConfig


def _parse_lambda(text: str) -> float:
    return math.inf if text in ("inf", "Inf", "INF") else float(text)


def _parse_humans(text: str):
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


def _sampler_from_args(args) -> SamplerConfig:
    return SamplerConfig(
        beta=args.beta,
        greedy=args.greedy,
        outer_iters=args.outer,
        inner_iters=args.inner,
        perturb_scale_u=args.scale_u,
        perturb_scale_w=args.scale_w,
    )


def _add_sampler_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=float, default=10.0)
    p.add_argument("--greedy", action="store_true")
    p.add_argument("--outer", type=int, default=100, help="outer MH iterations")
    p.add_argument("--inner", type=int, default=20, help="inner MH iterations")
    p.add_argument("--scale-u", type=float, default=0.1, dest="scale_u")
    p.add_argument("--scale-w", type=float, default=0.1, dest="scale_w")


def bench_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bench", description="MCLQ benchmark harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run paired trials for one method")
    run_p.add_argument("--config", default=None, help="env config (JSON/TOML)")
    run_p.add_argument("--env", default="point_mass")
    run_p.add_argument("--method", default="mclq", choices=["mclq", "lq", "ilq", "ne"])
    run_p.add_argument("--trials", type=int, default=100)
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--lambda", dest="lam", type=_parse_lambda, default=math.inf)
    run_p.add_argument("--replan-every", type=int, default=1)
    run_p.add_argument("--no-timing", action="store_true",
                       help="write zero ms/action for byte-reproducible output")
    run_p.add_argument("--out", required=True)
    _add_sampler_args(run_p)

    sweep_p = sub.add_parser("sweep", help="lambda x humans sweep")
    sweep_p.add_argument("--config", default=None)
    sweep_p.add_argument("--lambdas", default="0,0.5,1,2,4,inf")
    sweep_p.add_argument("--humans", default="1..10")
    sweep_p.add_argument("--trials", type=int, default=100)
    sweep_p.add_argument("--seed", type=int, default=0)
    sweep_p.add_argument("--no-timing", action="store_true")
    sweep_p.add_argument("--out", required=True)
    _add_sampler_args(sweep_p)

    sum_p = sub.add_parser("summarize", help="summary stats of a results CSV")
    sum_p.add_argument("csv")
    sum_p.add_argument("--json", action="store_true")

    args = parser.parse_args(argv)

    if args.command == "summarize":
        summary = summarize(read_csv(args.csv))
        if args.json:
            print(json.dumps(summary, default=str, indent=2))
        else:
            print(format_summary(summary), end="")
        return 0

    env_cfg = load_env_config(args.config) if args.config else {"env": args.env}
    cfg = ExperimentConfig(
        env=env_cfg,
        method=getattr(args, "method", "mclq"),
        n_trials=args.trials,
        master_seed=args.seed,
        lam=getattr(args, "lam", math.inf),
        sampler=_sampler_from_args(args),
        replan_every=getattr(args, "replan_every", 1),
        record_timing=not args.no_timing,
        out=args.out,
    )
    if args.command == "run":
        records = run_experiment(cfg)
    else:
        lambdas = [_parse_lambda(s) for s in args.lambdas.split(",")]
        records = lambda_sweep(cfg, lambdas, _parse_humans(args.humans))
    print(format_summary(summarize(records)), end="")
    print(f"wrote {len(records)} records to {cfg.out}")
    return 0


def serve_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="serve", description="MCLQ interactive arena server"
    )
    parser.add_argument("--port", type=int, default=8787)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--env", default="point_mass")
    parser.add_argument("--tick-ms", type=float, default=100.0)
    parser.add_argument("--horizon", type=int, default=12)
    parser.add_argument("--lambda", dest="lam", type=_parse_lambda, default=4.0)
    args = parser.parse_args(argv)

    import uvicorn

    from .service import SessionConfig, create_app

    cfg = SessionConfig(
        env={"env": args.env, "T": args.horizon},
        tick_ms=args.tick_ms,
        lam=args.lam,
    )
    uvicorn.run(create_app(cfg), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    sys.exit(bench_main())
