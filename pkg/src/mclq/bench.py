"""Closed-loop benchmark harness with paired random trials and CSV output.

Each trial seeds its initial conditions, human behavior, and sampler from
(master_seed, trial_index) only, so the same trial index sees identical
conditions under every method and every safety-margin cell (paired design:
the controller is the only varying factor).
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from .envs import Env, build_env
from .filter import FilterConfig, filter_step
from .game import step as game_step
from .oracles import DiscretizedGame, brute_force_ne, ilq_solve
from .refine import SamplerConfig

CSV_HEADER = (
    "trial,seed,method,lambda,k_humans,cost,ms_per_action,collisions,"
    "path_length,min_distance,status"
)

METHODS = ("mclq", "lq", "ilq", "ne")


@dataclass(frozen=True)
class ExperimentConfig:
    env: dict
    method: str = "mclq"
    n_trials: int = 100
    master_seed: int = 0
    lam: float = math.inf
    collision_radius: float = 0.5
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    replan_every: int = 1
    warm_start: bool = False
    # stop a trial once the robot is within this distance of its goal;
    # None runs the full horizon (a parked robot racks up contact steps
    # against any pursuing human, which is noise, not a planning failure)
    goal_radius: Optional[float] = None
    ilq_iters: int = 5
    ne_grid_points: int = 3  # grid values per action dimension for the NE oracle
    record_timing: bool = True
    out: Optional[str] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.method == "ne":
            T = int(self.env.get("T", 30))
            grid = self.ne_grid_points ** 2  # both envs use 2-d actions
            if (grid ** T) ** 2 > 10_000_000:
                raise ValueError(
                    "ne method requires an enumerable discretized game; "
                    f"T={T} with {grid} actions/step exceeds the budget"
                )


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    method: str
    lam: float
    k_humans: int
    cost: float
    ms_per_action: float
    collisions: int
    path_length: float
    min_distance: float
    status: str = "ok"

    def csv_row(self) -> str:
        lam = "inf" if math.isinf(self.lam) else f"{self.lam:.10g}"
        return (
            f"{self.trial},{self.seed},{self.method},{lam},{self.k_humans},"
            f"{self.cost:.10g},{self.ms_per_action:.10g},{self.collisions},"
            f"{self.path_length:.10g},{self.min_distance:.10g},{self.status}"
        )


def _axis_grid(bounds: np.ndarray, n: int) -> np.ndarray:
    """Cartesian grid with n values per action dimension."""
    axes = [np.linspace(lo, hi, n) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _make_controller(cfg: ExperimentConfig, env: Env, sampler_seed: int):
    game = env.game
    sampler = replace(cfg.sampler, lam=cfg.lam, seed=sampler_seed)
    fcfg = FilterConfig(
        horizon=game.horizon,
        sampler=sampler,
        nominal_human=env.nominal_w,
        nominal_robot=env.nominal_u,
        scenarios=env.pursuit_scenarios,
        candidates=env.dodge_candidates,
        replan_every=cfg.replan_every,
        warm_start=cfg.warm_start,
        refine_enabled=cfg.method == "mclq",
    )
    if cfg.method in ("mclq", "lq"):
        carry = {"rec": None}

        def controller(x, t):
            u, rec = filter_step(
                game, x, fcfg, carry["rec"], timestep=t, sampler_seed=sampler_seed + t
            )
            carry["rec"] = rec
            return u, rec.error

        return controller
    if cfg.method == "ilq":

        def controller(x, t):
            res = ilq_solve(
                game, x, iters=cfg.ilq_iters, nominal_w=env.nominal_w(x, game.horizon)
            )
            return res.trajectory.u[0], None

        return controller
    # ne: brute-force open-loop min-max on a per-dimension discretization
    dg = DiscretizedGame(
        base=game,
        robot_grid=_axis_grid(game.robot_bounds, cfg.ne_grid_points),
        human_grid=_axis_grid(game.human_bounds, cfg.ne_grid_points),
    )

    def controller(x, t):
        u_seq, _, _, _ = brute_force_ne(dg, x)
        return u_seq[0], None

    return controller


def run_trial(cfg: ExperimentConfig, trial: int) -> TrialRecord:
    ss = np.random.SeedSequence([cfg.master_seed, trial])
    env_seed, human_seed, sampler_seed = (
        int(s.generate_state(1)[0]) for s in ss.spawn(3)
    )
    env = build_env(cfg.env, np.random.default_rng(env_seed))
    human_rng = np.random.default_rng(human_seed)
    game = env.game
    controller = _make_controller(cfg, env, sampler_seed)

    x = env.x0.copy()
    u_last = np.zeros(game.robot_dim)
    cost = 0.0
    collisions = 0
    path_length = 0.0
    min_distance = math.inf
    plan_time = 0.0
    status = "ok"
    try:
        for t in range(game.horizon):
            t0 = time.perf_counter()
            u, err = controller(x, t)
            plan_time += time.perf_counter() - t0
            if err is not None:
                status = f"error:{err.split(':')[0]}"
            w = env.sample_human_actions(x, u_last, human_rng)
            cost += float(game.stage_cost(x, u, w))
            x_next = game_step(game, x, u, w)
            path_length += float(np.linalg.norm(env.robot_pos(x_next) - env.robot_pos(x)))
            if len(env.humans):
                d = float(
                    np.min(np.linalg.norm(env.human_pos(x_next) - env.robot_pos(x_next), axis=1))
                )
                min_distance = min(min_distance, d)
                if d < cfg.collision_radius:
                    collisions += 1
            x = x_next
            u_last = u
            if (
                cfg.goal_radius is not None
                and env.robot_goal is not None
                and np.linalg.norm(env.robot_pos(x) - env.robot_goal) < cfg.goal_radius
            ):
                break
        cost += float(game.terminal_cost(x))
    except Exception as err:
        status = f"error:{type(err).__name__}"
        cost = float("nan")
    ms = (plan_time / game.horizon) * 1e3 if cfg.record_timing else 0.0
    return TrialRecord(
        trial=trial,
        seed=env_seed,
        method=cfg.method,
        lam=cfg.lam,
        k_humans=len(env.humans),
        cost=cost,
        ms_per_action=ms,
        collisions=collisions,
        path_length=path_length,
        min_distance=min_distance if math.isfinite(min_distance) else 0.0,
        status=status,
    )


def _n_workers() -> int:
    cap = os.environ.get("BENCH_THREADS")
    if cap:
        return max(1, int(cap))
    return min(8, os.cpu_count() or 1)


def run_experiment(cfg: ExperimentConfig) -> List[TrialRecord]:
    """Run all trials (worker pool, output ordered by trial index)."""
    with ThreadPoolExecutor(max_workers=_n_workers()) as pool:
        records = list(pool.map(lambda i: run_trial(cfg, i), range(cfg.n_trials)))
    if cfg.out:
        write_csv(records, cfg.out)
    return records


def lambda_sweep(
    cfg: ExperimentConfig,
    lambdas: Sequence[float],
    k_humans: Sequence[int],
) -> List[TrialRecord]:
    """Paired grid over (lambda, k): shared trial seeds across every cell."""
    records: List[TrialRecord] = []
    for k in k_humans:
        for lam in lambdas:
            cell = replace(
                cfg, lam=lam, env={**cfg.env, "k": int(k)}, out=None
            )
            records.extend(run_experiment(cell))
    if cfg.out:
        write_csv(records, cfg.out)
    return records


def write_csv(records: Sequence[TrialRecord], path: str) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fh.write(r.csv_row() + "\n")


def read_csv(path: str) -> List[TrialRecord]:
    records = []
    with open(path) as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(
                TrialRecord(
                    trial=int(row["trial"]),
                    seed=int(row["seed"]),
                    method=row["method"],
                    lam=float(row["lambda"]),
                    k_humans=int(row["k_humans"]),
                    cost=float(row["cost"]),
                    ms_per_action=float(row["ms_per_action"]),
                    collisions=int(row["collisions"]),
                    path_length=float(row["path_length"]),
                    min_distance=float(row["min_distance"]),
                    status=row["status"],
                )
            )
    return records


def summarize(records: Sequence[TrialRecord]) -> dict:
    """Per-(method, lambda, k) stats plus Welch t-tests between methods."""
    metrics = ("cost", "ms_per_action", "collisions", "path_length", "min_distance")
    groups: dict = {}
    for r in records:
        if not r.status.startswith("ok"):
            continue
        groups.setdefault((r.method, r.lam, r.k_humans), []).append(r)
    cells = {}
    for key, rs in groups.items():
        cell = {"count": len(rs)}
        for m in metrics:
            vals = np.array([getattr(r, m) for r in rs], dtype=float)
            cell[m] = {
                "mean": float(np.mean(vals)),
                "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
            }
        cells[key] = cell
    # Welch t-tests on cost for method pairs inside the same (lambda, k) cell
    welch = {}
    keys = sorted(groups, key=str)
    for i, a in enumerate(keys):
        for b in keys[i + 1 :]:
            if a[1:] != b[1:] or a[0] == b[0]:
                continue
            xa = [r.cost for r in groups[a]]
            xb = [r.cost for r in groups[b]]
            if len(xa) > 1 and len(xb) > 1:
                t, p = stats.ttest_ind(xa, xb, equal_var=False)
                welch[f"{a[0]}-vs-{b[0]}@lam={a[1]:g},k={a[2]}"] = {
                    "t": float(t),
                    "p": float(p),
                }
    return {"cells": cells, "welch": welch}


def format_summary(summary: dict) -> str:
    out = io.StringIO()
    out.write(
        f"{'method':>6} {'lambda':>8} {'k':>3} {'n':>5} "
        f"{'cost':>12} {'±':>10} {'ms/act':>9} {'collisions':>10} {'path':>9}\n"
    )
    for (method, lam, k), cell in sorted(summary["cells"].items(), key=str):
        lam_s = "inf" if math.isinf(lam) else f"{lam:g}"
        out.write(
            f"{method:>6} {lam_s:>8} {k:>3} {cell['count']:>5} "
            f"{cell['cost']['mean']:>12.4f} {cell['cost']['std']:>10.4f} "
            f"{cell['ms_per_action']['mean']:>9.2f} "
            f"{cell['collisions']['mean']:>10.3f} "
            f"{cell['path_length']['mean']:>9.3f}\n"
        )
    for name, res in summary["welch"].items():
        out.write(f"welch {name}: t={res['t']:.3f} p={res['p']:.4g}\n")
    return out.getvalue()
