"""Ground-truth and comparison baselines.

``brute_force_ne`` exhaustively solves the open-loop min-max problem of a
discretized game (sequence-space, matching how the policies are defined
over action sequences); ``ilq_solve`` is the iterated-LQ baseline that
relinearizes around the current trajectory until it stops moving.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .game import GameDefinition, JointTrajectory, State, cumulative_cost
from .lq import augment_affine, gains_to_trajectory, linearize_quadraticize, solve_coupled_riccati

EVAL_BUDGET = 10_000_000


class BudgetError(RuntimeError):
    """Enumeration would exceed the hard evaluation budget."""


@dataclass(frozen=True)
class DiscretizedGame:
    """A game restricted to finite per-step action sets for both agents."""

    base: GameDefinition
    robot_grid: np.ndarray  # (n_u, robot_dim)
    human_grid: np.ndarray  # (n_w, human_dim)

    def __post_init__(self):
        object.__setattr__(self, "robot_grid", np.asarray(self.robot_grid, dtype=float))
        object.__setattr__(self, "human_grid", np.asarray(self.human_grid, dtype=float))
        if len(self.robot_grid) == 0 or len(self.human_grid) == 0:
            raise ValueError("action grids must be non-empty")


def required_evaluations(dg: DiscretizedGame) -> int:
    T = dg.base.horizon
    return (len(dg.robot_grid) ** T) * (len(dg.human_grid) ** T)


def snap_to_grid(actions: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Round each per-step action to the nearest grid point (Euclidean)."""
    diff = actions[:, None, :] - grid[None, :, :]
    idx = np.argmin(np.einsum("tgk,tgk->tg", diff, diff), axis=1)
    return grid[idx]


def brute_force_ne(
    dg: DiscretizedGame, x0: State
) -> Tuple[np.ndarray, np.ndarray, float, int]:
    """Open-loop min-max over all grid action sequences.

    Returns (u_seq, w_seq, value, evaluations) where w_seq attains the max
    against u_seq and u_seq minimizes that max. Ties break toward the
    lexicographically first sequence (enumeration order).
    """
    need = required_evaluations(dg)
    if need > EVAL_BUDGET:
        raise BudgetError(
            f"enumeration needs {need} cost evaluations (budget {EVAL_BUDGET})"
        )
    game = dg.base
    T = game.horizon
    x0 = np.asarray(x0, dtype=float)
    w_seqs = [
        np.array(ws) for ws in itertools.product(dg.human_grid, repeat=T)
    ]
    evaluations = 0
    best_value = np.inf
    best_u = best_w = None
    for us in itertools.product(dg.robot_grid, repeat=T):
        u_seq = np.array(us)
        worst = -np.inf
        worst_w = None
        for w_seq in w_seqs:
            c = cumulative_cost(game, JointTrajectory(x0=x0, u=u_seq, w=w_seq))
            evaluations += 1
            if c > worst:
                worst = c
                worst_w = w_seq
        if worst < best_value:
            best_value = worst
            best_u = u_seq
            best_w = worst_w
    return best_u, best_w, float(best_value), evaluations


def maximin_value(dg: DiscretizedGame, x0: State) -> float:
    """max over w of min over u on the same grids (weak-duality partner)."""
    need = required_evaluations(dg)
    if need > EVAL_BUDGET:
        raise BudgetError(
            f"enumeration needs {need} cost evaluations (budget {EVAL_BUDGET})"
        )
    game = dg.base
    T = game.horizon
    x0 = np.asarray(x0, dtype=float)
    u_seqs = [np.array(us) for us in itertools.product(dg.robot_grid, repeat=T)]
    best = -np.inf
    for ws in itertools.product(dg.human_grid, repeat=T):
        w_seq = np.array(ws)
        inner = min(
            cumulative_cost(game, JointTrajectory(x0=x0, u=u_seq, w=w_seq))
            for u_seq in u_seqs
        )
        best = max(best, inner)
    return float(best)


def oracle_result_json(u_seq, w_seq, value, evaluations) -> str:
    return json.dumps(
        {
            "value": value,
            "u_seq": np.asarray(u_seq).tolist(),
            "w_seq": np.asarray(w_seq).tolist(),
            "evaluations": evaluations,
        }
    )


@dataclass(frozen=True)
class IlqResult:
    trajectory: JointTrajectory
    cost: float
    cost_history: np.ndarray
    converged: bool
    iterations: int


def ilq_solve(
    game: GameDefinition,
    x0: State,
    iters: int = 10,
    step: float = 1.0,
    nominal_w: Optional[np.ndarray] = None,
    fd_step: float = 1e-4,
    tol: float = 1e-6,
) -> IlqResult:
    """Iterated LQ: relinearize about the current trajectory and re-solve.

    Each iteration blends toward the new LQ solution with the given step
    size; the step is halved (up to 4 times) whenever the blended joint
    trajectory's cost increases, which keeps the final cost at or below the
    first iterate's.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    T = game.horizon
    x0 = np.asarray(x0, dtype=float)
    if nominal_w is None:
        nominal_w = np.zeros((T, game.human_dim))
    current = JointTrajectory(
        x0=x0, u=np.zeros((T, game.robot_dim)), w=np.asarray(nominal_w, dtype=float)
    )
    cost = cumulative_cost(game, current)
    history = []
    converged = False
    it = 0
    for it in range(1, iters + 1):
        lq = augment_affine(linearize_quadraticize(game, current, fd_step))
        gains = solve_coupled_riccati(lq)
        candidate = gains_to_trajectory(gains, game, x0, lq)
        alpha = step
        accepted = None
        for _ in range(5):
            blended = JointTrajectory(
                x0=x0,
                u=current.u + alpha * (candidate.u - current.u),
                w=current.w + alpha * (candidate.w - current.w),
            )
            c = cumulative_cost(game, blended)
            if it == 1 or c <= cost:
                accepted = (blended, c)
                break
            alpha *= 0.5
        if accepted is None:
            history.append(cost)
            converged = True
            break
        change = max(
            float(np.max(np.abs(accepted[0].u - current.u))),
            float(np.max(np.abs(accepted[0].w - current.w))),
        )
        current, cost = accepted
        history.append(cost)
        if change < tol:
            converged = True
            break
    return IlqResult(
        trajectory=current,
        cost=cost,
        cost_history=np.array(history),
        converged=converged,
        iterations=it,
    )
