"""Nested Metropolis-Hastings refinement of a joint action trajectory.

An inner chain perturbs the human actions uphill in cost (worst case), an
outer chain perturbs the robot actions downhill, sharing a single running
cost. Proposals outside the action bounds or outside the safety margin
around the nominal human prediction are rejected before any acceptance
test; rejected proposals still consume their loop iteration so a call costs
at most M*(N+1) cost evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .game import GameDefinition, JointTrajectory, clamp, cumulative_cost, in_bounds

# caps on the scenario set kept for the final minimax selection; the cross
# evaluation at the end costs len(candidates) * len(pool) rollouts
_POOL_CAP = 12
_CAND_CAP = 40


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs of the nested sampler.

    ``greedy`` stands in for the infinite-inverse-temperature limit (only
    non-worsening moves accepted) without risking overflow in exp. ``lam``
    is the squared-norm bound on how far the sampled human trajectory may
    stray from the nominal prediction; ``math.inf`` disables it.
    ``snap_u``/``snap_w`` optionally round candidate action trajectories
    onto a finite grid before evaluation (used when comparing against
    discretized oracles).
    """

    beta: float = 10.0
    greedy: bool = False
    outer_iters: int = 100
    inner_iters: int = 20
    lam: float = math.inf
    perturb_scale_u: float = 0.1
    perturb_scale_w: float = 0.1
    seed: int = 0
    snap_u: Optional[Callable[[np.ndarray], np.ndarray]] = None
    snap_w: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.outer_iters < 1 or self.inner_iters < 1:
            raise ValueError("outer_iters and inner_iters must be >= 1")
        if self.perturb_scale_u <= 0 or self.perturb_scale_w <= 0:
            raise ValueError("perturbation scales must be strictly positive")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not self.greedy and not math.isfinite(self.beta):
            raise ValueError("non-finite beta: use greedy=True instead")


@dataclass(frozen=True)
class RefineResult:
    refined: JointTrajectory
    final_cost: float
    cost_trace: np.ndarray  # running cost after each outer iteration
    inner_accept_rate: float
    outer_accept_rate: float
    margin_rejections: int

    def to_json(self) -> str:
        import json

        return json.dumps(
            {
                "refined": {
                    "x0": self.refined.x0.tolist(),
                    "u": self.refined.u.tolist(),
                    "w": self.refined.w.tolist(),
                },
                "final_cost": self.final_cost,
                "cost_trace": self.cost_trace.tolist(),
                "inner_accept_rate": self.inner_accept_rate,
                "outer_accept_rate": self.outer_accept_rate,
                "margin_rejections": self.margin_rejections,
            }
        )


def perturb(
    traj: np.ndarray,
    delta: np.ndarray,
    scale,
    rng: np.random.Generator,
) -> np.ndarray:
    """Propose a new accumulated perturbation.

    Noise is added to ``delta`` on a uniformly chosen contiguous window of
    timesteps. Half the proposals use white Gaussian noise; the other half
    add one Gaussian-drawn direction held constant across the window, so
    the chain can move coherent multi-step deviations (a sustained swerve)
    instead of only jitter. Both components are zero-mean and symmetric,
    so the Metropolis ratio needs no correction.
    """
    T = len(traj)
    cand = delta.copy()
    length = int(rng.integers(1, T + 1))
    start = int(rng.integers(0, T - length + 1))
    if rng.random() < 0.5:
        cand[start : start + length] += scale * rng.standard_normal(
            (length, traj.shape[1])
        )
    else:
        cand[start : start + length] += scale * rng.standard_normal(traj.shape[1])
    return cand


def inner_accept(J_new: float, J_old: float, beta: float, eta: float,
                 greedy: bool = False) -> bool:
    """Inner (maximizing) test: accept iff exp(beta (J_new - J_old)) > eta."""
    d = J_new - J_old
    if greedy:
        return d >= 0.0
    if d >= 0.0:
        return True  # exp >= 1 > eta
    return math.exp(beta * d) > eta


def outer_accept(J_old: float, J_new: float, beta: float, eta: float,
                 greedy: bool = False) -> bool:
    """Outer (minimizing) test: accept iff exp(beta (J_old - J_new)) > eta."""
    d = J_old - J_new
    if greedy:
        return d >= 0.0
    if d >= 0.0:
        return True
    return math.exp(beta * d) > eta


def within_margin(nominal_w: np.ndarray, candidate_w: np.ndarray,
                  lam: float) -> bool:
    """Squared Frobenius distance between action sequences bounded by lam."""
    if math.isinf(lam):
        return True
    diff = nominal_w - candidate_w
    return float(np.sum(diff * diff)) <= lam


def _project_to_margin(xi_w: np.ndarray, nominal_w: np.ndarray,
                       lam: float) -> np.ndarray:
    """Initial human perturbation pulling the seed inside the margin set.

    The LQ seed's human trajectory may already violate the margin (always,
    when lam = 0); start the chain at the closest point of the feasible
    ball instead so every intermediate state satisfies the constraint.
    """
    diff = nominal_w - xi_w
    dist2 = float(np.sum(diff * diff))
    if dist2 <= lam:
        return np.zeros_like(xi_w)
    if lam == 0.0 or dist2 == 0.0:
        return diff
    shrink = 1.0 - math.sqrt(lam / dist2)
    return diff * shrink


def refine(
    game: GameDefinition,
    seed_traj: JointTrajectory,
    nominal_w: np.ndarray,
    cfg: SamplerConfig,
    extra_u: Optional[list] = None,
    response_fn: Optional[Callable[[np.ndarray], list]] = None,
) -> RefineResult:
    """Run the nested sampler from the LQ seed; returns the refined pair.

    ``extra_u`` adds caller-built robot trajectories to the final candidate
    set (a receding-horizon caller passes the shifted incumbent plan and
    the environment's detour candidates, so fresh, carried, and structured
    plans compete under the same scenario set). ``response_fn`` maps a
    candidate robot trajectory to adversary trajectories tailored to it;
    each candidate's worst case is taken over the shared pool plus its own
    responses, which must already satisfy the margin constraint.
    """
    T = game.horizon
    if nominal_w.shape != seed_traj.w.shape:
        raise ValueError(
            f"nominal human trajectory shape {nominal_w.shape} != {seed_traj.w.shape}"
        )
    rng = np.random.default_rng(cfg.seed)
    xi_u = seed_traj.u
    xi_w = seed_traj.w
    delta_u = np.zeros_like(xi_u)
    delta_w = _project_to_margin(xi_w, nominal_w, cfg.lam)

    def cost(du, dw):
        return cumulative_cost(
            game, JointTrajectory(x0=seed_traj.x0, u=xi_u + du, w=xi_w + dw)
        )

    def snap_dw(dw):
        if cfg.snap_w is None:
            return dw
        return cfg.snap_w(xi_w + dw) - xi_w

    def snap_du(du):
        if cfg.snap_u is None:
            return du
        return cfg.snap_u(xi_u + du) - xi_u

    delta_w = snap_dw(delta_w)
    try:
        J0 = cost(delta_u, delta_w)
    except Exception as err:
        raise type(err)(f"outer 0, inner 0: {err}") from err

    trace = np.empty(cfg.outer_iters)
    u_candidates = [delta_u]
    w_pool = [delta_w]
    inner_acc = inner_tests = 0
    outer_acc = outer_tests = 0
    margin_rejections = 0
    for m in range(cfg.outer_iters):
        for n in range(cfg.inner_iters):
            cand = snap_dw(perturb(xi_w, delta_w, cfg.perturb_scale_w, rng))
            w_cand = xi_w + cand
            if not within_margin(nominal_w, w_cand, cfg.lam) or not in_bounds(
                w_cand, game.human_bounds
            ):
                margin_rejections += 1
                continue
            try:
                J_w = cost(delta_u, cand)
            except Exception as err:
                raise type(err)(f"outer {m}, inner {n}: {err}") from err
            inner_tests += 1
            if inner_accept(J_w, J0, cfg.beta, rng.random(), cfg.greedy):
                J0 = J_w
                delta_w = cand
                inner_acc += 1
                w_pool.append(cand)
                if len(w_pool) > _POOL_CAP:
                    w_pool.pop(0)
        cand = snap_du(perturb(xi_u, delta_u, cfg.perturb_scale_u, rng))
        u_cand = xi_u + cand
        if in_bounds(u_cand, game.robot_bounds):
            try:
                J_u = cost(cand, delta_w)
            except Exception as err:
                raise type(err)(f"outer {m}, inner -: {err}") from err
            outer_tests += 1
            if outer_accept(J0, J_u, cfg.beta, rng.random(), cfg.greedy):
                J0 = J_u
                delta_u = cand
                outer_acc += 1
                u_candidates.append(cand)
                if len(u_candidates) > _CAND_CAP:
                    u_candidates.pop(1)  # keep the seed at index 0
        trace[m] = J0

    # the chain's last state is a sample, not a minimizer, and the robot
    # trajectory that best answers one known adversary draw is exactly the
    # brittle one. Treat the adversary states the inner chain visited as a
    # scenario set and hand back the visited robot trajectory whose worst
    # scenario is least bad, paired with that worst-case witness.
    if delta_w is not w_pool[-1]:
        w_pool.append(delta_w)
    if extra_u is not None:
        for u_scn in extra_u:
            u_extra = clamp(np.asarray(u_scn, dtype=float), game.robot_bounds)
            u_candidates.append(u_extra - xi_u)
    best_J = math.inf
    delta_w_wit = delta_w
    for du in u_candidates:
        scenarios = w_pool
        if response_fn is not None:
            scenarios = w_pool + [
                clamp(np.asarray(w_r, dtype=float), game.human_bounds) - xi_w
                for w_r in response_fn(xi_u + du)
            ]
        J_worst = -math.inf
        dw_worst = delta_w
        for dw in scenarios:
            J = cost(du, dw)
            if J > J_worst:
                J_worst = J
                dw_worst = dw
        if J_worst < best_J:
            best_J = J_worst
            delta_u = du
            delta_w_wit = dw_worst
    refined = JointTrajectory(
        x0=seed_traj.x0, u=xi_u + delta_u, w=xi_w + delta_w_wit
    )
    final_cost = cumulative_cost(game, refined)
    return RefineResult(
        refined=refined,
        final_cost=final_cost,
        cost_trace=trace,
        inner_accept_rate=inner_acc / inner_tests if inner_tests else 0.0,
        outer_accept_rate=outer_acc / outer_tests if outer_tests else 0.0,
        margin_rejections=margin_rejections,
    )
