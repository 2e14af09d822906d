"""Finite-horizon zero-sum linear-quadratic game solver.

Builds a local LQ model of a game around a nominal trajectory (Jacobians of
the dynamics, Hessian blocks of the cost, both by central finite
differences) and solves the resulting zero-sum game with alternating
backward Riccati recursions: the worst-case human gain schedule L for a
fixed robot schedule K, then the robust K against that L, iterated to a
fixed point.

Inside the LQ game the cost follows the convention
``x'Qx + u'R_u u - w'R_w w`` so that the maximizing human is bounded
whenever ``R_w - D'PD`` stays positive definite. First-order cost terms
(the model is expanded about a nominal, generally not a cost minimum) are
carried as gradient vectors and folded in through a homogeneous state
coordinate by :func:`augment_affine`, which keeps the solver itself purely
quadratic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from .game import (
    GameDefinition,
    JointTrajectory,
    NumericError,
    State,
    clamp,
    rollout,
)


@dataclass(frozen=True)
class LqApproximation:
    """Per-timestep LQ model about ``nominal``.

    ``A, B, D`` have length T; ``Q`` and ``q`` (state-cost gradients) have
    length T+1, with the last entry taken from the terminal cost. When
    ``augmented`` is true the state carries a trailing homogeneous
    coordinate fixed at 1 and the gradients are already folded into Q.
    """

    A: List[np.ndarray]
    B: List[np.ndarray]
    D: List[np.ndarray]
    Q: List[np.ndarray]
    Ru: List[np.ndarray]
    Rw: List[np.ndarray]
    q: List[np.ndarray]
    nominal: JointTrajectory
    nominal_states: np.ndarray
    augmented: bool = False

    @property
    def horizon(self) -> int:
        return len(self.A)

    @property
    def state_dim(self) -> int:
        return self.A[0].shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "A": [m.tolist() for m in self.A],
                "B": [m.tolist() for m in self.B],
                "D": [m.tolist() for m in self.D],
                "Q": [m.tolist() for m in self.Q],
                "Ru": [m.tolist() for m in self.Ru],
                "Rw": [m.tolist() for m in self.Rw],
                "q": [v.tolist() for v in self.q],
                "augmented": self.augmented,
            }
        )


@dataclass(frozen=True)
class GainSchedule:
    """Time-varying saddle-point feedback gains and value matrices.

    ``u = u_nom - K[t] dz`` and ``w = w_nom - L[t] dz`` where dz is the
    (possibly homogeneous-augmented) deviation from the nominal state.
    ``eig_failures`` lists timesteps where the disturbance-penalty
    condition min-eig(R_w - D'PD) > 0 failed and the human channel fell
    back to L = 0 (plain LQR at that step); any failure clears
    ``converged``.
    """

    K: List[np.ndarray]
    L: List[np.ndarray]
    P: List[np.ndarray]
    converged: bool
    iterations: int
    eig_failures: tuple = ()

    def to_json(self) -> str:
        return json.dumps(
            {
                "K": [m.tolist() for m in self.K],
                "L": [m.tolist() for m in self.L],
                "P": [m.tolist() for m in self.P],
                "converged": self.converged,
                "iterations": self.iterations,
                "eig_failures": list(self.eig_failures),
            }
        )


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def _steps(v: np.ndarray, rel: float) -> np.ndarray:
    return rel * (1.0 + np.abs(v))


def fd_jacobian(f: Callable, v: np.ndarray, rel: float) -> np.ndarray:
    """Central-difference Jacobian of vector-valued f at v."""
    h = _steps(v, rel)
    cols = []
    for i in range(len(v)):
        vp, vm = v.copy(), v.copy()
        vp[i] += h[i]
        vm[i] -= h[i]
        cols.append((f(vp) - f(vm)) / (2.0 * h[i]))
    return np.stack(cols, axis=1)


def fd_gradient(f: Callable, v: np.ndarray, rel: float) -> np.ndarray:
    h = _steps(v, rel)
    g = np.empty(len(v))
    for i in range(len(v)):
        vp, vm = v.copy(), v.copy()
        vp[i] += h[i]
        vm[i] -= h[i]
        g[i] = (f(vp) - f(vm)) / (2.0 * h[i])
    return g


def fd_hessian(f: Callable, v: np.ndarray, rel: float) -> np.ndarray:
    """Central-difference Hessian of scalar f at v."""
    n = len(v)
    h = _steps(v, rel)
    H = np.empty((n, n))
    f0 = f(v)
    for i in range(n):
        vp, vm = v.copy(), v.copy()
        vp[i] += h[i]
        vm[i] -= h[i]
        H[i, i] = (f(vp) - 2.0 * f0 + f(vm)) / (h[i] * h[i])
        for j in range(i + 1, n):
            vpp, vpm, vmp, vmm = v.copy(), v.copy(), v.copy(), v.copy()
            vpp[i] += h[i]; vpp[j] += h[j]
            vpm[i] += h[i]; vpm[j] -= h[j]
            vmp[i] -= h[i]; vmp[j] += h[j]
            vmm[i] -= h[i]; vmm[j] -= h[j]
            H[i, j] = H[j, i] = (f(vpp) - f(vpm) - f(vmp) + f(vmm)) / (
                4.0 * h[i] * h[j]
            )
    return H


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def floor_pd(M: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """Project to the symmetric part and raise eigenvalues below ``floor``."""
    vals, vecs = np.linalg.eigh(_sym(M))
    vals = np.maximum(vals, floor)
    return vecs @ np.diag(vals) @ vecs.T


# ---------------------------------------------------------------------------
# Linearization / quadraticization
# ---------------------------------------------------------------------------

def linearize_quadraticize(
    game: GameDefinition,
    nominal: JointTrajectory,
    fd_step: float = 1e-4,
    pd_floor: float = 1e-6,
) -> LqApproximation:
    """LQ model of the game along the rollout of ``nominal``.

    Cross-blocks of the cost Hessian (x-u, x-w, u-w) are dropped; the LQ
    stage cost is purely block diagonal. ``R_w`` enters the LQ game with a
    negative sign, so it is minus one half of the w-Hessian of the true
    stage cost, floored to positive definiteness. The state-cost blocks Q
    are floored at zero: concave curvature (e.g. the inside of a repulsive
    well) would tell the quadratic model that driving straight through the
    obstacle lowers cost, so only the gradient of such terms is kept.
    """
    states = rollout(game, nominal)
    T = game.horizon
    if game.lq_model_fn is not None:
        A, B, D, Q, Ru, Rw, q = game.lq_model_fn(states, nominal.u, nominal.w)
        return LqApproximation(
            A=list(A), B=list(B), D=list(D), Q=list(Q), Ru=list(Ru),
            Rw=list(Rw), q=list(q), nominal=nominal, nominal_states=states,
        )
    A, B, D, Q, Ru, Rw, q = [], [], [], [], [], [], []
    for t in range(T):
        x, u, w = states[t], nominal.u[t], nominal.w[t]
        A.append(fd_jacobian(lambda v: game.dynamics(v, u, w), x, fd_step))
        B.append(fd_jacobian(lambda v: game.dynamics(x, v, w), u, fd_step))
        D.append(fd_jacobian(lambda v: game.dynamics(x, u, v), w, fd_step))
        Hx = fd_hessian(lambda v: game.stage_cost(v, u, w), x, fd_step)
        Hu = fd_hessian(lambda v: game.stage_cost(x, v, w), u, fd_step)
        Hw = fd_hessian(lambda v: game.stage_cost(x, u, v), w, fd_step)
        if not (
            np.all(np.isfinite(Hx)) and np.all(np.isfinite(Hu)) and np.all(np.isfinite(Hw))
        ):
            raise NumericError(f"non-finite Hessian estimate at timestep {t}")
        Q.append(floor_pd(0.5 * Hx, 0.0))
        Ru.append(floor_pd(0.5 * Hu, pd_floor))
        Rw.append(floor_pd(-0.5 * Hw, pd_floor))
        q.append(fd_gradient(lambda v: game.stage_cost(v, u, w), x, fd_step))
    HT = fd_hessian(game.terminal_cost, states[T], fd_step)
    if not np.all(np.isfinite(HT)):
        raise NumericError(f"non-finite terminal Hessian at timestep {T}")
    Q.append(floor_pd(0.5 * HT, 0.0))
    q.append(fd_gradient(game.terminal_cost, states[T], fd_step))
    return LqApproximation(
        A=A, B=B, D=D, Q=Q, Ru=Ru, Rw=Rw, q=q,
        nominal=nominal, nominal_states=states,
    )


def augment_affine(lq: LqApproximation) -> LqApproximation:
    """Fold the cost gradients into a homogeneous state coordinate.

    The extra coordinate is constant at 1 along every rollout, so the
    quadratic form on the augmented state reproduces the affine expansion
    ``q'dx + dx'Q dx`` exactly and the resulting feedback gains carry an
    affine column. Without this the expansion about a non-optimal nominal
    would lose the cost gradient entirely.
    """
    if lq.augmented:
        return lq
    d = lq.state_dim

    def aug_A(Am):
        M = np.zeros((d + 1, d + 1))
        M[:d, :d] = Am
        M[d, d] = 1.0
        return M

    def aug_col(Bm):
        return np.vstack([Bm, np.zeros((1, Bm.shape[1]))])

    def aug_Q(Qm, qv):
        M = np.zeros((d + 1, d + 1))
        M[:d, :d] = Qm
        M[:d, d] = 0.5 * qv
        M[d, :d] = 0.5 * qv
        return M

    return replace(
        lq,
        A=[aug_A(m) for m in lq.A],
        B=[aug_col(m) for m in lq.B],
        D=[aug_col(m) for m in lq.D],
        Q=[aug_Q(Qm, qv) for Qm, qv in zip(lq.Q, lq.q)],
        q=[np.zeros(d + 1) for _ in lq.q],
        augmented=True,
    )


# ---------------------------------------------------------------------------
# Coupled Riccati recursions
# ---------------------------------------------------------------------------

def _backward_L(lq: LqApproximation, K: List[np.ndarray]):
    """Worst-case human schedule L(K) and value matrices for fixed K."""
    T = lq.horizon
    P = [None] * (T + 1)
    P[T] = _sym(lq.Q[T])
    L = [None] * T
    failures = []
    for t in reversed(range(T)):
        A, B, D = lq.A[t], lq.B[t], lq.D[t]
        Pn = P[t + 1]
        Acl = A - B @ K[t]
        S = lq.Rw[t] - D.T @ Pn @ D
        if not np.all(np.isfinite(S)) or np.linalg.eigvalsh(_sym(S))[0] <= 0.0:
            # maximization unbounded in the LQ model: drop the disturbance
            # channel at this step and fall back to plain LQR bookkeeping
            failures.append(t)
            L[t] = np.zeros((D.shape[1], A.shape[0]))
            if not np.all(np.isfinite(Pn)):
                Pn = np.zeros_like(Pn)
            P[t] = _sym(lq.Q[t] + K[t].T @ lq.Ru[t] @ K[t] + Acl.T @ Pn @ Acl)
            continue
        PD = Pn @ D
        Ptil = Pn + PD @ np.linalg.solve(S, PD.T)
        L[t] = np.linalg.solve(D.T @ Pn @ D - lq.Rw[t], D.T @ Pn @ Acl)
        P[t] = _sym(lq.Q[t] + K[t].T @ lq.Ru[t] @ K[t] + Acl.T @ Ptil @ Acl)
    return L, P, failures


def _backward_K(lq: LqApproximation, L: List[np.ndarray]):
    """Robust robot schedule K(L) for a fixed human schedule."""
    T = lq.horizon
    P = [None] * (T + 1)
    P[T] = _sym(lq.Q[T])
    K = [None] * T
    for t in reversed(range(T)):
        A, B, D = lq.A[t], lq.B[t], lq.D[t]
        Pn = P[t + 1]
        Acl = A - D @ L[t]
        G = lq.Ru[t] + B.T @ Pn @ B
        try:
            K[t] = np.linalg.solve(G, B.T @ Pn @ Acl)
        except np.linalg.LinAlgError as err:
            raise NumericError(
                f"singular (R_u + B'PB) at timestep {t}; R_u should be PD"
            ) from err
        Qeff = lq.Q[t] - L[t].T @ lq.Rw[t] @ L[t] + K[t].T @ lq.Ru[t] @ K[t]
        Pcl = Acl - B @ K[t]
        P[t] = _sym(Qeff + Pcl.T @ Pn @ Pcl)
    return K, P


def solve_coupled_riccati(
    lq: LqApproximation, max_iters: int = 100, tol: float = 1e-6
) -> GainSchedule:
    """Alternate the L(K) and K(L) backward recursions to a fixed point."""
    T = lq.horizon
    d = lq.state_dim
    mu = lq.B[0].shape[1]
    K = [np.zeros((mu, d)) for _ in range(T)]
    L = [np.zeros((lq.D[0].shape[1], d)) for _ in range(T)]
    iterations = 0
    delta = np.inf
    # divergence of the alternation shows up as overflow long before the
    # finiteness check below; the warnings carry no extra information
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(max_iters):
            iterations = it + 1
            L_new, _, _ = _backward_L(lq, K)
            try:
                K_new, _ = _backward_K(lq, L_new)
            except NumericError:
                # the human's LQ channel drove P negative enough to make the
                # robot's subproblem singular; treat as divergence
                K = [np.full_like(m, np.inf) for m in K]
                break
            delta = max(
                max(float(np.max(np.abs(a - b))) for a, b in zip(K_new, K)),
                max(float(np.max(np.abs(a - b))) for a, b in zip(L_new, L)),
            )
            K, L = K_new, L_new
            if delta < tol or not np.isfinite(delta):
                break
    if not all(np.all(np.isfinite(m)) for m in K):
        # the alternation left its basin of attraction; degrade to the
        # robust-free LQR schedule rather than hand back non-finite gains
        L = [np.zeros((lq.D[0].shape[1], d)) for _ in range(T)]
        K, P = _backward_K(lq, L)
        return GainSchedule(
            K=K, L=L, P=P, converged=False,
            iterations=iterations, eig_failures=tuple(range(T)),
        )
    # final L-pass so the returned (L, P) are consistent with the returned K
    with np.errstate(over="ignore", invalid="ignore"):
        L, P, failures = _backward_L(lq, K)
    converged = delta < tol and not failures
    return GainSchedule(
        K=K, L=L, P=P, converged=converged,
        iterations=iterations, eig_failures=tuple(failures),
    )


def gains_to_trajectory(
    gains: GainSchedule,
    game: GameDefinition,
    x0: State,
    lq: LqApproximation,
) -> JointTrajectory:
    """Forward-simulate the true dynamics under the LQ feedback laws.

    Actions are the nominal actions plus feedback on the deviation from the
    nominal state trajectory, clamped into the game's action bounds.
    """
    T = game.horizon
    us = np.empty((T, game.robot_dim))
    ws = np.empty((T, game.human_dim))
    x = np.asarray(x0, dtype=float)
    for t in range(T):
        dz = x - lq.nominal_states[t]
        if lq.augmented:
            dz = np.append(dz, 1.0)
        us[t] = clamp(lq.nominal.u[t] - gains.K[t] @ dz, game.robot_bounds)
        ws[t] = clamp(lq.nominal.w[t] - gains.L[t] @ dz, game.human_bounds)
        x = game.dynamics(x, us[t], ws[t])
    return JointTrajectory(x0=np.asarray(x0, dtype=float), u=us, w=ws)
