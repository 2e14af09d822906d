"""Independent reference implementations used only by the test suite.

These deliberately share no code path with the library: the min-max solver
is a one-shot stage-wise saddle solve of the quadratic Bellman step, the
LQR solver is the textbook single-player recursion, and the bicycle
integrator is hand-written.
"""

import math

import numpy as np


def minmax_backward_induction(A, B, D, Q, Ru, Rw):
    """Stage-wise saddle solve of the zero-sum LQ game.

    Cost convention x'Qx + u'Ru u - w'Rw w. Solves the joint first-order
    conditions of each stage's quadratic directly (one linear system per
    timestep) instead of alternating best responses. Returns (K, L, P).
    """
    T = len(A)
    d = A[0].shape[0]
    mu = B[0].shape[1]
    mw = D[0].shape[1]
    P = [None] * (T + 1)
    P[T] = 0.5 * (Q[T] + Q[T].T)
    K = [None] * T
    L = [None] * T
    for t in reversed(range(T)):
        Pn = P[t + 1]
        M = np.block(
            [
                [Ru[t] + B[t].T @ Pn @ B[t], B[t].T @ Pn @ D[t]],
                [D[t].T @ Pn @ B[t], -Rw[t] + D[t].T @ Pn @ D[t]],
            ]
        )
        rhs = np.vstack([B[t].T @ Pn @ A[t], D[t].T @ Pn @ A[t]])
        KL = np.linalg.solve(M, rhs)
        K[t] = KL[:mu]
        L[t] = KL[mu:]
        Acl = A[t] - B[t] @ K[t] - D[t] @ L[t]
        Pt = (
            Q[t]
            + K[t].T @ Ru[t] @ K[t]
            - L[t].T @ Rw[t] @ L[t]
            + Acl.T @ Pn @ Acl
        )
        P[t] = 0.5 * (Pt + Pt.T)
    return K, L, P


def finite_horizon_lqr(A, B, Q, Ru):
    """Textbook single-player finite-horizon LQR gains (no disturbance)."""
    T = len(A)
    P = [None] * (T + 1)
    P[T] = Q[T]
    K = [None] * T
    for t in reversed(range(T)):
        Pn = P[t + 1]
        K[t] = np.linalg.solve(Ru[t] + B[t].T @ Pn @ B[t], B[t].T @ Pn @ A[t])
        Acl = A[t] - B[t] @ K[t]
        Pt = Q[t] + K[t].T @ Ru[t] @ K[t] + Acl.T @ Pn @ Acl
        P[t] = 0.5 * (Pt + Pt.T)
    return K, P


def augmented_block_riccati(A, B, D, Q, Ru, Rw, iters=200, tol=1e-12):
    """The block-matrix form of the coupled recursion, built explicitly.

    Stacks all timesteps into one big nilpotent system (states t=0..T,
    actions t=0..T-1) and runs the same alternating fixed-point iteration
    on the stacked matrices until the big value matrix stops changing.
    Returns per-timestep gains extracted from the diagonal blocks.
    """
    T = len(A)
    d = A[0].shape[0]
    mu = B[0].shape[1]
    mw = D[0].shape[1]
    nA = (T + 1) * d
    bigA = np.zeros((nA, nA))
    bigB = np.zeros((nA, T * mu))
    bigD = np.zeros((nA, T * mw))
    for t in range(T):
        bigA[(t + 1) * d : (t + 2) * d, t * d : (t + 1) * d] = A[t]
        bigB[(t + 1) * d : (t + 2) * d, t * mu : (t + 1) * mu] = B[t]
        bigD[(t + 1) * d : (t + 2) * d, t * mw : (t + 1) * mw] = D[t]
    bigQ = np.zeros((nA, nA))
    for t in range(T + 1):
        bigQ[t * d : (t + 1) * d, t * d : (t + 1) * d] = Q[t]
    bigRu = np.zeros((T * mu, T * mu))
    bigRw = np.zeros((T * mw, T * mw))
    for t in range(T):
        bigRu[t * mu : (t + 1) * mu, t * mu : (t + 1) * mu] = Ru[t]
        bigRw[t * mw : (t + 1) * mw, t * mw : (t + 1) * mw] = Rw[t]

    def value_for_K(bigK):
        # fixed point of P = Q + K'RuK + (A-BK)' Ptil (A-BK); terminal P=Q
        P = bigQ.copy()
        for _ in range(T + 2):
            S = bigRw - bigD.T @ P @ bigD
            PD = P @ bigD
            Ptil = P + PD @ np.linalg.solve(S, PD.T)
            Acl = bigA - bigB @ bigK
            P = bigQ + bigK.T @ bigRu @ bigK + Acl.T @ Ptil @ Acl
            P = 0.5 * (P + P.T)
        return P

    bigK = np.zeros((T * mu, nA))
    bigL = np.zeros((T * mw, nA))
    for _ in range(iters):
        P = value_for_K(bigK)
        Acl = bigA - bigB @ bigK
        bigL_new = np.linalg.solve(
            bigD.T @ P @ bigD - bigRw, bigD.T @ P @ Acl
        )
        # K best response: textbook LQR against fixed L on the stacked system
        P2 = bigQ - bigL_new.T @ bigRw @ bigL_new
        AclL = bigA - bigD @ bigL_new
        bigK_new = bigK
        for _ in range(T + 2):
            bigK_new = np.linalg.solve(
                bigRu + bigB.T @ P2 @ bigB, bigB.T @ P2 @ AclL
            )
            Pcl = AclL - bigB @ bigK_new
            P2 = (
                bigQ
                - bigL_new.T @ bigRw @ bigL_new
                + bigK_new.T @ bigRu @ bigK_new
                + Pcl.T @ P2 @ Pcl
            )
            P2 = 0.5 * (P2 + P2.T)
        delta = max(
            np.max(np.abs(bigK_new - bigK)), np.max(np.abs(bigL_new - bigL))
        )
        bigK, bigL = bigK_new, bigL_new
        if delta < tol:
            break
    Ks = [bigK[t * mu : (t + 1) * mu, t * d : (t + 1) * d] for t in range(T)]
    Ls = [bigL[t * mw : (t + 1) * mw, t * d : (t + 1) * d] for t in range(T)]
    return Ks, Ls


def bicycle_step_reference(px, py, th, v, a, steer, dt, wheelbase):
    """Hand-integrated kinematic bicycle, one step."""
    return (
        px + v * math.cos(th) * dt,
        py + v * math.sin(th) * dt,
        th + (v / wheelbase) * math.tan(steer) * dt,
        v + a * dt,
    )


def random_lq_instance(rng, d=None, mu=None, mw=None, T=None, rw_scale=6.0):
    """Random zero-sum LQ instance satisfying the disturbance condition.

    R_w is scaled up until the min-max stage systems are well posed over
    the whole horizon (checked via the direct saddle solve).
    """
    d = d or int(rng.integers(1, 5))
    mu = mu or int(rng.integers(1, 3))
    mw = mw or int(rng.integers(1, 3))
    T = T or int(rng.integers(1, 11))
    A = [rng.normal(size=(d, d)) * 0.6 for _ in range(T)]
    B = [rng.normal(size=(d, mu)) for _ in range(T)]
    D = [rng.normal(size=(d, mw)) * 0.5 for _ in range(T)]

    def spd(n, scale=1.0):
        M = rng.normal(size=(n, n))
        return scale * (M @ M.T + n * np.eye(n))

    Q = [spd(d, 0.3) for _ in range(T + 1)]
    Ru = [spd(mu, 0.5) for _ in range(T)]
    def alternation_well_posed(Rw, sweeps=60):
        # best-response alternation (the scheme under test) is only locally
        # convergent; keep inflating R_w until a reference alternation coded
        # here settles, so every emitted instance is inside its basin
        K = [np.zeros((mu, d)) for _ in range(T)]
        for _ in range(sweeps):
            L = [None] * T
            P = 0.5 * (Q[T] + Q[T].T)
            for t in reversed(range(T)):
                Acl = A[t] - B[t] @ K[t]
                S = Rw[t] - D[t].T @ P @ D[t]
                if np.linalg.eigvalsh(0.5 * (S + S.T))[0] <= 1e-8:
                    return False
                PD = P @ D[t]
                Ptil = P + PD @ np.linalg.solve(S, PD.T)
                L[t] = -np.linalg.solve(S, D[t].T @ P @ Acl)
                P = Q[t] + K[t].T @ Ru[t] @ K[t] + Acl.T @ Ptil @ Acl
                P = 0.5 * (P + P.T)
            Kn = [None] * T
            P = 0.5 * (Q[T] + Q[T].T)
            for t in reversed(range(T)):
                Acl = A[t] - D[t] @ L[t]
                Kn[t] = np.linalg.solve(
                    Ru[t] + B[t].T @ P @ B[t], B[t].T @ P @ Acl
                )
                Pcl = Acl - B[t] @ Kn[t]
                P = (
                    Q[t] - L[t].T @ Rw[t] @ L[t]
                    + Kn[t].T @ Ru[t] @ Kn[t] + Pcl.T @ P @ Pcl
                )
                P = 0.5 * (P + P.T)
            delta = max(np.abs(a - b).max() for a, b in zip(Kn, K))
            if not np.isfinite(delta) or delta > 1e6:
                return False
            K = Kn
            if delta < 1e-10:
                return True
        return False

    scale = rw_scale
    for _ in range(40):
        Rw = [scale * spd(mw, 1.0) for _ in range(T)]
        if not alternation_well_posed(Rw):
            scale *= 2.0
            continue
        try:
            K, L, P = minmax_backward_induction(A, B, D, Q, Ru, Rw)
        except np.linalg.LinAlgError:
            scale *= 2.0
            continue
        ok = all(
            np.linalg.eigvalsh(Rw[t] - D[t].T @ P[t + 1] @ D[t])[0] > 1e-8
            for t in range(T)
        )
        if ok:
            return A, B, D, Q, Ru, Rw
        scale *= 2.0
    raise RuntimeError("could not build a well-posed instance")
