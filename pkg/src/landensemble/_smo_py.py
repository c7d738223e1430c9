"""Pure-Python SMO solver (fallback for the compiled ``_smo`` core).

Mirrors ``_smo.pyx`` operation for operation so both backends return the
same multipliers on the same inputs.
"""

from __future__ import annotations

import numpy as np

# relative step threshold below which a pair update is rejected
STEP_EPS = 1e-8
# alphas within this distance of a bound are snapped onto it
BOUND_EPS = 1e-8


def smo_solve(K, y, C, tol, max_iter):
    """Solve the soft-margin SVM dual for a precomputed Gram matrix.

    Parameters
    ----------
    K : ndarray, shape (n, n)
        Kernel matrix.
    y : ndarray, shape (n,)
        Targets in {-1, +1}.
    C : float
        Box constraint.
    tol : float
        KKT tolerance on ``y_i * E_i``.
    max_iter : int
        Cap on the number of successful pair updates.

    Returns
    -------
    alpha : ndarray, shape (n,)
    b : float
        Bias, with decision ``f(x) = sum_i alpha_i y_i K(x_i, x) + b``.
    n_steps : int
    converged : bool
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = y.shape[0]
    alpha = np.zeros(n)
    E = -y.copy()
    state = {"b": 0.0, "steps": 0}

    def take_step(i1, i2):
        if i1 == i2:
            return 0
        a1 = alpha[i1]
        a2 = alpha[i2]
        y1 = y[i1]
        y2 = y[i2]
        E1 = E[i1]
        E2 = E[i2]
        s = y1 * y2
        if y1 != y2:
            L = max(0.0, a2 - a1)
            H = min(C, C + a2 - a1)
        else:
            L = max(0.0, a1 + a2 - C)
            H = min(C, a1 + a2)
        if L >= H:
            return 0
        k11 = K[i1, i1]
        k12 = K[i1, i2]
        k22 = K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        b = state["b"]
        if eta > 0.0:
            a2n = a2 + y2 * (E1 - E2) / eta
            if a2n < L:
                a2n = L
            elif a2n > H:
                a2n = H
        else:
            f1 = y1 * (E1 - b) - a1 * k11 - s * a2 * k12
            f2 = y2 * (E2 - b) - s * a1 * k12 - a2 * k22
            L1 = a1 + s * (a2 - L)
            H1 = a1 + s * (a2 - H)
            Lobj = L1 * f1 + L * f2 + 0.5 * L1 * L1 * k11 + 0.5 * L * L * k22 + s * L * L1 * k12
            Hobj = H1 * f1 + H * f2 + 0.5 * H1 * H1 * k11 + 0.5 * H * H * k22 + s * H * H1 * k12
            if Lobj < Hobj - STEP_EPS:
                a2n = L
            elif Lobj > Hobj + STEP_EPS:
                a2n = H
            else:
                a2n = a2
        if a2n < BOUND_EPS:
            a2n = 0.0
        elif a2n > C - BOUND_EPS:
            a2n = C
        if abs(a2n - a2) < STEP_EPS * (a2n + a2 + STEP_EPS):
            return 0
        a1n = a1 + s * (a2 - a2n)
        if a1n < BOUND_EPS:
            a2n = a2n + s * a1n
            a1n = 0.0
        elif a1n > C - BOUND_EPS:
            a2n = a2n + s * (a1n - C)
            a1n = C
        d1 = y1 * (a1n - a1)
        d2 = y2 * (a2n - a2)
        b1 = b - E1 - d1 * k11 - d2 * k12
        b2 = b - E2 - d1 * k12 - d2 * k22
        if 0.0 < a1n < C:
            bn = b1
        elif 0.0 < a2n < C:
            bn = b2
        else:
            bn = 0.5 * (b1 + b2)
        db = bn - b
        E[:] = E + d1 * K[i1] + d2 * K[i2] + db
        alpha[i1] = a1n
        alpha[i2] = a2n
        state["b"] = bn
        state["steps"] += 1
        return 1

    def examine(i2):
        y2 = y[i2]
        a2 = alpha[i2]
        E2 = E[i2]
        r2 = E2 * y2
        if not ((r2 < -tol and a2 < C) or (r2 > tol and a2 > 0.0)):
            return 0
        # second choice: maximal |E1 - E2| over free multipliers
        free = (alpha > 0.0) & (alpha < C)
        free[i2] = False
        n_free = int(free.sum())
        best = int(np.argmax(np.where(free, np.abs(E - E2), -1.0))) if n_free else -1
        if best >= 0 and take_step(best, i2):
            return 1
        if n_free > 0:
            for off in range(1, n):
                i1 = (i2 + off) % n
                if 0.0 < alpha[i1] < C and take_step(i1, i2):
                    return 1
        for off in range(1, n):
            i1 = (i2 + off) % n
            if take_step(i1, i2):
                return 1
        return 0

    examine_all = True
    num_changed = 0
    capped = False
    while num_changed > 0 or examine_all:
        num_changed = 0
        for i in range(n):
            if state["steps"] >= max_iter:
                capped = True
                break
            if examine_all or 0.0 < alpha[i] < C:
                num_changed += examine(i)
        if capped:
            break
        if examine_all:
            examine_all = False
        elif num_changed == 0:
            examine_all = True
    return alpha, state["b"], state["steps"], not capped
