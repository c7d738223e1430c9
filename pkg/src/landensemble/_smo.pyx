# cython: language_level=3
"""Compiled SMO solver. Same algorithm and arithmetic order as ``_smo_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef double STEP_EPS = 1e-8
cdef double BOUND_EPS = 1e-8


cdef struct Solver:
    const double *K
    const double *y
    double *alpha
    double *E
    Py_ssize_t n
    double C
    double b
    long steps


cdef inline int take_step(Solver *s, Py_ssize_t i1, Py_ssize_t i2) noexcept nogil:
    cdef Py_ssize_t n = s.n, i
    cdef const double *K = s.K
    cdef double C = s.C
    cdef double a1, a2, y1, y2, E1, E2, sgn, L, H, k11, k12, k22, eta
    cdef double a1n, a2n, f1, f2, L1, H1, Lobj, Hobj, d1, d2, b1, b2, bn, db, b
    if i1 == i2:
        return 0
    a1 = s.alpha[i1]
    a2 = s.alpha[i2]
    y1 = s.y[i1]
    y2 = s.y[i2]
    E1 = s.E[i1]
    E2 = s.E[i2]
    sgn = y1 * y2
    if y1 != y2:
        L = 0.0 if 0.0 > a2 - a1 else a2 - a1
        H = C if C < C + a2 - a1 else C + a2 - a1
    else:
        L = 0.0 if 0.0 > a1 + a2 - C else a1 + a2 - C
        H = C if C < a1 + a2 else a1 + a2
    if L >= H:
        return 0
    k11 = K[i1 * n + i1]
    k12 = K[i1 * n + i2]
    k22 = K[i2 * n + i2]
    eta = k11 + k22 - 2.0 * k12
    b = s.b
    if eta > 0.0:
        a2n = a2 + y2 * (E1 - E2) / eta
        if a2n < L:
            a2n = L
        elif a2n > H:
            a2n = H
    else:
        f1 = y1 * (E1 - b) - a1 * k11 - sgn * a2 * k12
        f2 = y2 * (E2 - b) - sgn * a1 * k12 - a2 * k22
        L1 = a1 + sgn * (a2 - L)
        H1 = a1 + sgn * (a2 - H)
        Lobj = L1 * f1 + L * f2 + 0.5 * L1 * L1 * k11 + 0.5 * L * L * k22 + sgn * L * L1 * k12
        Hobj = H1 * f1 + H * f2 + 0.5 * H1 * H1 * k11 + 0.5 * H * H * k22 + sgn * H * H1 * k12
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
    if fabs(a2n - a2) < STEP_EPS * (a2n + a2 + STEP_EPS):
        return 0
    a1n = a1 + sgn * (a2 - a2n)
    if a1n < BOUND_EPS:
        a2n = a2n + sgn * a1n
        a1n = 0.0
    elif a1n > C - BOUND_EPS:
        a2n = a2n + sgn * (a1n - C)
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
    for i in range(n):
        s.E[i] = s.E[i] + d1 * K[i1 * n + i] + d2 * K[i2 * n + i] + db
    s.alpha[i1] = a1n
    s.alpha[i2] = a2n
    s.b = bn
    s.steps += 1
    return 1


cdef inline int examine(Solver *s, Py_ssize_t i2, double tol) noexcept nogil:
    cdef Py_ssize_t n = s.n, i, off, i1, best = -1, n_free = 0
    cdef double C = s.C
    cdef double y2 = s.y[i2], a2 = s.alpha[i2], E2 = s.E[i2]
    cdef double r2 = E2 * y2, gap, best_gap = -1.0
    if not ((r2 < -tol and a2 < C) or (r2 > tol and a2 > 0.0)):
        return 0
    for i in range(n):
        if i != i2 and 0.0 < s.alpha[i] < C:
            n_free += 1
            gap = fabs(s.E[i] - E2)
            if gap > best_gap:
                best_gap = gap
                best = i
    if best >= 0 and take_step(s, best, i2):
        return 1
    if n_free > 0:
        for off in range(1, n):
            i1 = (i2 + off) % n
            if 0.0 < s.alpha[i1] < C and take_step(s, i1, i2):
                return 1
    for off in range(1, n):
        i1 = (i2 + off) % n
        if take_step(s, i1, i2):
            return 1
    return 0


def smo_solve(K, y, double C, double tol, long max_iter):
    """Solve the soft-margin SVM dual; see ``_smo_py.smo_solve``."""
    cdef double[:, ::1] Kv = np.ascontiguousarray(K, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0], i
    if Kv.shape[0] != n or Kv.shape[1] != n:
        raise ValueError("kernel matrix shape does not match targets")
    alpha = np.zeros(n)
    E = -np.asarray(yv).copy()
    cdef double[::1] av = alpha
    cdef double[::1] Ev = E
    cdef Solver s
    cdef bint examine_all = True, capped = False
    cdef long num_changed = 0
    if n == 0:
        return alpha, 0.0, 0, True
    s.K = &Kv[0, 0]
    s.y = &yv[0]
    s.alpha = &av[0]
    s.E = &Ev[0]
    s.n = n
    s.C = C
    s.b = 0.0
    s.steps = 0
    with nogil:
        while num_changed > 0 or examine_all:
            num_changed = 0
            for i in range(n):
                if s.steps >= max_iter:
                    capped = True
                    break
                if examine_all or 0.0 < s.alpha[i] < C:
                    num_changed += examine(&s, i, tol)
            if capped:
                break
            if examine_all:
                examine_all = False
            elif num_changed == 0:
                examine_all = True
    return alpha, s.b, s.steps, not capped
