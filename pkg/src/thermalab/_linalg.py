"""Compiled kernels for the dense symmetric eigensolver.

Householder reduction to tridiagonal form, then implicit-shift QL with
optional accumulation of the rotations. Eigenvectors are carried as rows
(``zt[i]`` is the i-th eigenvector) so that every rotation touches two
contiguous rows.
"""

import math

import numpy as np
from numba import njit

EPS = np.finfo(np.float64).eps


@njit(cache=True, nogil=True)
def tridiagonalize(a, want_q):
    """Return ``(d, e, q)`` with ``a = q @ T @ q.T``.

    ``T`` has diagonal ``d`` and off-diagonal ``e`` where ``e[i]`` couples
    ``i`` and ``i + 1`` (``e[n-1] == 0``). ``q`` is empty when ``want_q`` is
    false.
    """
    n = a.shape[0]
    a = a.copy()
    if want_q:
        q = np.eye(n)
    else:
        q = np.empty((0, 0))
    v = np.zeros(n)
    p = np.zeros(n)
    for k in range(n - 2):
        scale = 0.0
        for i in range(k + 1, n):
            scale = max(scale, abs(a[k, i]))
        if scale == 0.0:
            continue
        s = 0.0
        for i in range(k + 1, n):
            v[i] = a[k, i] / scale
            s += v[i] * v[i]
        alpha = math.sqrt(s)
        if v[k + 1] > 0.0:
            alpha = -alpha
        v[k + 1] -= alpha
        vv = 0.0
        for i in range(k + 1, n):
            vv += v[i] * v[i]
        if vv == 0.0:
            continue
        inv = 1.0 / math.sqrt(vv)
        for i in range(k + 1, n):
            v[i] *= inv
        kk = 0.0
        for i in range(k + 1, n):
            acc = 0.0
            for j in range(k + 1, n):
                acc += a[i, j] * v[j]
            p[i] = acc
            kk += v[i] * acc
        for i in range(k + 1, n):
            p[i] -= kk * v[i]
        for i in range(k + 1, n):
            vi2 = 2.0 * v[i]
            pi2 = 2.0 * p[i]
            for j in range(k + 1, n):
                a[i, j] -= vi2 * p[j] + pi2 * v[j]
        off = alpha * scale
        a[k, k + 1] = off
        a[k + 1, k] = off
        for i in range(k + 2, n):
            a[k, i] = 0.0
            a[i, k] = 0.0
        if want_q:
            for i in range(n):
                acc = 0.0
                for j in range(k + 1, n):
                    acc += q[i, j] * v[j]
                acc *= 2.0
                for j in range(k + 1, n):
                    q[i, j] -= acc * v[j]
    d = np.empty(n)
    e = np.zeros(n)
    for i in range(n):
        d[i] = a[i, i]
    for i in range(n - 1):
        e[i] = a[i, i + 1]
    return d, e, q


@njit(cache=True, nogil=True)
def tql_implicit(d, e, zt, want_vectors, max_iter):
    """Diagonalize the tridiagonal ``(d, e)`` in place by implicit QL.

    Rotations are applied to rows of ``zt`` when ``want_vectors``. Returns
    the index of the first eigenvalue that exceeded ``max_iter`` sweeps, or
    -1 on success.
    """
    n = d.shape[0]
    ncols = zt.shape[1]
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= EPS * dd:
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                return l
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if want_vectors:
                    for k in range(ncols):
                        f = zt[i + 1, k]
                        zt[i + 1, k] = s * zt[i, k] + c * f
                        zt[i, k] = c * zt[i, k] - s * f
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return -1
