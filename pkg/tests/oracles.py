"""Independent reference computations used only by the tests."""

import math

import numpy as np


def jacobi_eigh(a, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi eigen-decomposition; slow but unconditionally accurate."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = math.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * max(np.linalg.norm(a), 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.T @ a[idx, :]
                v[:, idx] = v[:, idx] @ rot
    vals = np.diagonal(a).copy()
    order = np.argsort(vals)
    return vals[order], v[:, order]


def gaussian_smooth(levels, values, centers, delta):
    """Normalized Gaussian average of ``values`` about each centre."""
    w = np.exp(-((np.asarray(centers)[:, None] - levels[None, :]) ** 2) / (2.0 * delta**2))
    return (w @ values) / w.sum(axis=1)


def riemann_gaussian_sum(spacing, delta, offset=0.0, power=1.0, terms=20000):
    """``sum_m exp(-power (m d + offset)^2 / (2 delta^2))`` over all integers m."""
    m = np.arange(-terms, terms + 1)
    return float(np.sum(np.exp(-power * (m * spacing + offset) ** 2 / (2.0 * delta**2))))
