"""Eigenbasis matrix elements of an observable, read through the ETH ansatz.

In the eigenbasis ``A_ab = Abar(E) delta_ab + exp(-S/2) f(E, w) R_ab`` with
``E = (E_a + E_b)/2`` and ``w = E_a - E_b``. :func:`fit_eth` estimates the
smooth diagonal ``Abar``, the binned off-diagonal variance
``exp(-S) f^2(E, w)`` and the standardized residuals ``R_ab``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dynamics import _as_matrix, energy_stats, rotated_diagonal, window_weights
from .errors import DimensionMismatch, EmptyBin, InsufficientSpan, TooFewSamples, TooFewStates

__all__ = [
    "EthFit",
    "fit_eth",
    "gaussianity_test",
    "scaling_slope",
    "scaling_check",
    "eth_variance_prediction",
    "f2_lookup",
    "c_of_t",
    "extrema_envelope",
    "merge_fits",
    "invalid_bins",
    "thermal_fluctuation_bound",
]


@dataclass(frozen=True)
class EthFit:
    """Binned ETH ingredients of one diagonalized realization.

    ``f2[i, j]`` is the mean square of off-diagonal elements whose mean energy
    falls in ``e_edges[i:i+2]`` and whose difference falls in
    ``omega_edges[j:j+2]``; it is ``nan`` where ``counts[i, j] < min_count``.
    With ``signed`` the omega axis covers negative differences as well,
    otherwise it bins ``|E_a - E_b|``.
    """

    a_energies: np.ndarray
    a_values: np.ndarray
    e_edges: np.ndarray
    omega_edges: np.ndarray
    f2: np.ndarray
    counts: np.ndarray
    r_samples: np.ndarray
    n_corr: float
    window: float
    signed: bool = False
    sum_sq: np.ndarray = None
    min_count: int = 20

    @property
    def s_eff(self):
        return math.log(self.n_corr)

    @property
    def valid(self):
        return np.isfinite(self.f2)

    @property
    def e_centers(self):
        return 0.5 * (self.e_edges[1:] + self.e_edges[:-1])

    @property
    def omega_centers(self):
        return 0.5 * (self.omega_edges[1:] + self.omega_edges[:-1])

    def a_of_e(self, e):
        return np.interp(e, self.a_energies, self.a_values)


def _moving_average(energies, values, window):
    # mean of values[b] over |E_b - E_a| <= window, via prefix sums
    csum = np.concatenate(([0.0], np.cumsum(values)))
    lo = np.searchsorted(energies, energies - window, side="left")
    hi = np.searchsorted(energies, energies + window, side="right")
    return (csum[hi] - csum[lo]) / (hi - lo)


def fit_eth(a, eig, window, delta=None, e_bins=12, omega_bins=40, omega_max=None,
            central=0.6, min_count=20, signed=False):
    """Estimate ``Abar(E)``, ``exp(-S) f^2(E, w)`` and ``R_ab`` from one eigenbasis.

    ``window`` is the half-width of the moving average for ``Abar`` and
    ``delta`` (default ``window``) the correlation width entering
    ``N = rho * delta``. Only eigenstates in the central fraction ``central``
    of the spectrum are used. ``omega_max`` defaults to six times the
    observable's bandwidth when it has one, else six times ``delta``.

    Bins with fewer than ``min_count`` elements are marked invalid (``nan``).
    """
    am = _as_matrix(a)
    if am.shape[0] != eig.vectors.shape[0]:
        raise DimensionMismatch(f"observable dim {am.shape[0]} vs basis dim {eig.vectors.shape[0]}")
    delta = window if delta is None else delta
    n = eig.dim
    cut = int(round(n * (1.0 - central) / 2.0))
    sel = np.arange(cut, n - cut)
    if sel.size < 100:
        raise TooFewStates(f"{sel.size} eigenstates in the analysis window, need 100")
    e = eig.values
    rot = eig.rotate(am)
    diag = np.diagonal(rot)
    abar = _moving_average(e, diag, window)[sel]

    es = e[sel]
    n_corr = (es.size - 1) / (es[-1] - es[0]) * delta
    if omega_max is None:
        bw = getattr(a, "bandwidth", None)
        omega_max = 6.0 * (bw if bw else delta)
    e_edges = np.linspace(es[0], es[-1], e_bins + 1)
    omega_edges = np.linspace(-omega_max if signed else 0.0, omega_max, omega_bins + 1)

    ia, ib = np.triu_indices(sel.size, 1)
    if signed:
        # each unordered pair enters once with either sign, alternating by pair
        flip = (ia + ib) % 2 == 1
        ia, ib = np.where(flip, ib, ia), np.where(flip, ia, ib)
    ga, gb = sel[ia], sel[ib]
    x = rot[ga, gb]
    emean = 0.5 * (e[ga] + e[gb])
    omega = e[ga] - e[gb] if signed else np.abs(e[ga] - e[gb])
    ie = np.clip(np.searchsorted(e_edges, emean, side="right") - 1, 0, e_bins - 1)
    iw = np.searchsorted(omega_edges, omega, side="right") - 1
    inside = (iw >= 0) & (iw < omega_bins)
    flat = ie[inside] * omega_bins + iw[inside]
    counts = np.bincount(flat, minlength=e_bins * omega_bins).reshape(e_bins, omega_bins)
    sq = np.bincount(flat, weights=x[inside] ** 2, minlength=e_bins * omega_bins)
    sq = sq.reshape(e_bins, omega_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        f2 = np.where(counts >= min_count, sq / counts, np.nan)
    bin_var = f2.reshape(-1)[flat]
    usable = np.isfinite(bin_var)
    scale = np.sqrt(bin_var[usable])
    xs = x[inside][usable]
    # zero-variance bins (no off-diagonal content) give residual 0
    r = np.divide(xs, scale, out=np.zeros_like(xs), where=scale > 0)
    return EthFit(a_energies=es, a_values=abar, e_edges=e_edges, omega_edges=omega_edges,
                  f2=f2, counts=counts, r_samples=r, n_corr=float(n_corr), window=float(window),
                  signed=signed, sum_sq=sq, min_count=min_count)


def invalid_bins(fit):
    """Indices ``(i, j)`` of bins marked invalid for having too few elements."""
    return [tuple(int(v) for v in ij) for ij in np.argwhere(~fit.valid)]


def gaussianity_test(fit, min_samples=10_000):
    """Excess kurtosis and KS distance of the residuals to a standard normal."""
    r = fit.r_samples if isinstance(fit, EthFit) else np.asarray(fit, dtype=float)
    if r.size < min_samples:
        raise TooFewSamples(f"{r.size} residuals, need {min_samples}")
    return {
        "samples": int(r.size),
        "mean": float(r.mean()),
        "variance": float(r.var()),
        "kurtosis": float(stats.kurtosis(r, fisher=True)),
        "ks_distance": float(stats.kstest(r, "norm").statistic),
    }


def scaling_slope(ns, variances):
    """Least-squares slope of ``log(variance)`` against ``log(N)``.

    Raises ``InsufficientSpan`` unless there are three or more values of N
    covering a factor of at least 4.
    """
    ns = np.asarray(ns, dtype=float)
    variances = np.asarray(variances, dtype=float)
    if ns.size < 3 or ns.max() / ns.min() < 4.0 - 1e-9:
        raise InsufficientSpan("need >= 3 values of N spanning a factor >= 4")
    return float(np.polyfit(np.log(ns), np.log(variances), 1)[0])


def _variance_at(fit, omega):
    j = int(np.clip(np.searchsorted(fit.omega_edges, omega, side="right") - 1,
                    0, fit.omega_edges.size - 2))
    col = fit.f2[:, j]
    w = np.where(np.isfinite(col), fit.counts[:, j], 0)
    if w.sum() == 0:
        raise EmptyBin(f"no valid bin at omega = {omega:g}")
    return float(np.nansum(col * w) / w.sum())


def scaling_check(fits, omega_over_delta=0.5, delta=None):
    """Slope of the mean off-diagonal variance at fixed ``omega / delta`` against N."""
    ns = [f.n_corr for f in fits]
    variances = [_variance_at(f, omega_over_delta * (f.window if delta is None else delta))
                 for f in fits]
    return {"n": ns, "variance": variances, "slope": scaling_slope(ns, variances)}


def f2_lookup(fit, e, omega):
    """Interpolated ``exp(-S) f^2`` at energies ``e`` and differences ``omega``.

    Rows are taken from the nearest energy bin, linearly interpolated in
    omega over the valid bins, and zero beyond the binned omega range.
    """
    e = np.asarray(e, dtype=float)
    omega = np.asarray(omega, dtype=float)
    w = omega if fit.signed else np.abs(omega)
    rows = np.clip(np.searchsorted(fit.e_edges, e, side="right") - 1, 0, fit.e_centers.size - 1)
    out = np.zeros(np.broadcast(e, w).shape)
    rows, w = np.broadcast_arrays(rows, w)
    centers = fit.omega_centers
    lo, hi = fit.omega_edges[0], fit.omega_edges[-1]
    for i in np.unique(rows):
        ok = fit.valid[i]
        if not ok.any():
            continue
        m = rows == i
        vals = np.interp(w[m], centers[ok], fit.f2[i, ok])
        vals[(w[m] < lo) | (w[m] > hi)] = 0.0
        out[m] = vals
    return out


def eth_variance_prediction(fit, pi, eig, times):
    """Ensemble variance of ``Tr(A rho(t))`` implied by the fitted ETH statistics.

    ``sum_ab v(E, w) Pi_ab^2 (1 + cos(2 w t))`` with ``v`` from
    :func:`f2_lookup` and ``Pi`` in the eigenbasis; diagonal terms carry the
    doubled variance of a GOE diagonal element.
    """
    from .dynamics import _trace_series

    if pi.dim != eig.vectors.shape[0]:
        raise DimensionMismatch(f"state dim {pi.dim} vs basis dim {eig.vectors.shape[0]}")
    e = eig.values
    p = pi.rotate(eig)
    v = f2_lookup(fit, 0.5 * (e[:, None] + e[None, :]), e[:, None] - e[None, :])
    weights = v * p * p
    oscillating, _ = _trace_series(weights, 2.0 * e, times)
    return weights.sum() + oscillating


def c_of_t(fit, e_center, times):
    """Cosine transform of the ``f^2`` row at ``e_center``, normalized to ``C(0) = 1``.

    The transform runs over bin centres, so it repeats with period
    ``2 pi / bin_width``; only ``t < pi / bin_width`` is meaningful.
    """
    times = np.asarray(times, dtype=float)
    i = int(np.clip(np.searchsorted(fit.e_edges, e_center, side="right") - 1,
                    0, fit.e_centers.size - 1))
    ok = fit.valid[i]
    if not ok.any():
        raise EmptyBin(f"no valid omega bin at E = {e_center:g}")
    w = fit.omega_centers[ok]
    mass = fit.f2[i, ok] * np.diff(fit.omega_edges)[ok]
    total = mass.sum()
    if total <= 0:
        raise EmptyBin(f"f2 row at E = {e_center:g} carries no weight")
    return np.cos(np.outer(times, w)) @ mass / total


def extrema_envelope(values):
    """Magnitudes of the successive local extrema of ``values`` (after ``values[0]``)."""
    v = np.asarray(values, dtype=float)
    d = np.diff(v)
    turn = np.nonzero(np.sign(d[1:]) * np.sign(d[:-1]) < 0)[0] + 1
    return np.abs(v[turn])


def thermal_fluctuation_bound(a, eig, pi, delta, kappa=4.0, min_states=10):
    """Microcanonical ``<A^2> - <A>^2`` about the state's mean energy.

    The window is the Gaussian one used by ``equilibrium_value``. ``ratio``
    compares the difference with ``delta_s^2 * (dAbar/dE)^2``, the slope
    being a weighted linear fit of the eigenbasis diagonal in the window.
    """
    am = _as_matrix(a)
    stats_ = energy_stats(pi, eig)
    w = window_weights(eig.values, stats_.mean_e, delta, kappa)
    inside = int(np.count_nonzero(w))
    if inside < min_states:
        raise TooFewStates(f"{inside} eigenvalues in the window, need {min_states}")
    d1 = rotated_diagonal(am, eig)
    d2 = rotated_diagonal(am @ am, eig)
    wn = w / w.sum()
    mean_a = float(wn @ d1)
    diff = float(wn @ d2 - mean_a**2)
    x = eig.values - stats_.mean_e
    xm = wn @ x
    var_x = wn @ (x - xm) ** 2
    slope = float(wn @ ((x - xm) * (d1 - mean_a)) / var_x) if var_x > 0 else 0.0
    scale = stats_.delta_s**2 * slope**2
    return {
        "mean": mean_a,
        "mean_square": float(wn @ d2),
        "difference": diff,
        "slope": slope,
        "delta_s": stats_.delta_s,
        "ratio": diff / scale if scale > 0 else float("inf"),
    }


def merge_fits(fits):
    """Pool fits of several realizations binned on a common grid.

    Bin counts and sums of squares add up, residuals are concatenated in the
    given order and the diagonal curves averaged.
    """
    fits = list(fits)
    if len(fits) == 1:
        return fits[0]
    first = fits[0]
    if any(f.f2.shape != first.f2.shape for f in fits):
        raise DimensionMismatch("fits binned on different grids")
    counts = sum(f.counts for f in fits)
    sq = sum(f.sum_sq for f in fits)
    with np.errstate(invalid="ignore", divide="ignore"):
        f2 = np.where(counts >= first.min_count, sq / counts, np.nan)
    return EthFit(a_energies=np.mean([f.a_energies for f in fits], axis=0),
                  a_values=np.mean([f.a_values for f in fits], axis=0),
                  e_edges=np.mean([f.e_edges for f in fits], axis=0),
                  omega_edges=first.omega_edges, f2=f2, counts=counts,
                  r_samples=np.concatenate([f.r_samples for f in fits]),
                  n_corr=float(np.mean([f.n_corr for f in fits])), window=first.window,
                  signed=first.signed, sum_sq=sq, min_count=first.min_count)
