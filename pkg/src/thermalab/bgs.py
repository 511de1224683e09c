"""Closed-form random-matrix predictions for Tr(A rho(t)) and their checks.

The relaxation curve is

    Tr(A rho(t)) ~ equilibrium + coherent(t) * exp(-a delta^2 t^2)

where ``coherent`` is the HF-basis evolution Tr(A e^{-iH_HF t} Pi e^{iH_HF t})
and ``a`` is fitted rather than assumed (1 and 1/2 are the two candidate
values). For ensembles with exactly orthogonal overlaps the coherent term is
taken for the shifted observable ``A - equilibrium * 1`` (``shift=True``),
which keeps Tr(rho(t)) = 1; the Gaussian ensemble, whose overlaps are only
orthonormal on average, follows the unshifted form.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .dynamics import _as_matrix
from .errors import (
    DegenerateCoherent,
    InsufficientSpan,
    SpanTooSmall,
    TooFewRealizations,
)

__all__ = [
    "IntervalDecomposition",
    "BgsPrediction",
    "NORMALIZATIONS",
    "decompose",
    "interval_equilibrium",
    "pin_normalization",
    "predict",
    "fit_envelope",
    "rotated_mean_closed_form",
    "rotated_variance_closed_form",
    "rotated_mean_check",
    "rotated_variance_check",
    "self_averaging_check",
    "connected_correlator",
]

# prefactor c in  sum_k p_k * c * Tr_k(A) / (rho_k * delta)
NORMALIZATIONS = {
    "gaussian-sqrt2pi": 1.0 / math.sqrt(2.0 * math.pi),
    "gaussian-sqrt2-pi": 1.0 / (math.sqrt(2.0) * math.pi),
    "interval": 1.0,
}
DEFAULT_NORMALIZATION = "gaussian-sqrt2pi"


@dataclass(frozen=True)
class IntervalDecomposition:
    """The spectrum cut into ``delta``-wide intervals ``[edges[k], edges[k+1])``.

    ``trk_a`` is the plain partial trace of ``A`` over the HF states of each
    interval. ``trk_a_gauss`` is the Gaussian-weighted trace
    ``sum_m A_mm exp(-(c_k - E_m)^2 / (2 delta^2))`` over all states, centred
    on ``centers[k]`` (the Pi-weighted mean energy of the interval, or its
    midpoint when ``p_k`` vanishes).
    """

    edges: np.ndarray
    counts: np.ndarray
    rho_k: np.ndarray
    p_k: np.ndarray
    trk_a: np.ndarray
    trk_a_gauss: np.ndarray
    centers: np.ndarray
    delta: float

    @property
    def n_intervals(self):
        return self.counts.shape[0]


def decompose(hf, a, pi, delta):
    if not delta > 0:
        raise ValueError("delta must be positive")
    if hf.span < 2.0 * delta:
        raise SpanTooSmall(f"spectrum span {hf.span:g} < 2 * delta = {2 * delta:g}")
    am = _as_matrix(a)
    e = hf.levels
    n_int = int(math.floor(hf.span / delta)) + 1
    edges = e[0] + delta * np.arange(n_int + 1)
    k = np.minimum(((e - e[0]) / delta).astype(int), n_int - 1)
    counts = np.bincount(k, minlength=n_int)
    occ = np.diagonal(pi.matrix)
    diag = np.diagonal(am)
    p_k = np.bincount(k, weights=occ, minlength=n_int)
    trk_a = np.bincount(k, weights=diag, minlength=n_int)
    weighted_e = np.bincount(k, weights=occ * e, minlength=n_int)
    mids = 0.5 * (edges[1:] + edges[:-1])
    with np.errstate(invalid="ignore", divide="ignore"):
        centers = np.where(p_k > 0, weighted_e / np.where(p_k > 0, p_k, 1.0), mids)
    kernel = np.exp(-((centers[:, None] - e[None, :]) ** 2) / (2.0 * delta**2))
    trk_a_gauss = kernel @ diag
    return IntervalDecomposition(edges=edges, counts=counts, rho_k=counts / delta, p_k=p_k,
                                 trk_a=trk_a, trk_a_gauss=trk_a_gauss, centers=centers,
                                 delta=float(delta))


def interval_equilibrium(dec, normalization=DEFAULT_NORMALIZATION):
    """``sum_k p_k c Tr_k(A) / (rho_k delta)`` over occupied, non-empty intervals.

    The ``interval`` normalization uses the plain partial traces; the two
    Gaussian candidates use the Gaussian-weighted traces.
    """
    c = NORMALIZATIONS[normalization]
    tr = dec.trk_a if normalization == "interval" else dec.trk_a_gauss
    ok = (dec.p_k != 0) & (dec.counts > 0)
    return float(np.sum(dec.p_k[ok] * c * tr[ok] / (dec.rho_k[ok] * dec.delta)))


def pin_normalization(hf, pi, delta, candidates=("gaussian-sqrt2pi", "gaussian-sqrt2-pi")):
    """Evaluate each candidate prefactor on the identity and pick the one giving 1.

    Returns ``(best_name, {name: equilibrium_of_identity})``.
    """
    from .dynamics import Observable

    dec = decompose(hf, Observable.identity(hf.n_levels), pi, delta)
    values = {name: interval_equilibrium(dec, name) for name in candidates}
    best = min(values, key=lambda name: abs(values[name] - 1.0))
    return best, values


@dataclass(frozen=True)
class BgsPrediction:
    """``curve = equilibrium + coherent * exp(-a delta^2 t^2)``.

    ``coherent`` already has the equilibrium subtracted when ``shift`` is set.
    """

    times: np.ndarray
    equilibrium: float
    coherent: np.ndarray
    envelope_exponent: float
    delta: float
    shift: bool
    curve: np.ndarray

    def with_exponent(self, a):
        return _assemble(self.times, self.equilibrium, self.coherent, self.delta, a, self.shift)


def _assemble(times, equilibrium, coherent, delta, a, shift):
    env = np.exp(-a * (delta * times) ** 2)
    return BgsPrediction(times=times, equilibrium=float(equilibrium), coherent=coherent,
                         envelope_exponent=float(a), delta=float(delta), shift=shift,
                         curve=equilibrium + coherent * env)


def predict(dec, coherent, times, exponent_a=1.0, normalization=DEFAULT_NORMALIZATION,
            shift=True, equilibrium=None):
    """Assemble the relaxation curve.

    ``equilibrium`` defaults to :func:`interval_equilibrium` of ``dec``; pass a
    microcanonical value to override it. ``coherent`` is the raw HF-basis
    term for ``A``; with ``shift`` the equilibrium times Tr(Pi) = 1 is
    subtracted from it.
    """
    times = np.asarray(times, dtype=float)
    coherent = np.asarray(coherent, dtype=float)
    if equilibrium is None:
        equilibrium = interval_equilibrium(dec, normalization)
    if shift:
        coherent = coherent - equilibrium
    return _assemble(times, equilibrium, coherent, dec.delta, exponent_a, shift)


def fit_envelope(times, measured, equilibrium, coherent, delta, stderr=None, t_max=None,
                 noise_floor=None):
    """Least-squares exponent ``a`` in ``measured - eq = coherent * exp(-a delta^2 t^2)``.

    ``coherent`` must be the term actually multiplying the envelope (already
    shifted if the shifted form is being tested). Only ``t <= t_max`` (default
    ``3 / delta``) enters. Returns ``(a, standard_error)``.
    """
    times = np.asarray(times, dtype=float)
    measured = np.asarray(measured, dtype=float)
    coherent = np.asarray(coherent, dtype=float)
    t_max = 3.0 / delta if t_max is None else t_max
    sel = times <= t_max + 1e-12
    if noise_floor is None:
        noise_floor = 3.0 * float(np.max(stderr[sel])) if stderr is not None else 0.0
    scale = max(np.max(np.abs(coherent[sel])), 1e-300)
    if abs(coherent[0]) <= max(noise_floor, 1e-12 * scale):
        raise DegenerateCoherent(f"|coherent(0)| = {abs(coherent[0]):.3g} is below the noise floor")
    t = times[sel]
    y = measured[sel] - equilibrium
    c = coherent[sel]
    sigma = None
    if stderr is not None:
        s = np.asarray(stderr, dtype=float)[sel]
        positive = s[s > 0]
        sigma = np.maximum(s, positive.min() if positive.size else 1.0)

    def model(tt, a):
        return c * np.exp(-a * (delta * tt) ** 2)

    popt, pcov = curve_fit(model, t, y, p0=[0.75], sigma=sigma, absolute_sigma=sigma is not None,
                           bounds=(0.0, 50.0))
    return float(popt[0]), float(np.sqrt(pcov[0, 0]))


def rotated_mean_closed_form(hf, a, ebar, delta):
    """``<(O^T A O)_aa> = sum_m A_mm F(ebar_a - E_m)``."""
    from .ensemble import overlap_variance

    return np.diagonal(_as_matrix(a)) @ overlap_variance(hf, ebar, delta)


def rotated_variance_closed_form(hf, a, ebar, pairs, delta):
    """Variance of ``(O^T A O)_ab`` for each ``(a, b)`` in ``pairs``.

    ``(1 + delta_ab) Tr(A G_a A G_b) / (2 pi delta^2 rho_a rho_b)`` with
    ``G_g = exp(-(ebar_g - H_HF)^2 / (2 delta^2))``; the diagonal doubling
    is the Gaussian pairing ``<R_aa^2> = 2``.
    """
    am = _as_matrix(a)
    a2 = am * am
    ebar = np.asarray(ebar, dtype=float)
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    rho = hf.density(ebar)
    g = np.exp(-((ebar[:, None] - hf.levels[None, :]) ** 2) / (2.0 * delta**2))
    out = np.empty(len(pairs))
    for i, (al, be) in enumerate(pairs):
        tr = g[al] @ a2 @ g[be]
        out[i] = (1.0 + (al == be)) * tr / (2.0 * math.pi * delta**2 * rho[al] * rho[be])
    return out


def _bulk_indices(n, fraction=0.5):
    cut = int(n * (1.0 - fraction) / 2.0)
    return np.arange(cut, n - cut)


def rotated_mean_check(ensemble, hf, a, delta, n_bins=10, min_realizations=50, offset=1):
    """Ensemble means of rotated elements against the closed form, per alpha-bin.

    For every bin of bulk eigenstates the per-realization bin average of
    ``(O^T A O)_aa - closed_form_a`` (diagonal) and of ``(O^T A O)_{a,a+offset}``
    (off-diagonal) is averaged over realizations; ``z`` scores use the
    spread across realizations.
    """
    am = _as_matrix(a)
    diag_dev = []
    off = []
    closed = None
    bins = None
    for r in ensemble:
        if closed is None:
            ebar = r.ebar
            closed = rotated_mean_closed_form(hf, am, ebar, delta)
            idx = _bulk_indices(r.dim)
            bins = np.array_split(idx, n_bins)
        rot = r.rotate(am)
        d = np.diagonal(rot) - closed
        diag_dev.append([d[b].mean() for b in bins])
        off.append([rot[b, b + offset].mean() for b in bins])
    count = len(diag_dev)
    if count < min_realizations:
        raise TooFewRealizations(f"{count} realizations, need {min_realizations}")
    diag_dev, off = np.array(diag_dev), np.array(off)
    se_d = diag_dev.std(axis=0, ddof=1) / math.sqrt(count)
    se_o = off.std(axis=0, ddof=1) / math.sqrt(count)
    z_diag = diag_dev.mean(axis=0) / se_d
    z_off = off.mean(axis=0) / se_o
    return {
        "realizations": count,
        "bin_centers": [float(ebar[b].mean()) for b in bins],
        "closed_form": [float(closed[b].mean()) for b in bins],
        "measured": [float(closed[b].mean() + m) for b, m in zip(bins, diag_dev.mean(axis=0))],
        "z_diagonal": z_diag.tolist(),
        "z_offdiagonal": z_off.tolist(),
        "passed": bool(np.all(np.abs(z_diag) < 3.0) and np.all(np.abs(z_off) < 3.0)),
    }


def rotated_variance_check(ensemble, hf, a, delta, offsets=(0, 1, 5), min_realizations=100,
                           stride=1):
    """Monte Carlo variance of rotated elements against the closed form.

    For each offset ``k`` the pairs ``(a, a + k)`` over the bulk eigenstates
    are collected; the reported ratio is the mean over pairs of
    measured/closed variance.
    """
    am = _as_matrix(a)
    sums = sumsq = None
    pairs = None
    count = 0
    for r in ensemble:
        if pairs is None:
            idx = _bulk_indices(r.dim)[::stride]
            pairs = {k: np.stack([idx, idx + k], axis=1) for k in offsets}
            sums = {k: np.zeros(len(idx)) for k in offsets}
            sumsq = {k: np.zeros(len(idx)) for k in offsets}
            ebar = r.ebar
        rot = r.rotate(am)
        for k in offsets:
            x = rot[pairs[k][:, 0], pairs[k][:, 1]]
            sums[k] += x
            sumsq[k] += x * x
        count += 1
    if count < min_realizations:
        raise TooFewRealizations(f"{count} realizations, need {min_realizations}")
    report = {"realizations": count, "offsets": {}}
    for k in offsets:
        mean = sums[k] / count
        var = (sumsq[k] - count * mean**2) / (count - 1)
        closed = rotated_variance_closed_form(hf, am, ebar, pairs[k], delta)
        ok = closed > 0
        ratio = var[ok] / closed[ok]
        report["offsets"][int(k)] = {
            "measured": float(var.mean()),
            "closed_form": float(closed.mean()),
            "ratio": float(ratio.mean()) if ratio.size else float("nan"),
            "ratio_se": float(ratio.std(ddof=1) / math.sqrt(ratio.size)) if ratio.size > 1 else float("nan"),
        }
    return report


def connected_correlator(series, t1, t2):
    """``<T(t1) T(t2)> - <T(t1)><T(t2)>`` across realizations (nearest time samples)."""
    times = series[0].times
    i1 = int(np.argmin(np.abs(times - t1)))
    i2 = int(np.argmin(np.abs(times - t2)))
    x = np.array([s.values[i1] for s in series])
    y = np.array([s.values[i2] for s in series])
    return float(np.mean(x * y) - np.mean(x) * np.mean(y))


def self_averaging_check(series_by_n, t1, t2, min_realizations=100):
    """Connected two-time correlator per ensemble size and its log-log slope in N."""
    if len(series_by_n) < 3:
        raise InsufficientSpan("need at least 3 values of N")
    ns = sorted(series_by_n)
    corr = []
    for n in ns:
        series = series_by_n[n]
        if len(series) < min_realizations:
            raise TooFewRealizations(f"N={n}: {len(series)} realizations, need {min_realizations}")
        corr.append(connected_correlator(series, t1, t2))
    corr = np.array(corr)
    mags = np.abs(corr)
    slope = float(np.polyfit(np.log(ns), np.log(mags), 1)[0]) if np.all(mags > 0) else float("nan")
    return {
        "n": [int(n) for n in ns],
        "correlator": corr.tolist(),
        "monotone_decreasing": bool(np.all(np.diff(mags) < 0)),
        "slope": slope,
    }
