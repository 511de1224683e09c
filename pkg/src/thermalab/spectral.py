"""Nearest-neighbour spacing diagnostics for unfolded spectra."""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import TooFewLevels

__all__ = [
    "SpacingHistogram",
    "spacing_distribution",
    "ks_distance",
    "wigner_pdf",
    "wigner_cdf",
    "poisson_pdf",
    "poisson_cdf",
    "central_half",
]


def wigner_pdf(s):
    s = np.asarray(s, dtype=float)
    return 0.5 * np.pi * s * np.exp(-0.25 * np.pi * s * s)


def wigner_cdf(s):
    s = np.clip(np.asarray(s, dtype=float), 0.0, None)
    return -np.expm1(-0.25 * np.pi * s * s)


def poisson_pdf(s):
    return np.exp(-np.asarray(s, dtype=float))


def poisson_cdf(s):
    s = np.clip(np.asarray(s, dtype=float), 0.0, None)
    return -np.expm1(-s)


_REFERENCE_CDF = {"wigner": wigner_cdf, "poisson": poisson_cdf}


def central_half(values):
    values = np.asarray(values)
    n = values.shape[0]
    return values[n // 4: n - n // 4]


@dataclass(frozen=True)
class SpacingHistogram:
    """Binned spacings plus the raw spacings they came from.

    The raw spacings are kept because :func:`ks_distance` works on them, not on
    the binned counts.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    spacings: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def centers(self):
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def density(self):
        widths = np.diff(self.bin_edges)
        n = self.spacings.size
        return self.counts / (n * widths) if n else np.zeros_like(widths)


def spacing_distribution(unfolded, n_bins=40, s_max=4.0):
    """Histogram of consecutive differences of one or more unfolded spectra.

    ``unfolded`` is either a single ascending array or a sequence of them (an
    ensemble); spacings never straddle two spectra. Spacings are rescaled to
    unit mean before binning.
    """
    arrays = [unfolded] if np.ndim(unfolded[0]) == 0 else list(unfolded)
    spacings = np.concatenate([np.diff(np.asarray(a, dtype=float)) for a in arrays])
    if spacings.size + len(arrays) < 50:
        raise TooFewLevels(f"need at least 50 unfolded eigenvalues, got {spacings.size + len(arrays)}")
    spacings = spacings / spacings.mean()
    edges = np.linspace(0.0, s_max, n_bins + 1)
    counts, _ = np.histogram(np.clip(spacings, 0.0, s_max), bins=edges)
    return SpacingHistogram(bin_edges=edges, counts=counts, spacings=spacings)


def ks_distance(hist, reference="wigner"):
    """Sup-distance between the spacing ECDF and the reference CDF."""
    try:
        cdf = _REFERENCE_CDF[reference]
    except KeyError:
        raise ValueError(f"unknown reference {reference!r}") from None
    s = hist.spacings if isinstance(hist, SpacingHistogram) else np.asarray(hist, dtype=float)
    if s.size < 49:
        raise TooFewLevels("need at least 50 levels for a KS distance")
    s = s / s.mean()
    return float(stats.kstest(s, cdf).statistic)
