"""Chaotic Hamiltonians built on an integrable Hartree-Fock scaffold.

:func:`build_microscopic` adds a GOE residual interaction to
``diag(levels)``, to be diagonalized. The phenomenological route
(:func:`sample_phenomenological`) instead draws eigenvalues and overlaps
directly: Wigner-Dyson levels about a smooth grid, and overlaps whose
variance follows a Gaussian profile of width ``delta`` in energy. The
overlaps come in three flavours (``MODES``), differing in how exactly
orthogonality is enforced.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, FitFailure, InvalidDensity, OutOfRange
from .matcore import sample_goe, sample_goe_eigvals

__all__ = [
    "PicketFence",
    "ExponentialGrowth",
    "HfModel",
    "build_hf",
    "build_microscopic",
    "coupling_for_width",
    "BgsEnsembleSpec",
    "Realization",
    "overlap_variance",
    "sample_phenomenological",
    "sample_phenomenological_eigvals",
    "diffusive_overlap",
    "lowdin",
    "MODES",
    "iter_realizations",
    "level_density",
    "correlation_n",
    "unfold",
    "SmallCorrelationWarning",
]


MODES = ("gaussian", "orthogonalized", "diffusive")


class SmallCorrelationWarning(UserWarning):
    """Fewer than 10 levels inside one correlation width."""


@dataclass(frozen=True)
class PicketFence:
    spacing: float

    def __post_init__(self):
        if not self.spacing > 0:
            raise InvalidDensity(f"picket-fence spacing must be positive, got {self.spacing}")

    def density(self, e, e_min):
        return np.full_like(np.asarray(e, dtype=float), 1.0 / self.spacing)

    def counting(self, e, e_min):
        return (np.asarray(e, dtype=float) - e_min) / self.spacing

    def energy_at(self, x, e_min):
        return e_min + np.asarray(x, dtype=float) * self.spacing


@dataclass(frozen=True)
class ExponentialGrowth:
    """Mean level density ``rho0 * exp(E / t0)``."""

    rho0: float
    t0: float

    def __post_init__(self):
        if not self.rho0 > 0:
            raise InvalidDensity(f"rho0 must be positive, got {self.rho0}")
        if not self.t0 > 0:
            raise InvalidDensity(f"t0 must be positive, got {self.t0}")

    def density(self, e, e_min):
        return self.rho0 * np.exp(np.asarray(e, dtype=float) / self.t0)

    def counting(self, e, e_min):
        e = np.asarray(e, dtype=float)
        return self.rho0 * self.t0 * (np.exp(e / self.t0) - math.exp(e_min / self.t0))

    def energy_at(self, x, e_min):
        x = np.asarray(x, dtype=float)
        return self.t0 * np.log(math.exp(e_min / self.t0) + x / (self.rho0 * self.t0))


@dataclass(frozen=True)
class HfModel:
    """HF levels ``levels[m]`` realizing a smooth mean density.

    Level ``m`` sits where the model's counting function equals ``m``, so
    :meth:`energy_at` interpolates the spectrum at fractional indices.
    """

    levels: np.ndarray
    density_model: object
    e_min: float

    @property
    def n_levels(self):
        return self.levels.shape[0]

    @property
    def span(self):
        return float(self.levels[-1] - self.levels[0])

    def density(self, e):
        """Analytic mean level density of the generating model."""
        return self.density_model.density(e, self.e_min)

    def counting(self, e):
        return self.density_model.counting(e, self.e_min)

    def energy_at(self, x):
        return self.density_model.energy_at(x, self.e_min)


def build_hf(density_model, n_levels, e_min=0.0):
    if n_levels < 2:
        raise ValueError("need at least 2 HF levels")
    levels = density_model.energy_at(np.arange(n_levels, dtype=float), float(e_min))
    levels = np.asarray(levels, dtype=float)
    if np.any(np.diff(levels) <= 0):
        raise InvalidDensity("density model produced non-ascending levels")
    return HfModel(levels=levels, density_model=density_model, e_min=float(e_min))


def coupling_for_width(hf, gamma, e=None):
    """Coupling whose golden-rule spreading width ``2 pi lambda^2 rho`` is ``gamma``."""
    if e is None:
        e = 0.5 * (hf.levels[0] + hf.levels[-1])
    return math.sqrt(gamma / (2.0 * math.pi * float(hf.density(e))))


def build_microscopic(hf, coupling, rng):
    """``diag(levels) + coupling * V`` with ``V`` a unit-scale GOE draw."""
    if coupling < 0:
        raise ValueError("coupling must be non-negative")
    h = np.diag(hf.levels.astype(float))
    if coupling > 0:
        h = h + coupling * sample_goe(rng, hf.n_levels, 1.0)
    return h


@dataclass(frozen=True)
class BgsEnsembleSpec:
    """Parameters of the phenomenological ensemble.

    ``n_states`` eigenstates (default: one per HF level) are placed in the
    middle of the HF spectrum.
    """

    hf: HfModel
    delta: float
    center: float
    n_realizations: int = 1
    mode: str = "orthogonalized"
    n_states: int = None

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        n = self.correlation_n
        if n < 1:
            raise ValueError(f"N = rho * delta = {n:.3g} < 1")
        if n < 10:
            warnings.warn(f"N = rho * delta = {n:.3g} < 10; GOE limit needs N >> 1",
                          SmallCorrelationWarning, stacklevel=3)

    @property
    def correlation_n(self):
        return float(self.hf.density(self.center)) * self.delta

    @property
    def states(self):
        return self.hf.n_levels if self.n_states is None else int(self.n_states)


@dataclass(frozen=True)
class Realization:
    """One ensemble member: eigenvalues, overlaps ``O[m, a]`` and mean positions."""

    eigvals: np.ndarray
    overlap: np.ndarray
    ebar: np.ndarray
    mode: str = "orthogonalized"
    index: int = 0

    # duck-typed EigenSystem surface
    @property
    def values(self):
        return self.eigvals

    @property
    def vectors(self):
        return self.overlap

    @property
    def dim(self):
        return self.eigvals.shape[0]

    def rotate(self, m):
        m = np.asarray(m, dtype=float)
        if m.shape != (self.overlap.shape[0],) * 2:
            raise DimensionMismatch(f"operator shape {m.shape} vs HF dim {self.overlap.shape[0]}")
        return self.overlap.T @ m @ self.overlap


def overlap_variance(hf, ebar, delta, levels=None):
    """Variance profile ``F(ebar_a - E_m)`` as an ``(n_levels, len(ebar))`` array."""
    levels = hf.levels if levels is None else levels
    ebar = np.asarray(ebar, dtype=float)
    rho = hf.density(ebar)
    diff = ebar[None, :] - levels[:, None]
    return np.exp(-(diff**2) / (2.0 * delta**2)) / (math.sqrt(2.0 * math.pi) * rho * delta)[None, :]


def _semicircle_count(x, dim):
    # mean number of GOE(scale=1) eigenvalues below x
    u = np.clip(x / (2.0 * math.sqrt(dim)), -1.0, 1.0)
    return dim * (0.5 + (u * np.sqrt(1.0 - u**2) + np.arcsin(u)) / math.pi)


def wigner_dyson_positions(rng, n):
    """``n`` fractional level indices with GOE correlations and unit mean spacing.

    The central ``n`` eigenvalues of a ``2n + 40`` dimensional GOE draw are
    unfolded with the exact semicircle counting function and shifted so that
    entry ``a`` fluctuates about ``a``.
    """
    m = 2 * n + 40
    x = _semicircle_count(sample_goe_eigvals(rng, m), m)
    j0 = (m - n) // 2
    return x[j0:j0 + n] - j0 - 0.5


def sample_phenomenological(spec, rng, index=0):
    """Draw one realization of the phenomenological ensemble.

    ``gaussian``
        Overlaps are independent zero-mean Gaussians with variance
        ``F(ebar_a - E_m)``. Columns are orthonormal only on average.
    ``orthogonalized``
        The Gaussian overlaps replaced by their Loewdin (polar) factor. Exactly
        orthogonal, but the polar factor mixes neighbouring columns at O(1)
        and broadens the variance profile beyond ``F``.
    ``diffusive``
        Exactly orthogonal overlaps whose variance profile is ``F`` itself:
        see :func:`diffusive_overlap`.
    """
    hf = spec.hf
    n = spec.states
    if n > hf.n_levels:
        raise DimensionMismatch(f"{n} eigenstates requested from {hf.n_levels} HF levels")
    start = (hf.n_levels - n) // 2
    ebar = hf.energy_at(start + np.arange(n, dtype=float))
    eigvals = sample_phenomenological_eigvals(spec, rng)
    if spec.mode == "diffusive":
        sigma = float(hf.density(spec.center)) * spec.delta
        overlap = diffusive_overlap(rng.child(1), hf.n_levels, sigma)[:, start:start + n]
    else:
        sd = np.sqrt(overlap_variance(hf, ebar, spec.delta))
        overlap = rng.child(1).generator.standard_normal(sd.shape) * sd
        if spec.mode == "orthogonalized":
            overlap = lowdin(overlap)
    return Realization(eigvals=np.asarray(eigvals), overlap=overlap, ebar=np.asarray(ebar),
                       mode=spec.mode, index=index)


def sample_phenomenological_eigvals(spec, rng):
    """The eigenvalues :func:`sample_phenomenological` would draw, without overlaps."""
    hf = spec.hf
    n = spec.states
    if n > hf.n_levels:
        raise DimensionMismatch(f"{n} eigenstates requested from {hf.n_levels} HF levels")
    start = (hf.n_levels - n) // 2
    return np.asarray(hf.energy_at(start + wigner_dyson_positions(rng.child(0), n)))


def lowdin(o):
    """Symmetric orthonormalization ``O (O^T O)^{-1/2}``, computed as ``U V^T``."""
    u, _, vt = np.linalg.svd(o, full_matrices=False)
    return u @ vt


def _haar_blocks(gen, count, size):
    q, r = np.linalg.qr(gen.standard_normal((count, size, size)))
    return q * np.sign(np.diagonal(r, axis1=1, axis2=2))[:, None, :]


def diffusion_schedule(sigma, target_layers=40):
    """Block size and layer count whose index-space spread is ``sigma``.

    One layer moves a column's weight by a difference of two uniform
    positions in a block of ``b`` sites, variance ``(b^2 - 1) / 6``.
    """
    b = max(2, int(round(math.sqrt(6.0 * sigma**2 / target_layers + 1.0))))
    layers = max(1, int(round(6.0 * sigma**2 / (b * b - 1))))
    return b, layers


def diffusive_overlap(rng, dim, sigma):
    """Random orthogonal matrix with a Gaussian profile of width ``sigma`` (in levels).

    Starting from the identity, each layer applies independent Haar-random
    orthogonal blocks of ``b`` consecutive HF levels, with a random block
    offset. The mean squared overlap ``<O_ma^2>`` then performs a symmetric
    random walk in ``m`` about ``a``; after many layers its profile is the
    Gaussian heat kernel, while every layer keeps ``O`` exactly orthogonal.
    """
    gen = rng.generator
    b, layers = diffusion_schedule(sigma)
    b = min(b, dim)
    o = np.eye(dim)
    for _ in range(layers):
        offset = int(gen.integers(0, b))
        nblocks = (dim - offset) // b
        lo, hi = offset, offset + nblocks * b
        if nblocks:
            q = _haar_blocks(gen, nblocks, b)
            block = o[lo:hi].reshape(nblocks, b, dim)
            o[lo:hi] = np.matmul(q.transpose(0, 2, 1), block).reshape(nblocks * b, dim)
        for a0, a1 in ((0, lo), (hi, dim)):
            if a1 - a0 >= 2:
                o[a0:a1] = _haar_blocks(gen, 1, a1 - a0)[0].T @ o[a0:a1]
    return o


def iter_realizations(spec, master_seed, start=0):
    """Realizations ``start .. n_realizations-1``; member ``k`` uses stream ``k``."""
    from .matcore import RngStream

    for k in range(start, spec.n_realizations):
        yield sample_phenomenological(spec, RngStream(master_seed, k), index=k)


def level_density(hf, e, smoothing):
    """Gaussian-kernel estimate of the level density at ``e``.

    Callers should pass ``smoothing`` of at least a few mean spacings; as
    ``smoothing`` goes to zero the estimate diverges on a level and vanishes
    between levels.
    """
    if not smoothing > 0:
        raise ValueError("smoothing must be positive")
    lo, hi = hf.levels[0] - smoothing, hf.levels[-1] + smoothing
    if not lo <= e <= hi:
        raise OutOfRange(f"energy {e} outside [{lo}, {hi}]")
    z = (e - hf.levels) / smoothing
    return float(np.sum(np.exp(-0.5 * z * z)) / (math.sqrt(2.0 * math.pi) * smoothing))


def local_spacing(hf, e):
    idx = int(np.clip(np.searchsorted(hf.levels, e), 1, hf.n_levels - 1))
    lo, hi = max(idx - 3, 0), min(idx + 3, hf.n_levels - 1)
    return float((hf.levels[hi] - hf.levels[lo]) / (hi - lo))


def correlation_n(hf, e, delta, smoothing=None):
    """``N = rho(e) * delta``; warns when N < 10."""
    if smoothing is None:
        smoothing = 3.0 * local_spacing(hf, e)
    n = level_density(hf, e, smoothing) * delta
    if n < 10:
        warnings.warn(f"N = {n:.3g} < 10; GOE limit needs N >> 1", SmallCorrelationWarning,
                      stacklevel=2)
    return n


def unfold(eigvals, poly_degree=7, fit_fraction=0.8, keep_fraction=None):
    """Unfold a spectrum to unit mean spacing.

    A polynomial of ``poly_degree`` is fitted to the staircase over the central
    ``fit_fraction`` of the eigenvalues; the central ``keep_fraction`` (default:
    the fitted part) is mapped through it and returned.

    Raises
    ------
    FitFailure
        Too few eigenvalues for the degree, an ill-conditioned fit, or a fitted
        counting function that is not increasing over the kept eigenvalues.
    """
    e = np.asarray(eigvals, dtype=float)
    if e.ndim != 1 or e.size < poly_degree + 2:
        raise FitFailure(f"{e.size} eigenvalues cannot support a degree-{poly_degree} fit")
    if np.any(np.diff(e) < 0):
        raise ValueError("eigenvalues must be ascending")
    keep_fraction = fit_fraction if keep_fraction is None else keep_fraction
    n = e.size
    fit_sl = _central(n, fit_fraction)
    keep_sl = _central(n, keep_fraction)
    x, y = e[fit_sl], np.arange(n, dtype=float)[fit_sl]
    if x.size < poly_degree + 2 or x[-1] == x[0]:
        raise FitFailure("too few distinct eigenvalues in the fit window")
    with warnings.catch_warnings():
        warnings.simplefilter("error", np.exceptions.RankWarning)
        try:
            poly = np.polynomial.Polynomial.fit(x, y, poly_degree)
        except (np.exceptions.RankWarning, np.linalg.LinAlgError) as exc:
            raise FitFailure(f"staircase fit ill-conditioned: {exc}") from exc
    out = poly(e[keep_sl])
    if np.any(np.diff(out) <= 0):
        raise FitFailure("fitted counting function is not increasing")
    return out


def _central(n, fraction):
    cut = int(round(n * (1.0 - fraction) / 2.0))
    return slice(cut, n - cut)
