"""Observables, statistical operators and the time series Tr(A rho(t)).

Operators live in the HF basis. A diagonalized realization (``EigenSystem``
or :class:`~thermalab.ensemble.Realization`, anything with ``values``,
``vectors`` and ``rotate``) carries them into the eigenbasis, where

    Tr(A rho(t)) = sum_{ab} A_ab Pi_ab cos((E_a - E_b) t)

for real symmetric ``A`` and ``Pi``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSupport, DimensionMismatch, TooFewStates

__all__ = [
    "Observable",
    "StatisticalOperator",
    "EnergyStats",
    "TimeSeries",
    "make_wavepacket",
    "energy_stats",
    "hf_energy_stats",
    "evolve_trace",
    "equilibrium_value",
    "window_weights",
    "hf_coherent_term",
    "default_times",
    "rotated_diagonal",
]


@dataclass(frozen=True)
class Observable:
    """Real symmetric observable ``A_mn`` in the HF basis."""

    matrix: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def bandwidth(self):
        return self.params.get("bandwidth")

    def __add__(self, other):
        if self.dim != other.dim:
            raise DimensionMismatch("observables of different dimension")
        return Observable(self.matrix + other.matrix, kind=f"{self.kind}+{other.kind}",
                          params={**other.params, **self.params})

    def __mul__(self, factor):
        return Observable(float(factor) * self.matrix, kind=self.kind, params=dict(self.params))

    __rmul__ = __mul__

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim), kind="identity")

    @classmethod
    def diagonal_smooth(cls, hf, g):
        """``A = diag(g(E_m))``; commutes with the HF Hamiltonian."""
        return cls(np.diag(np.asarray(g(hf.levels), dtype=float)), kind="diagonal-smooth")

    @classmethod
    def projector(cls, hf, states):
        diag = np.zeros(hf.n_levels)
        diag[np.asarray(states)] = 1.0
        return cls(np.diag(diag), kind="projector")

    @classmethod
    def banded_random(cls, hf, bandwidth, strength, rng, cutoff=None):
        """Gaussian random matrix banded in HF energy.

        Entries ``A_mn`` are zero-mean Gaussians with variance proportional to
        ``exp(-(E_m - E_n)^2 / (2 (bandwidth/2)^2))``, zero beyond ``cutoff``
        (default ``bandwidth``), with the diagonal variance doubled. The profile
        is normalized so every row has mean squared norm ``strength**2``,
        which keeps the operator norm fixed as the level density grows.
        """
        if not bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        cutoff = bandwidth if cutoff is None else cutoff
        e = hf.levels
        diff = e[:, None] - e[None, :]
        profile = np.exp(-(diff**2) / (2.0 * (0.5 * bandwidth) ** 2))
        profile[np.abs(diff) > cutoff] = 0.0
        rowsum = profile.sum(axis=1)
        var = strength**2 * profile / np.sqrt(rowsum[:, None] * rowsum[None, :])
        g = rng.generator.standard_normal(var.shape)
        upper = np.triu(g * np.sqrt(var), 1)
        a = upper + upper.T
        a[np.diag_indices_from(a)] = np.diagonal(g) * np.sqrt(2.0 * np.diagonal(var))
        return cls(a, kind="banded-random",
                   params={"bandwidth": float(bandwidth), "strength": float(strength),
                           "cutoff": float(cutoff)})


def _as_matrix(op):
    return op.matrix if hasattr(op, "matrix") else np.asarray(op, dtype=float)


@dataclass(frozen=True)
class StatisticalOperator:
    """Unit-trace positive operator ``Pi`` in the HF basis.

    For a pure state ``amplitudes`` holds ``pi_r`` with ``Pi_rs = pi_r pi_s``.
    """

    matrix: np.ndarray
    amplitudes: np.ndarray = None

    @property
    def dim(self):
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, amplitudes):
        amp = np.asarray(amplitudes, dtype=float)
        amp = amp / np.linalg.norm(amp)
        return cls(np.outer(amp, amp), amplitudes=amp)

    @classmethod
    def mixture(cls, weights, states):
        """``sum_i w_i |psi_i><psi_i|`` from amplitude vectors ``states``."""
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        w = w / w.sum()
        dim = len(states[0])
        pi = np.zeros((dim, dim))
        for wi, psi in zip(w, states):
            psi = np.asarray(psi, dtype=float)
            psi = psi / np.linalg.norm(psi)
            pi += wi * np.outer(psi, psi)
        return cls(pi)

    def rotate(self, eig):
        """``O^T Pi O``, using the amplitudes when the state is pure."""
        if self.amplitudes is not None:
            c = eig.vectors.T @ self.amplitudes
            return np.outer(c, c)
        return eig.rotate(self.matrix)

    def check(self, tol=1e-12):
        """Raise ``ValueError`` unless ``Pi`` has unit trace and is PSD."""
        from .matcore import eigvalsh

        if abs(np.trace(self.matrix) - 1.0) > tol:
            raise ValueError(f"trace {np.trace(self.matrix)!r} != 1")
        if eigvalsh(self.matrix)[0] < -tol:
            raise ValueError("operator is not positive semidefinite")


@dataclass(frozen=True)
class EnergyStats:
    mean_e: float
    delta_s: float


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    realization_id: int = 0
    imag_residue: float = 0.0


def make_wavepacket(hf, center_e, width, rng, min_support=10):
    """Pure state with Gaussian envelope and random signs on the HF levels.

    Amplitudes are ``chi_r exp(-(E_r - center_e)^2 / (4 width^2))`` with
    ``chi_r = +-1``, so the HF occupation has standard deviation ``width``.

    Raises
    ------
    DegenerateSupport
        If fewer than ``min_support`` levels carry 99% of the weight.
    """
    if not width > 0:
        raise ValueError("width must be positive")
    z = (hf.levels - center_e) ** 2 / (4.0 * width**2)
    log_amp = -(z - z.min())
    amp = np.exp(log_amp)
    signs = np.where(rng.generator.random(hf.n_levels) < 0.5, -1.0, 1.0)
    amp = signs * amp
    amp /= np.linalg.norm(amp)
    weights = np.sort(amp**2)[::-1]
    support = int(np.searchsorted(np.cumsum(weights), 0.99) + 1)
    if support < min_support:
        raise DegenerateSupport(f"only {support} levels carry 99% of the weight")
    return StatisticalOperator.pure(amp)


def _eig_occupations(pi, eig):
    if pi.dim != eig.vectors.shape[0]:
        raise DimensionMismatch(f"state dim {pi.dim} vs basis dim {eig.vectors.shape[0]}")
    if pi.amplitudes is not None:
        return (eig.vectors.T @ pi.amplitudes) ** 2
    return np.einsum("ma,mn,na->a", eig.vectors, pi.matrix, eig.vectors, optimize=True)


def energy_stats(pi, eig):
    """Mean energy and quantum uncertainty of ``pi`` in the eigenbasis."""
    occ = _eig_occupations(pi, eig)
    mean = float(np.dot(eig.values, occ) / occ.sum())
    var = float(np.dot((eig.values - mean) ** 2, occ) / occ.sum())
    return EnergyStats(mean_e=mean, delta_s=math.sqrt(max(var, 0.0)))


def hf_energy_stats(pi, hf):
    """Mean energy and spread of ``pi`` over the HF levels (its diagonal occupations)."""
    occ = np.diagonal(pi.matrix)
    mean = float(np.dot(hf.levels, occ) / occ.sum())
    var = float(np.dot((hf.levels - mean) ** 2, occ) / occ.sum())
    return EnergyStats(mean_e=mean, delta_s=math.sqrt(max(var, 0.0)))


def default_times(delta, n_points=200, t_max_over_invdelta=6.0):
    return np.linspace(0.0, t_max_over_invdelta / delta, n_points)


def _trace_series(weights, energies, times):
    """``sum_ab W_ab cos((e_a - e_b) t)`` for symmetric ``W``; returns (values, imag)."""
    e = np.asarray(energies, dtype=float)
    e = e - e.mean()
    times = np.asarray(times, dtype=float)
    out = np.empty(times.shape[0])
    imag = 0.0
    step = max(1, int(4_000_000 // max(e.size, 1) // 8))
    for lo in range(0, times.shape[0], step):
        t = times[lo:lo + step]
        phase = np.exp(1j * np.outer(e, t))
        z = np.einsum("at,at->t", phase.conj(), weights @ phase)
        out[lo:lo + step] = z.real
        imag = max(imag, float(np.max(np.abs(z.imag))) if z.size else 0.0)
    return out, imag


def evolve_trace(a, pi, eig, times, realization_id=0):
    """Tr(A rho(t)) evaluated in the eigenbasis of one realization."""
    am = _as_matrix(a)
    if am.shape[0] != eig.vectors.shape[0] or pi.dim != eig.vectors.shape[0]:
        raise DimensionMismatch("observable, state and eigenbasis dimensions differ")
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be ascending")
    a_eig = eig.rotate(am)
    pi_eig = pi.rotate(eig)
    values, imag = _trace_series(a_eig * pi_eig, eig.values, times)
    return TimeSeries(times=times, values=values, realization_id=realization_id,
                      imag_residue=imag)


def hf_coherent_term(a, pi, hf, times):
    """Tr(A exp(-i H_HF t) Pi exp(i H_HF t)) in the HF basis."""
    am = _as_matrix(a)
    if am.shape != pi.matrix.shape or am.shape[0] != hf.n_levels:
        raise DimensionMismatch("observable, state and HF model dimensions differ")
    values, _ = _trace_series(am * pi.matrix, hf.levels, times)
    return values


def rotated_diagonal(a, eig):
    """Diagonal of ``O^T A O`` without forming the full product's transpose."""
    am = _as_matrix(a)
    return np.einsum("ma,ma->a", eig.vectors, am @ eig.vectors)


def window_weights(energies, center_e, delta, kappa=4.0):
    """Gaussian microcanonical weights, truncated at ``kappa`` standard deviations."""
    d = np.asarray(energies, dtype=float) - center_e
    w = np.exp(-(d**2) / (2.0 * delta**2))
    w[np.abs(d) > kappa * delta] = 0.0
    return w


def equilibrium_value(a, eig, center_e, delta, kappa=4.0, min_states=10, a_diag=None):
    """Microcanonical average of the eigenbasis diagonal of ``A``.

    Gaussian weights of width ``delta`` about ``center_e``; self-normalized so
    the identity gives exactly 1.
    """
    w = window_weights(eig.values, center_e, delta, kappa)
    inside = int(np.count_nonzero(w))
    if inside < min_states:
        raise TooFewStates(f"{inside} eigenvalues in the window, need {min_states}")
    diag = rotated_diagonal(a, eig) if a_diag is None else a_diag
    return float(np.dot(w, diag) / w.sum())
