"""Dense real symmetric linear algebra and seeded random sampling.

Symmetric operators are plain ``float64`` ndarrays validated by
:func:`as_symmetric`; there is no wrapper type.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _linalg
from .errors import NonConvergence

__all__ = [
    "RngStream",
    "EigenSystem",
    "as_symmetric",
    "eigh",
    "eigvalsh",
    "tridiagonal_eigvals",
    "sample_gaussian",
    "sample_goe",
    "sample_goe_eigvals",
]

MAX_SWEEPS = 50
_U64 = 2**64


class RngStream:
    """Reproducible random stream identified by ``(seed, stream)``.

    Backed by the counter-based Philox generator keyed through
    :class:`numpy.random.SeedSequence`, so realization ``k`` of an ensemble
    draws from ``RngStream(master_seed, k)`` regardless of which worker runs
    it. A stream is stateful; do not share one instance between threads,
    derive children with :meth:`child` instead.
    """

    def __init__(self, seed=0, stream=0, _path=()):
        for name, value in (("seed", seed), ("stream", stream)):
            if not 0 <= int(value) < _U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value}")
        self.seed = int(seed)
        self.stream = int(stream)
        self._path = tuple(int(k) for k in _path)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,) + self._path)
        self.generator = np.random.Generator(np.random.Philox(ss))

    def child(self, key):
        """Independent sub-stream; identical ``key`` gives identical draws."""
        return RngStream(self.seed, self.stream, self._path + (int(key),))

    def __repr__(self):
        path = f", path={self._path}" if self._path else ""
        return f"RngStream(seed={self.seed}, stream={self.stream}{path})"


def as_symmetric(h, atol=0.0):
    """Validate and return ``h`` as a square symmetric float64 array."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix has non-finite entries")
    if np.max(np.abs(h - h.T)) > atol:
        raise ValueError("matrix is not symmetric")
    return h


@dataclass(frozen=True)
class EigenSystem:
    """Spectral decomposition ``H = O diag(E) O^T``.

    ``values`` ascend; column ``a`` of ``vectors`` is the eigenvector for
    ``values[a]``, i.e. ``vectors[m, a]`` is the overlap ``O_{m a}``.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self):
        return self.values.shape[0]

    def reconstruct(self):
        return (self.vectors * self.values) @ self.vectors.T

    def rotate(self, m):
        """Express the HF-basis operator ``m`` in the eigenbasis: ``O^T m O``."""
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (self.dim, self.dim):
            from .errors import DimensionMismatch

            raise DimensionMismatch(f"operator shape {m.shape} vs dim {self.dim}")
        return self.vectors.T @ m @ self.vectors

    @cached_property
    def orthogonality_error(self):
        o = self.vectors
        return float(np.max(np.abs(o.T @ o - np.eye(self.dim))))


def _fix_signs(vectors, tol=1e-12):
    # first component above tol made positive, column by column
    idx = np.argmax(np.abs(vectors) > tol, axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def tridiagonal_eigvals(d, e):
    """Eigenvalues (ascending) of the symmetric tridiagonal matrix.

    ``d`` is the diagonal, ``e`` the ``n - 1`` off-diagonal entries.
    """
    d = np.array(d, dtype=np.float64)
    n = d.shape[0]
    ee = np.zeros(n)
    ee[: n - 1] = e
    failed = _linalg.tql_implicit(d, ee, np.empty((0, 0)), False, MAX_SWEEPS)
    if failed >= 0:
        raise NonConvergence(f"QL iteration exceeded {MAX_SWEEPS} sweeps at eigenvalue {failed}")
    return np.sort(d)


def eigvalsh(h):
    """Ascending eigenvalues of a symmetric matrix (no eigenvectors)."""
    h = as_symmetric(h)
    d, e, _ = _linalg.tridiagonalize(h, False)
    failed = _linalg.tql_implicit(d, e, np.empty((0, 0)), False, MAX_SWEEPS)
    if failed >= 0:
        raise NonConvergence(f"QL iteration exceeded {MAX_SWEEPS} sweeps at eigenvalue {failed}")
    return np.sort(d)


def eigh(h):
    """Full eigendecomposition of a real symmetric matrix.

    Householder tridiagonalization followed by implicit-shift QL with
    eigenvector accumulation. Eigenvalues ascend and every eigenvector has
    its first non-negligible component positive, so the output is
    deterministic for a fixed input.

    Raises
    ------
    NonConvergence
        If any eigenvalue needs more than 50 QL sweeps.
    """
    h = as_symmetric(h)
    d, e, q = _linalg.tridiagonalize(h, True)
    zt = np.ascontiguousarray(q.T)
    failed = _linalg.tql_implicit(d, e, zt, True, MAX_SWEEPS)
    if failed >= 0:
        raise NonConvergence(f"QL iteration exceeded {MAX_SWEEPS} sweeps at eigenvalue {failed}")
    order = np.argsort(d, kind="stable")
    vectors = _fix_signs(zt[order].T)
    return EigenSystem(values=d[order], vectors=np.ascontiguousarray(vectors))


def sample_gaussian(rng, mean, sd, count):
    if sd < 0:
        raise ValueError("sd must be non-negative")
    if sd == 0:
        return np.full(count, float(mean))
    return rng.generator.normal(mean, sd, count)


def sample_goe(rng, dim, scale=1.0):
    """GOE draw: off-diagonal entries N(0, scale^2), diagonal N(0, 2 scale^2)."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    g = rng.generator.standard_normal((dim, dim))
    upper = np.triu(g, 1) * scale
    h = upper + upper.T
    h[np.diag_indices(dim)] = np.sqrt(2.0) * scale * np.diagonal(g)
    return h


def sample_goe_eigvals(rng, dim, scale=1.0):
    """Eigenvalues of a GOE draw with the :func:`sample_goe` normalization.

    Uses the Dumitriu-Edelman tridiagonal model (diagonal N(0, 2 scale^2),
    off-diagonals ``scale * chi_k`` for k = dim-1, ..., 1), which has exactly
    the GOE joint eigenvalue law at O(dim^2) cost.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    gen = rng.generator
    d = gen.normal(0.0, np.sqrt(2.0) * scale, dim)
    e = scale * np.sqrt(gen.chisquare(np.arange(dim - 1, 0, -1))) if dim > 1 else np.empty(0)
    return tridiagonal_eigvals(d, e)
