import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import jacobi_eigh
from thermalab.errors import NonConvergence
from thermalab.matcore import (
    EigenSystem,
    RngStream,
    as_symmetric,
    eigh,
    eigvalsh,
    sample_gaussian,
    sample_goe,
    sample_goe_eigvals,
    tridiagonal_eigvals,
)


def random_symmetric(n, seed):
    g = np.random.default_rng(seed).standard_normal((n, n))
    return 0.5 * (g + g.T)


@pytest.mark.parametrize("n", [1, 2, 3, 8, 33, 64])
def test_eigh_matches_jacobi(n):
    h = random_symmetric(n, n)
    ref_vals, _ = jacobi_eigh(h)
    eig = eigh(h)
    assert np.max(np.abs(eig.values - ref_vals)) < 1e-10
    scale = np.linalg.norm(h)
    assert np.linalg.norm(eig.reconstruct() - h) <= 1e-9 * scale
    assert eig.orthogonality_error < 1e-12


def test_eigvalsh_agrees_with_eigh():
    h = random_symmetric(50, 7)
    np.testing.assert_allclose(eigvalsh(h), eigh(h).values, atol=1e-12)


def test_diagonal_input_is_exact():
    d = np.array([3.0, -1.0, 2.0, 0.5])
    eig = eigh(np.diag(d))
    np.testing.assert_array_equal(eig.values, np.sort(d))
    np.testing.assert_allclose(np.abs(eig.vectors), np.eye(4)[:, np.argsort(d)], atol=0)


def test_degenerate_spectrum_keeps_orthonormal_vectors():
    q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((6, 6)))
    h = q @ np.diag([1.0, 1.0, 1.0, 2.0, 2.0, 5.0]) @ q.T
    h = 0.5 * (h + h.T)
    eig = eigh(h)
    np.testing.assert_allclose(eig.values, [1, 1, 1, 2, 2, 5], atol=1e-12)
    assert eig.orthogonality_error < 1e-12


def test_sign_convention_first_component_positive():
    eig = eigh(random_symmetric(12, 3))
    for col in eig.vectors.T:
        first = col[np.argmax(np.abs(col) > 1e-12)]
        assert first > 0


def test_eigh_is_deterministic():
    h = random_symmetric(40, 11)
    a, b = eigh(h), eigh(h)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.vectors, b.vectors)


@pytest.mark.parametrize("bad", [np.ones((2, 3)), np.array([[1.0, 2.0], [0.0, 1.0]]),
                                 np.array([[np.nan]])])
def test_rejects_invalid_matrices(bad):
    with pytest.raises(ValueError):
        as_symmetric(bad)


def test_sweep_cap_raises_nonconvergence():
    from thermalab import _linalg

    d = np.array([1.0, 2.0, 3.0])
    e = np.array([1.0, 1.0, 0.0])
    assert _linalg.tql_implicit(d, e, np.empty((0, 0)), False, 0) >= 0
    with pytest.raises(NonConvergence):
        import thermalab.matcore as mc

        saved = mc.MAX_SWEEPS
        mc.MAX_SWEEPS = 0
        try:
            mc.tridiagonal_eigvals([1.0, 2.0, 3.0], [1.0, 1.0])
        finally:
            mc.MAX_SWEEPS = saved


def test_tridiagonal_eigvals_against_dense():
    rng = np.random.default_rng(5)
    d, e = rng.standard_normal(30), rng.standard_normal(29)
    dense = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    np.testing.assert_allclose(tridiagonal_eigvals(d, e), jacobi_eigh(dense)[0], atol=1e-11)


def test_rotate_expresses_operator_in_eigenbasis():
    h = random_symmetric(10, 2)
    eig = eigh(h)
    np.testing.assert_allclose(eig.rotate(h), np.diag(eig.values), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_property_trace_and_frobenius_preserved(n, seed):
    h = random_symmetric(n, seed)
    eig = eigh(h)
    assert abs(eig.values.sum() - np.trace(h)) < 1e-10 * max(1.0, np.abs(h).sum())
    assert abs(np.sum(eig.values**2) - np.sum(h * h)) < 1e-10 * max(1.0, np.sum(h * h))
    assert np.all(np.diff(eig.values) >= 0)


def test_rng_streams_are_reproducible_and_independent():
    a = RngStream(42, 3).generator.standard_normal(5)
    b = RngStream(42, 3).generator.standard_normal(5)
    c = RngStream(42, 4).generator.standard_normal(5)
    d = RngStream(42, 3).child(0).generator.standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(0, 2**64)


def test_sample_gaussian_edge_cases():
    rng = RngStream(1)
    assert np.array_equal(sample_gaussian(rng, 2.5, 0.0, 4), np.full(4, 2.5))
    with pytest.raises(ValueError):
        sample_gaussian(rng, 0.0, -1.0, 3)
    x = sample_gaussian(rng, 1.0, 2.0, 200_000)
    assert abs(x.mean() - 1.0) < 0.02 and abs(x.std() - 2.0) < 0.02


def test_goe_normalization():
    draws = np.array([sample_goe(RngStream(7, k), 40, 0.5) for k in range(200)])
    off = draws[:, np.triu_indices(40, 1)[0], np.triu_indices(40, 1)[1]]
    diag = draws[:, np.arange(40), np.arange(40)]
    assert abs(off.var() / 0.25 - 1.0) < 0.03
    assert abs(diag.var() / 0.5 - 1.0) < 0.06
    assert np.array_equal(draws[0], draws[0].T)


def test_tridiagonal_goe_eigenvalues_match_dense_statistics():
    # second moment sum(E^2) = Tr(H^2) has mean dim(dim+1) scale^2 for this normalization
    dim = 60
    fast = [np.sum(sample_goe_eigvals(RngStream(3, k), dim) ** 2) for k in range(300)]
    assert abs(np.mean(fast) / (dim * (dim + 1)) - 1.0) < 0.02
    # semicircle edge at 2 sqrt(dim)
    top = np.mean([sample_goe_eigvals(RngStream(4, k), dim)[-1] for k in range(100)])
    assert abs(top / (2.0 * np.sqrt(dim)) - 1.0) < 0.05
