import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from thermalab.ensemble import unfold
from thermalab.errors import TooFewLevels
from thermalab.matcore import RngStream, sample_goe_eigvals
from thermalab.spectral import (
    central_half,
    ks_distance,
    poisson_cdf,
    poisson_pdf,
    spacing_distribution,
    wigner_cdf,
    wigner_pdf,
)


@pytest.mark.parametrize("pdf,cdf", [(wigner_pdf, wigner_cdf), (poisson_pdf, poisson_cdf)])
def test_reference_densities_normalized_with_unit_mean(pdf, cdf):
    norm, _ = integrate.quad(pdf, 0, np.inf)
    mean, _ = integrate.quad(lambda s: s * pdf(s), 0, np.inf)
    assert norm == pytest.approx(1.0, abs=1e-10)
    assert mean == pytest.approx(1.0, abs=1e-10)
    for s in (0.3, 1.0, 2.5):
        val, _ = integrate.quad(pdf, 0, s)
        assert cdf(s) == pytest.approx(val, abs=1e-10)


def test_poisson_spacings_prefer_poisson():
    x = np.cumsum(np.random.default_rng(0).exponential(size=5000))
    hist = spacing_distribution(x)
    assert ks_distance(hist, "poisson") < 0.03
    assert ks_distance(hist, "wigner") > 0.1


def test_goe_spacings_prefer_wigner():
    spectra = []
    for k in range(20):
        e = sample_goe_eigvals(RngStream(1, k), 400)
        spectra.append(unfold(e, keep_fraction=0.5))
    hist = spacing_distribution(spectra)
    assert ks_distance(hist, "wigner") < 0.03
    assert ks_distance(hist, "poisson") > 0.1


def test_histogram_density_integrates_to_one():
    x = np.cumsum(np.random.default_rng(1).exponential(size=2000))
    hist = spacing_distribution(x, n_bins=50, s_max=20.0)
    assert np.sum(hist.density() * np.diff(hist.bin_edges)) == pytest.approx(1.0)
    assert hist.total == 1999


def test_spectra_are_not_joined():
    a, b = np.arange(30.0), 1000.0 + np.arange(30.0)
    hist = spacing_distribution([a, b])
    assert hist.spacings.size == 58
    np.testing.assert_allclose(hist.spacings, 1.0)


def test_too_few_levels_and_bad_reference():
    with pytest.raises(TooFewLevels):
        spacing_distribution(np.arange(20.0))
    with pytest.raises(ValueError):
        ks_distance(np.ones(100), "semicircle")


def test_central_half():
    np.testing.assert_array_equal(central_half(np.arange(8)), [2, 3, 4, 5])


@settings(max_examples=25, deadline=None)
@given(scale=st.floats(1e-3, 1e3))
def test_property_ks_is_scale_invariant(scale):
    x = np.cumsum(np.random.default_rng(2).exponential(size=300))
    assert ks_distance(np.diff(x) * scale) == pytest.approx(ks_distance(np.diff(x)), abs=1e-12)
