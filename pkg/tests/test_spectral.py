import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from scbell.bcs import OperatingPoint, gap_at_temperature
from scbell.rates import bracket_zero_sum, detection_purity, one_photon_rate, phi_rate, psi_rate
from scbell.spectral import (
    DEFAULT_LINEWIDTH,
    DEFAULT_TAIL_LEVEL,
    FWHM_PER_SIGMA,
    SpectralKernel,
    Spectrum,
    _gauss_pole_average,
    bandwidth_averaged_rates,
    broadened_one_photon,
    broadened_single_photon,
    dp_with_bandwidth,
    two_photon_peak,
)


def _op(mat, sc, t, detuning_over_gap, bw=0.0):
    T = t * sc.Tc
    delta = gap_at_temperature(sc, T)
    return OperatingPoint.from_sum(T, bracket_zero_sum(mat), detuning_over_gap * delta, bw=bw)


def _trapezoid_average(mat, sc, op, n=801):
    """Brute-force 2D trapezoid over both photon spectra: (r1, psi, phi, mean of DP)."""
    delta = gap_at_temperature(sc, op.T)
    s = op.bw / FWHM_PER_SIGMA
    x = np.linspace(-6 * s, 6 * s, n)
    g = np.exp(-0.5 * (x / s) ** 2)
    g /= np.trapezoid(g, x)
    wm, wn = np.meshgrid(op.w_mu + x, op.w_nu + x, indexing="ij")
    weight = np.outer(g, g)

    def avg(f):
        return np.trapezoid(np.trapezoid(weight * f, x, axis=1), x)

    r1 = one_photon_rate(mat, delta, op.T, wm) + one_photon_rate(mat, delta, op.T, wn)
    ps = psi_rate(mat, delta, wm, wn, 1.0, DEFAULT_LINEWIDTH)
    ph = phi_rate(mat, delta, wm, wn, 1.0, DEFAULT_LINEWIDTH)
    return avg(r1), avg(ps), avg(ph), avg((ps + r1) / (ph + r1))


# --------------------------------------------------------------------------
# Kernel and spectra
# --------------------------------------------------------------------------


def test_kernel_validation():
    for kwargs in ({"sigma": 0.0}, {"sigma": 1.0, "tail_level": 1.0}, {"sigma": 1.0, "tail_lambda": 0.0}):
        with pytest.raises(ValueError):
            SpectralKernel(**kwargs)
    k = SpectralKernel.from_fwhm(0.5)
    assert k.fwhm == pytest.approx(0.5, rel=1e-15)
    assert k.tail_level == DEFAULT_TAIL_LEVEL


@given(st.floats(0.05, 2.0), st.floats(0.0, 0.01), st.floats(0.5, 10.0))
@settings(max_examples=40)
def test_kernel_normalised(fwhm, level, lam):
    k = SpectralKernel.from_fwhm(fwhm, tail_level=level, tail_lambda=lam)
    eps, w = k.nodes()
    assert abs(w.sum() - 1.0) < 1e-8
    assert np.all(w >= 0)
    assert eps.min() >= -6 * k.sigma - 1e-12 and eps.max() <= k.cutoff + 1e-12


def test_kernel_tail_on_positive_side_only():
    k = SpectralKernel.from_fwhm(0.5, tail_level=1e-3, tail_lambda=5.0)
    assert k.unnormalised(np.array([-4 * k.sigma]))[0] == pytest.approx(math.exp(-8.0), rel=1e-12)
    assert k.unnormalised(np.array([4 * k.sigma]))[0] > 1e-3 * math.exp(-4 * k.sigma / 5.0) * 0.999
    eps, _ = k.nodes()
    assert eps.max() <= k.cutoff


def test_spectrum_invariants():
    with pytest.raises(ValueError):
        Spectrum(np.array([0.0, 1.0]), np.zeros(2), np.zeros(3))
    with pytest.raises(ValueError):
        Spectrum(np.array([0.0, 0.0]), np.zeros(2), np.zeros(2))


def test_empty_grid_rejected(mat, nb):
    with pytest.raises(ValueError):
        broadened_one_photon(mat, nb, _op(mat, nb, 0.3, 0.0), SpectralKernel(0.2), [])


def test_dirac_limit_reproduces_bare_rate(mat, nb):
    T = 0.5 * nb.Tc
    delta = gap_at_temperature(nb, T)
    w = 0.5 * bracket_zero_sum(mat) + np.array([1.0, 1.5, 2.0, 3.0]) * delta
    narrow = SpectralKernel(1e-5, tail_level=0.0)
    bare = one_photon_rate(mat, delta, T, w)
    assert np.all(bare > 0)
    np.testing.assert_allclose(broadened_single_photon(mat, delta, T, w, narrow), bare, rtol=1e-6)
    np.testing.assert_array_equal(broadened_single_photon(mat, delta, T, w, None), bare)


def test_no_broadening_leaves_gap_empty(mat, nb):
    spec = broadened_one_photon(mat, nb, _op(mat, nb, 0.0, 0.0), None, np.linspace(-1.5, 1.5, 31))
    assert np.all(spec.one_photon == 0.0)


def test_midgap_ratio_and_flatness(mat, nb):
    grid = np.linspace(-4.0, 4.0, 401)
    spec = broadened_one_photon(mat, nb, _op(mat, nb, 0.3, 0.0), SpectralKernel.from_fwhm(0.5), grid).normalised()
    centre = spec.window(1.0)
    ratio = spec.one_photon[200]
    assert 1e-6 <= ratio <= 1e-4
    level = spec.one_photon[centre]
    assert level.max() / level.min() - 1 < 0.10
    assert spec.two_photon.max() <= 1.0 + 1e-9


def test_midgap_level_falls_with_broadening(mat, nb):
    # the tail plateau is tied to the Gaussian peak height, which scales as 1/sigma
    op = _op(mat, nb, 0.3, 0.0)
    levels = [
        broadened_one_photon(mat, nb, op, SpectralKernel.from_fwhm(fwhm), [0.0]).one_photon[0]
        for fwhm in (0.3, 0.5, 1.0)
    ]
    assert levels[0] > levels[1] > levels[2] > 0


def test_two_photon_peak_is_the_maximum(mat, nb):
    T = 0.3 * nb.Tc
    delta = gap_at_temperature(nb, T)
    ws = bracket_zero_sum(mat)
    peak = two_photon_peak(mat, delta, ws, 0.25)
    dw = np.linspace(0.0, 4 * delta, 200001)
    brute = psi_rate(mat, delta, 0.5 * (ws + dw), 0.5 * (ws - dw), 1.0, 0.25).max()
    assert peak == pytest.approx(brute, rel=1e-8)
    assert peak >= brute


# --------------------------------------------------------------------------
# Photon bandwidth
# --------------------------------------------------------------------------


def test_gauss_pole_average_matches_quadrature():
    mean, sd, shift, omega, gamma = 1.0, 0.7, 0.3, 3.0, 0.05

    def integrand(y):
        d = y - shift
        pdf = math.exp(-0.5 * ((y - mean) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
        return pdf / ((d * d - gamma**2 - omega**2) ** 2 + 4 * d * d * gamma**2)

    ref = quad(integrand, -20, 20, points=[shift - omega, shift + omega], limit=500, epsrel=1e-12)[0]
    assert _gauss_pole_average(mean, sd, shift, np.array([omega]), gamma)[0] == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("x", [0.5, 1.0, 3.0])
def test_zero_bandwidth_is_monochromatic(mat, nb, x):
    op = _op(mat, nb, 0.3, x)
    assert dp_with_bandwidth(mat, nb, op).dp_db == pytest.approx(detection_purity(mat, nb, op).dp_db, abs=1e-12)


@pytest.mark.parametrize("x, bw", [(3.0, 0.2), (2.5, 0.3), (3.0, 1.0)])
def test_bandwidth_average_matches_trapezoid(mat, nb, x, bw):
    op = _op(mat, nb, 0.3, x, bw)
    r1, r_psi, r_phi = bandwidth_averaged_rates(mat, nb, op)
    t1, t_psi, t_phi, _ = _trapezoid_average(mat, nb, op)
    assert r1 == pytest.approx(t1, rel=1e-4)
    assert r_psi == pytest.approx(t_psi, rel=1e-4)
    assert r_phi == pytest.approx(t_phi, rel=1e-4, abs=1e-30)


def test_small_bandwidth_close_to_midpoint(mat, nb):
    op = _op(mat, nb, 0.3, 2.5, bw=0.02)
    assert dp_with_bandwidth(mat, nb, op).dp == pytest.approx(detection_purity(mat, nb, op).dp, rel=0.05)


def test_rates_averaged_separately_not_the_ratio(mat, nb):
    op = _op(mat, nb, 0.3, 3.0, bw=1.0)
    t1, t_psi, t_phi, mean_ratio = _trapezoid_average(mat, nb, op)
    dp = dp_with_bandwidth(mat, nb, op).dp
    assert dp == pytest.approx((t_psi + t1) / (t_phi + t1), rel=1e-3)
    assert abs(dp / mean_ratio - 1) > 0.5


@pytest.mark.parametrize("bw", [0.1, 1.0, 5.0])
def test_continuous_in_bandwidth(mat, nb, bw):
    op = _op(mat, nb, 0.3, 3.0, bw)
    a = dp_with_bandwidth(mat, nb, op).dp
    b = dp_with_bandwidth(mat, nb, op.replace(bw=bw + 1e-4)).dp
    assert abs(a - b) / a < 1e-3


@pytest.mark.parametrize("x, bw", [(1.0, 2.5), (3.0, 1.0), (0.5, 10.0)])
def test_quadrature_converged_under_node_doubling(mat, nb, x, bw):
    op = _op(mat, nb, 0.3, x, bw)
    a = bandwidth_averaged_rates(mat, nb, op, n_quad=21)
    b = bandwidth_averaged_rates(mat, nb, op, n_quad=42)
    for u, v in zip(a, b):
        assert u == pytest.approx(v, rel=5e-3, abs=1e-300)


@given(st.floats(0.2, 4.0), st.floats(0.01, 10.0), st.floats(0.1, 2.0))
@settings(max_examples=25)
def test_averaged_rates_non_negative(mat, nb, x, bw, split):
    m = mat.replace(dw_p=split * mat.mu_n)
    r = bandwidth_averaged_rates(m, nb, _op(m, nb, 0.3, x, bw))
    assert all(v >= 0 for v in r)


def test_bandwidth_lowers_purity_across_splitting(mat, nb):
    m = mat.replace(dw_p=10.0)
    narrow = dp_with_bandwidth(m, nb, _op(m, nb, 0.3, 1.0, 0.25 * m.dw_p)).dp_db
    wide = dp_with_bandwidth(m, nb, _op(m, nb, 0.3, 1.0, 2.0 * m.dw_p)).dp_db
    assert narrow - wide >= 20.0


def test_quadrature_arguments_validated(mat, nb):
    op = _op(mat, nb, 0.3, 1.0, 1.0)
    with pytest.raises(ValueError):
        bandwidth_averaged_rates(mat, nb, op, n_quad=8)
    with pytest.raises(ValueError):
        bandwidth_averaged_rates(mat, nb, op, linewidth=0.0)
