"""Hole-generation rates, detection purity and absorption coefficient.

All rates share the prefactor ``S * m * B2`` (contact area, hole mass in
free-electron units, dimensionless coupling) and are otherwise expressed with
energies in meV and hbar = 1.  Only :func:`absorption_coefficient` restores
physical units, through :data:`scbell.bcs.HBAR` and the group velocity.

Band conventions: the heavy-hole band sits at zero offset and the light-hole
band at ``dw_p``.  The Cooper-pair (two-photon) channels therefore open at

* Psi+ via a hole pair in band J: ``w_sum >= 2 (E_g + offset_J + mu_n)``
* Phi (one LH and one HH hole):   ``w_sum >= 2 (E_g + dw_p/2 + mu_n)``
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from scbell.bcs import (
    BANDS,
    HBAR,
    MaterialParams,
    OperatingPoint,
    SuperconductorParams,
    coherence_factors,
    gap_at_temperature,
    qp_occupation,
)
from scbell.errors import ConfigurationError, ResonanceError

PAIR_PREFACTOR = 256.0

DP_DB_CAP = 320.0

FLAG_CLAMPED = 1
FLAG_RESONANCE = 2
FLAG_THRESHOLD = 4
FLAG_UNDEFINED = 8

POLE_NUDGE = 1e-9  # meV


def heaviside(x):
    """Step function with the inclusive convention Theta(0) = 1."""
    return np.where(np.asarray(x) >= 0, 1.0, 0.0)


@dataclass(frozen=True)
class ResonanceScales:
    omega_lh: float
    omega_hh: float
    omega_mixed: float
    dw_lh: float
    dw_hh: float


@dataclass(frozen=True)
class RateBreakdown:
    r1: float
    r2_psi_plus: float
    r2_psi_minus: float
    r2_phi: float
    dp: float
    dp_db: float
    flags: int = 0
    r1_raw: float = 0.0

    @property
    def clamped(self) -> bool:
        return bool(self.flags & FLAG_CLAMPED)


# --------------------------------------------------------------------------
# Thresholds and resonance scales
# --------------------------------------------------------------------------


def pair_threshold(mat: MaterialParams, band: str) -> float:
    """Pair energy at which a Cooper pair plus two ``band`` holes can form."""
    return 2.0 * (mat.E_g + mat.hole_offset(band) + mat.mu_n)


def mixed_threshold(mat: MaterialParams) -> float:
    """Pair energy at which a Cooper pair plus one LH and one HH hole can form."""
    return 2.0 * (mat.E_g + 0.5 * mat.dw_p + mat.mu_n)


def bracket_zero_sum(mat: MaterialParams, band: str = "HH") -> float:
    """Pair energy where the ``band`` resonance scale reduces to exactly 2 Delta."""
    return pair_threshold(mat, band) + 2.0 * mat.mu_n / mat.mass_ratio(band)


def _pair_omega(mat, band, delta, w_sum):
    excess = w_sum - pair_threshold(mat, band)
    return np.hypot(mat.mass_ratio(band) * excess - 2.0 * mat.mu_n, 2.0 * delta)


def _mixed_terms(mat, delta, w_sum, detuning):
    """Resonance scale and shifted detunings of the LH+HH channel.

    At the energy-conserving momentum the two hole kinetic energies differ,
    which adds ``c = (m_p X / 2)(1/m_LH - 1/m_HH)`` to the band splitting;
    ``c`` vanishes for equal hole masses.
    """
    m_p = mat.reduced_hole_mass
    excess = w_sum - mixed_threshold(mat)
    omega = np.hypot(m_p / mat.m_n * excess - 2.0 * mat.mu_n, 2.0 * delta)
    shift = 0.5 * m_p * np.maximum(excess, 0.0) * (1.0 / mat.m_p_LH - 1.0 / mat.m_p_HH)
    split = mat.dw_p + shift
    return omega, detuning - split, detuning + split


def resonance_scales(mat: MaterialParams, delta: float, w_mu: float, w_nu: float) -> ResonanceScales:
    if delta < 0:
        raise ValueError("delta must be non-negative")
    w_sum = w_mu + w_nu
    omega, dw_lh, dw_hh = _mixed_terms(mat, delta, w_sum, w_mu - w_nu)
    return ResonanceScales(
        omega_lh=float(_pair_omega(mat, "LH", delta, w_sum)),
        omega_hh=float(_pair_omega(mat, "HH", delta, w_sum)),
        omega_mixed=float(omega),
        dw_lh=float(dw_lh),
        dw_hh=float(dw_hh),
    )


# --------------------------------------------------------------------------
# Vectorised rate kernels (delta given explicitly)
# --------------------------------------------------------------------------


def _pole_term(detuning, omega, linewidth=0.0):
    """``1 / |(detuning + i linewidth)^2 - omega^2|^2``; ``inf`` on an exact pole."""
    if linewidth:
        return 1.0 / ((detuning**2 - linewidth**2 - omega**2) ** 2 + 4.0 * detuning**2 * linewidth**2)
    den = (detuning + omega) ** 2 * (detuning - omega) ** 2
    with np.errstate(divide="ignore"):
        return np.where(den > 0, 1.0 / np.where(den > 0, den, 1.0), np.inf)


def psi_rate(mat: MaterialParams, delta, w_mu, w_nu, B2=1.0, linewidth=0.0):
    """Cooper-pair rate for |Psi+>, summed over the LH and HH pair channels.

    A positive ``linewidth`` (meV) replaces the detuning by
    ``detuning + i linewidth`` in the resonance denominators.
    """
    w_mu, w_nu, delta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (w_mu, w_nu, delta)))
    w_sum = w_mu + w_nu
    detuning = w_mu - w_nu
    total = np.zeros(w_sum.shape)
    for band in BANDS:
        open_ = (w_sum >= pair_threshold(mat, band)) & (delta > 0)
        omega = _pair_omega(mat, band, delta, w_sum)
        term = PAIR_PREFACTOR * mat.S * mat.hole_mass(band) * B2 * delta**2 * _pole_term(detuning, omega, linewidth)
        total = total + np.where(open_, term, 0.0)
    return total if total.ndim else float(total)


def phi_rate(mat: MaterialParams, delta, w_mu, w_nu, B2=1.0, linewidth=0.0):
    """Cooper-pair rate for |Phi+> and |Phi->, which are equal."""
    w_mu, w_nu, delta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (w_mu, w_nu, delta)))
    w_sum = w_mu + w_nu
    omega, dw_lh, dw_hh = _mixed_terms(mat, delta, w_sum, w_mu - w_nu)
    open_ = (w_sum >= mixed_threshold(mat)) & (delta > 0)
    scale = PAIR_PREFACTOR * mat.S * mat.reduced_hole_mass * B2 * delta**2
    total = scale * (_pole_term(dw_lh, omega, linewidth) + _pole_term(dw_hh, omega, linewidth))
    total = np.where(open_, total, 0.0)
    return total if total.ndim else float(total)


def one_photon_rate(mat: MaterialParams, delta, T, w, B2=1.0):
    """One-photon hole generation rate for a single photon of energy ``w``.

    Energy conservation ``w~ - xi_p = +-E`` is solved in closed form for the
    hole energy ``xi_p`` (two roots per band, real when Lambda >= 0).  Each
    root contributes its coherence factor, thermal factor and the Jacobian
    ``1/|1 +- m_bar xi_n / E|`` of the delta function; roots with negative
    k^2 are discarded.  Holes are taken as empty.
    """
    w, delta, T = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (w, delta, T)))
    w_tilde = w - (mat.E_g + mat.mu_n + mat.mu_p)
    total = np.zeros(w.shape)
    for band in BANDS:
        mbar = mat.mass_ratio(band)
        mu_j = mat.band_chemical_potential(band)
        lam = mbar**2 * (w_tilde + mu_j) ** 2 + delta**2 * (1.0 - mbar**2)
        real = lam >= 0
        root = np.sqrt(np.where(real, lam, 0.0))
        for sign in (1.0, -1.0):
            xi_p = (w_tilde + mbar**2 * mu_j + sign * root) / (1.0 - mbar**2)
            xi_n = mbar * (xi_p + mu_j)
            energy = np.hypot(xi_n, delta)
            ok = real & (xi_n >= -mat.mu_n) & (energy > 0)
            safe_e = np.where(ok, energy, 1.0)
            safe_xi = np.where(ok, xi_n, 0.0)
            u2, v2 = coherence_factors(safe_xi, np.where(ok, delta, 1.0))
            f = qp_occupation(safe_xi, np.where(ok, delta, 1.0), T)
            upper = (w_tilde - xi_p) > 0
            with np.errstate(divide="ignore"):
                jac_up = 1.0 / np.abs(1.0 + mbar * safe_xi / safe_e)
                jac_lo = 1.0 / np.abs(1.0 - mbar * safe_xi / safe_e)
            term = np.where(upper, u2 * (1.0 - f) * jac_up, v2 * f * jac_lo)
            total = total + mat.hole_mass(band) * np.where(ok, term, 0.0)
    total = mat.S * B2 * total
    return total if total.ndim else float(total)


def one_photon_edges(mat: MaterialParams, delta: float) -> np.ndarray:
    """Photon energies where the one-photon rate is not smooth.

    These are the band-edge points where the two roots merge (Lambda = 0,
    inverse-square-root Jacobian) and the steps where a root crosses k = 0.
    """
    shift = mat.E_g + mat.mu_n + mat.mu_p
    edges = []
    for band in BANDS:
        mbar = mat.mass_ratio(band)
        mu_j = mat.band_chemical_potential(band)
        if mbar > 1:
            half = delta * math.sqrt(1.0 - 1.0 / mbar**2)
            edges += [shift - mu_j + half, shift - mu_j - half]
        xi_p = -mat.mu_n / mbar - mu_j
        energy = math.hypot(mat.mu_n, delta)
        edges += [shift + xi_p + energy, shift + xi_p - energy]
    return np.array(sorted(edges))


def one_photon_rate_step(mat: MaterialParams, delta, T, w, B2=1.0):
    """Step-function form of the one-photon rate for a single photon.

    Every energy-conserving branch contributes a unit step weighted by
    ``sign(w~ + mu_J)`` and ``(1 - f)`` or ``-f``, without coherence factors
    or Jacobians.  This is the simplified closed form usually quoted for the
    parasitic rate; it can be negative.  Returned unfloored.
    """
    w_tilde = w - (mat.E_g + mat.mu_n + mat.mu_p)
    total = 0.0
    for band in BANDS:
        mbar = mat.mass_ratio(band)
        mu_j = mat.band_chemical_potential(band)
        lam = mbar**2 * (w_tilde + mu_j) ** 2 + delta**2 * (1.0 - mbar**2)
        if lam < 0:
            continue
        sgn = math.copysign(1.0, w_tilde + mu_j) if w_tilde + mu_j != 0 else 0.0
        for root in (math.sqrt(lam), -math.sqrt(lam)):
            xi_p = (w_tilde + mbar**2 * mu_j + root) / (1.0 - mbar**2)
            if xi_p + mat.mu_p < 0:
                continue
            xi_n = mbar * (xi_p + mu_j)
            f = qp_occupation(xi_n, delta, T)
            bracket = (1.0 - f) * (w_tilde >= xi_p) - f * (xi_p >= w_tilde)
            total += mat.hole_mass(band) * sgn * bracket
    return mat.S * B2 * total


# --------------------------------------------------------------------------
# Public rate API on (material, superconductor, operating point)
# --------------------------------------------------------------------------


def _one_photon_channels(mat, delta, op, step=False):
    if step:
        return [one_photon_rate_step(mat, delta, op.T, w, op.B2) for w in (op.w_mu, op.w_nu)]
    return [one_photon_rate(mat, delta, op.T, w, op.B2) for w in (op.w_mu, op.w_nu)]


def rate_one_photon(mat: MaterialParams, sc: SuperconductorParams, op: OperatingPoint, step: bool = False) -> float:
    """Parasitic one-photon rate, identical for all four Bell states.

    Each photon channel is floored at zero after summing its branches.
    ``step=True`` selects :func:`one_photon_rate_step`.
    """
    delta = gap_at_temperature(sc, op.T)
    return float(sum(max(c, 0.0) for c in _one_photon_channels(mat, delta, op, step)))


def rate_two_photon_psi(mat: MaterialParams, sc: SuperconductorParams, op: OperatingPoint, which: str = "plus") -> float:
    if which == "minus":
        return 0.0
    if which != "plus":
        raise ValueError(f"which must be 'plus' or 'minus', got {which!r}")
    delta = gap_at_temperature(sc, op.T)
    return psi_rate(mat, delta, op.w_mu, op.w_nu, op.B2)


def rate_two_photon_phi(mat: MaterialParams, sc: SuperconductorParams, op: OperatingPoint) -> float:
    delta = gap_at_temperature(sc, op.T)
    return phi_rate(mat, delta, op.w_mu, op.w_nu, op.B2)


def purity_arrays(r1, r2_psi, r2_phi):
    """Vectorised detection purity: ``(dp, dp_db, flags)`` arrays.

    ``dp`` is ``inf`` when the denominator vanishes (or underflows below
    1e-300 of the numerator) and ``nan`` when both sides vanish; ``dp_db`` is
    clamped to +-:data:`DP_DB_CAP` and the clamp is flagged.
    """
    num = np.asarray(r2_psi, dtype=float) + np.asarray(r1, dtype=float)
    den = np.asarray(r2_phi, dtype=float) + np.asarray(r1, dtype=float)
    num, den = np.broadcast_arrays(num, den)
    flags = np.where(np.isinf(num) | np.isinf(den), FLAG_RESONANCE, 0)
    undefined = ((num == 0) & (den == 0)) | (np.isinf(num) & np.isinf(den))
    infinite = ~undefined & ((den == 0) | np.isinf(num) | (den < 1e-300 * num))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        dp = np.where(undefined, np.nan, np.where(infinite, np.inf, num / den))
        dp_db = 20.0 * np.log10(dp)
    clamped = infinite | (~undefined & (np.abs(dp_db) > DP_DB_CAP))
    dp_db = np.where(clamped, np.copysign(DP_DB_CAP, dp_db), dp_db)
    flags = flags | np.where(clamped, FLAG_CLAMPED, 0) | np.where(undefined, FLAG_UNDEFINED, 0)
    return dp, dp_db, flags


def purity(r1, r2_psi, r2_phi):
    """Scalar :func:`purity_arrays`."""
    dp, dp_db, flags = purity_arrays(r1, r2_psi, r2_phi)
    return float(dp), float(dp_db), int(flags)


def _threshold_flags(mat, w_sum):
    w_sum = np.asarray(w_sum, dtype=float)
    edges = [pair_threshold(mat, b) for b in BANDS] + [mixed_threshold(mat)]
    near = np.zeros(w_sum.shape, dtype=bool)
    for e in edges:
        near |= np.abs(w_sum - e) <= 1e-9
    return np.where(near, FLAG_THRESHOLD, 0)


def detection_purity(mat: MaterialParams, sc: SuperconductorParams, op: OperatingPoint) -> RateBreakdown:
    """All rates and the detection purity at one operating point.

    Exact poles are not moved; an infinite rate is flagged and propagates
    into ``dp``.  :func:`detection_purity_grid` nudges poles instead.
    """
    delta = gap_at_temperature(sc, op.T)
    channels = _one_photon_channels(mat, delta, op)
    r1 = float(sum(max(c, 0.0) for c in channels))
    r_psi = psi_rate(mat, delta, op.w_mu, op.w_nu, op.B2)
    r_phi = phi_rate(mat, delta, op.w_mu, op.w_nu, op.B2)
    dp, dp_db, flags = purity(r1, r_psi, r_phi)
    return RateBreakdown(
        r1=r1,
        r2_psi_plus=r_psi,
        r2_psi_minus=0.0,
        r2_phi=r_phi,
        dp=dp,
        dp_db=dp_db,
        flags=flags | int(_threshold_flags(mat, op.w_sum)),
        r1_raw=float(sum(channels)),
    )


@dataclass(frozen=True)
class PurityGrid:
    """Array counterpart of :class:`RateBreakdown` for a batch of points."""

    detuning: np.ndarray
    r1: np.ndarray
    r2_psi_plus: np.ndarray
    r2_phi: np.ndarray
    dp: np.ndarray
    dp_db: np.ndarray
    flags: np.ndarray


def detection_purity_grid(mat: MaterialParams, sc: SuperconductorParams, T, w_sum, detuning, B2=1.0) -> PurityGrid:
    """Detection purity on broadcast arrays of temperature, pair energy and detuning.

    Points sitting exactly on a pole are moved by :data:`POLE_NUDGE` in
    detuning and flagged as resonant.
    """
    T, w_sum, detuning = np.broadcast_arrays(*(np.array(v, dtype=float) for v in (T, w_sum, detuning)))
    detuning = detuning.copy()
    delta = gap_at_temperature(sc, T)
    nudged = np.zeros(T.shape, dtype=bool)
    for _ in range(4):
        w_mu, w_nu = 0.5 * (w_sum + detuning), 0.5 * (w_sum - detuning)
        r_psi = psi_rate(mat, delta, w_mu, w_nu, B2)
        r_phi = phi_rate(mat, delta, w_mu, w_nu, B2)
        on_pole = np.isinf(r_psi) | np.isinf(r_phi)
        if not on_pole.any():
            break
        nudged |= on_pole
        detuning = np.where(on_pole, detuning + POLE_NUDGE, detuning)
    else:
        raise ResonanceError("could not move grid points off a pole")
    r1 = one_photon_rate(mat, delta, T, w_mu, B2) + one_photon_rate(mat, delta, T, w_nu, B2)
    dp, dp_db, flags = purity_arrays(r1, r_psi, r_phi)
    flags = flags | np.where(nudged, FLAG_RESONANCE, 0) | _threshold_flags(mat, w_sum)
    return PurityGrid(detuning, r1, r_psi, r_phi, dp, dp_db, flags)


# --------------------------------------------------------------------------
# Absorption coefficient
# --------------------------------------------------------------------------


def absorption_coefficient(mat: MaterialParams, sc: SuperconductorParams, op: OperatingPoint) -> float:
    """Heavy-hole Cooper-pair absorption coefficient in cm^-1.

    The hbar = 1 rate (meV) is converted to s^-1 with hbar and divided by the
    group velocity.
    """
    delta = gap_at_temperature(sc, op.T)
    if delta == 0:
        return 0.0
    omega = float(_pair_omega(mat, "HH", delta, op.w_sum))
    den = (op.detuning + omega) ** 2 * (op.detuning - omega) ** 2
    if den == 0:
        raise ResonanceError(f"detuning {op.detuning!r} meV sits on the HH pole")
    rate = PAIR_PREFACTOR * mat.S * mat.m_p_HH * op.B2 * delta**2 / den
    return rate / (HBAR * mat.v_g)


def calibration_point(mat: MaterialParams, sc: SuperconductorParams, T: float = 0.0, B2: float = 1.0) -> OperatingPoint:
    """Operating point with Omega_HH = 2 Delta and detuning = Delta."""
    delta = gap_at_temperature(sc, T)
    return OperatingPoint.from_sum(T, bracket_zero_sum(mat, "HH"), delta, B2)


def calibrate_coupling(mat: MaterialParams, sc: SuperconductorParams, alpha_target: float, T: float = 0.0) -> float:
    """Coupling B2 giving ``alpha_target`` (cm^-1) at :func:`calibration_point`."""
    if not alpha_target > 0:
        raise ValueError("alpha_target must be positive")
    delta = gap_at_temperature(sc, T)
    if delta == 0:
        raise ConfigurationError("no superconducting gap at this temperature; cannot calibrate")
    op = calibration_point(mat, sc, T)
    return alpha_target / absorption_coefficient(mat, sc, op)
