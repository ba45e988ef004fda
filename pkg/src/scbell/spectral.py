"""Finite photon bandwidth and disorder broadening.

Two effects are modelled on top of the monochromatic rates:

* a Gaussian photon spectrum of given FWHM, averaged rate by rate before the
  detection-purity ratio is formed;
* a phenomenological disorder kernel (Gaussian core plus an exponential tail
  on the high-energy side) that leaks one-photon absorption into the gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import wofz

from scbell.bcs import BANDS, MaterialParams, OperatingPoint, SuperconductorParams, gap_at_temperature
from scbell.rates import (
    PAIR_PREFACTOR,
    RateBreakdown,
    _mixed_terms,
    _pair_omega,
    mixed_threshold,
    one_photon_edges,
    one_photon_rate,
    pair_threshold,
    phi_rate,
    psi_rate,
    purity,
)

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
DEFAULT_TAIL_LEVEL = 10.0**-3.5
DEFAULT_TAIL_LAMBDA = 5.0  # meV


@dataclass(frozen=True)
class SpectralKernel:
    """Disorder broadening kernel.

    Parameters
    ----------
    sigma : float
        Standard deviation of the Gaussian core (meV).
    tail_level : float
        Height of the exponential tail at zero offset, relative to the
        Gaussian peak.
    tail_lambda : float
        Decay length of the tail (meV).
    """

    sigma: float
    tail_level: float = DEFAULT_TAIL_LEVEL
    tail_lambda: float = DEFAULT_TAIL_LAMBDA

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0 <= self.tail_level < 1:
            raise ValueError("tail_level must lie in [0, 1)")
        if not self.tail_lambda > 0:
            raise ValueError("tail_lambda must be positive")

    @classmethod
    def from_fwhm(cls, fwhm: float, **kwargs) -> "SpectralKernel":
        return cls(sigma=fwhm / FWHM_PER_SIGMA, **kwargs)

    @property
    def fwhm(self) -> float:
        return self.sigma * FWHM_PER_SIGMA

    @property
    def cutoff(self) -> float:
        return 6.0 * self.sigma + 5.0 * self.tail_lambda

    def unnormalised(self, eps):
        eps = np.asarray(eps, dtype=float)
        gauss = np.exp(-0.5 * (eps / self.sigma) ** 2)
        tail = self.tail_level * np.exp(-np.abs(eps) / self.tail_lambda)
        return np.where(eps > 0, np.maximum(gauss, tail), gauss)

    @property
    def crossover(self) -> float:
        """Offset above which the tail exceeds the Gaussian (inf without a tail)."""
        if self.tail_level == 0:
            return math.inf
        s2 = self.sigma**2
        inv = 1.0 / self.tail_lambda
        return s2 * (inv + math.sqrt(inv**2 - 2.0 * math.log(self.tail_level) / s2))

    def breakpoints(self) -> np.ndarray:
        """Support ends and kinks of the kernel."""
        points = [-6.0 * self.sigma, 0.0, 6.0 * self.sigma, self.cutoff]
        if self.crossover < self.cutoff:
            points.append(self.crossover)
        return np.unique(points)

    def nodes(self, n: int = 64):
        """Quadrature nodes and weights over the support, normalised to unit area."""
        bp = self.breakpoints()
        eps, weights = _segment_nodes(bp[0], bp[-1], bp, n)
        weights = weights * self.unnormalised(eps)
        return eps, weights / weights.sum()

    def area(self) -> float:
        bp = self.breakpoints()
        eps, weights = _segment_nodes(bp[0], bp[-1], bp, 64)
        return float(np.sum(weights * self.unnormalised(eps)))


@dataclass(frozen=True)
class Spectrum:
    """Rates against photon detuning ``(w_mu - w_nu) / Delta(T)``.

    ``one_photon`` and ``two_photon`` are in rate units and ``peak`` is the
    maximum of the two-photon curve; :meth:`normalised` divides by it.
    """

    detuning: np.ndarray
    one_photon: np.ndarray
    two_photon: np.ndarray
    peak: float = math.nan

    def __post_init__(self):
        n = len(self.detuning)
        if len(self.one_photon) != n or len(self.two_photon) != n:
            raise ValueError("spectrum arrays must have equal length")
        if np.any(np.diff(self.detuning) <= 0):
            raise ValueError("detuning grid must be strictly increasing")

    def normalised(self) -> "Spectrum":
        return Spectrum(self.detuning, self.one_photon / self.peak, self.two_photon / self.peak, 1.0)

    def window(self, half_width: float) -> np.ndarray:
        """Boolean mask of ``|detuning| <= half_width``."""
        return np.abs(self.detuning) <= half_width


def broadened_single_photon(
    mat: MaterialParams, delta: float, T: float, w, kernel: SpectralKernel | None, B2=1.0, n_nodes: int = 48
):
    """Disorder-broadened one-photon rate for one photon of energy ``w``.

    ``int K(eps) r1(w + eps) d eps``: final states up to the tail cutoff
    above ``w`` contribute, which fills the gap below the quasiparticle edge.
    The integral is split at the kernel kinks and at the band edges of
    ``r1``, whose inverse-square-root peaks are absorbed by the node map.
    """
    if kernel is None:
        return one_photon_rate(mat, delta, T, w, B2)
    w = np.asarray(w, dtype=float)
    flat = w.reshape(-1, 1)
    bp = kernel.breakpoints()
    # per-photon segment edges; segments of zero length carry zero weight
    edges = np.sort(
        np.concatenate([np.broadcast_to(bp, (flat.shape[0], bp.size)), np.clip(one_photon_edges(mat, delta) - flat, bp[0], bp[-1])], axis=1),
        axis=1,
    )
    x, wt = np.polynomial.legendre.leggauss(n_nodes)
    t = 0.5 * (x + 1.0)
    u = np.sin(0.5 * np.pi * t) ** 2
    du = 0.25 * np.pi * wt * np.sin(np.pi * t)
    a = edges[:, :-1, None]
    length = edges[:, 1:, None] - a
    eps = (a + length * u).reshape(flat.shape[0], -1)
    weights = (length * du).reshape(flat.shape[0], -1)
    values = one_photon_rate(mat, delta, T, flat + eps, B2)
    out = np.sum(weights * kernel.unnormalised(eps) * values, axis=1) / kernel.area()
    out = out.reshape(w.shape)
    return out if out.ndim else float(out)


def two_photon_peak(mat: MaterialParams, delta: float, w_sum: float, linewidth: float, B2: float = 1.0) -> float:
    """Maximum over detuning of the |Psi+> rate at fixed pair energy.

    Needs ``linewidth > 0``; each band term peaks at
    ``sqrt(Omega^2 - linewidth^2)``, and the sum is refined around those.
    """
    if not linewidth > 0:
        raise ValueError("the two-photon peak is finite only for a positive linewidth")

    def rate(dw):
        return psi_rate(mat, delta, 0.5 * (w_sum + dw), 0.5 * (w_sum - dw), B2, linewidth)

    best = 0.0
    for band in BANDS:
        if w_sum < pair_threshold(mat, band):
            continue
        omega = float(_pair_omega(mat, band, delta, w_sum))
        guess = math.sqrt(max(omega**2 - linewidth**2, 0.0))
        res = minimize_scalar(
            lambda dw: -rate(dw), bounds=(max(guess - 5 * linewidth, 0.0), guess + 5 * linewidth), method="bounded",
            options={"xatol": 1e-12},
        )
        best = max(best, rate(guess), -res.fun)
    return best


def broadened_one_photon(
    mat: MaterialParams,
    sc: SuperconductorParams,
    op: OperatingPoint,
    kernel: SpectralKernel | None,
    grid,
) -> Spectrum:
    """Broadened one-photon and two-photon rates across a detuning grid.

    The pair energy of ``op`` is held fixed and the detuning is set to
    ``grid * Delta(T)``; the one-photon rate is summed over both photons.
    The two-photon curve gets a Lorentzian linewidth with FWHM equal to the
    kernel FWHM, which keeps its resonance peak finite.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty detuning grid")
    delta = gap_at_temperature(sc, op.T)
    dw = grid * delta
    w_mu = 0.5 * (op.w_sum + dw)
    w_nu = 0.5 * (op.w_sum - dw)
    one = broadened_single_photon(mat, delta, op.T, w_mu, kernel, op.B2) + broadened_single_photon(
        mat, delta, op.T, w_nu, kernel, op.B2
    )
    gamma = 0.0 if kernel is None else 0.5 * kernel.fwhm
    two = np.atleast_1d(psi_rate(mat, delta, w_mu, w_nu, op.B2, gamma))
    if gamma > 0 and delta > 0:
        peak = two_photon_peak(mat, delta, op.w_sum, gamma, op.B2)
    else:
        finite = two[np.isfinite(two)]
        peak = float(finite.max()) if finite.size else math.nan
    return Spectrum(grid, np.atleast_1d(one), two, peak)


# --------------------------------------------------------------------------
# Photon bandwidth
# --------------------------------------------------------------------------


DEFAULT_LINEWIDTH = 0.05  # meV
GAUSS_SPAN = 8.0  # standard deviations covered by the photon-spectrum quadrature


def _gauss_pole_average(mean, sd, shift, omega, gamma):
    """Gaussian average of ``1 / |(x - shift + i gamma)^2 - omega^2|^2``.

    ``x ~ N(mean, sd^2)``.  The rational function is split into four simple
    poles ``+-omega +- i gamma``; each averages to a Faddeeva function.
    Vectorised over ``shift`` and ``omega``.
    """
    omega = np.asarray(omega, dtype=float)
    m = np.asarray(mean - shift, dtype=float)
    poles = np.stack(
        [omega - 1j * gamma, -omega - 1j * gamma, omega + 1j * gamma, -omega + 1j * gamma]
    )
    total = np.zeros(np.broadcast(m, omega).shape, dtype=complex)
    scale = sd * math.sqrt(2.0)
    for k in range(4):
        residue = np.ones_like(total)
        for j in range(4):
            if j != k:
                residue = residue / (poles[k] - poles[j])
        zeta = (poles[k] - m) / scale
        if k < 2:  # pole below the real axis
            mean_inv = np.conj(1j * math.sqrt(math.pi) * wofz(np.conj(zeta)) / scale)
        else:
            mean_inv = 1j * math.sqrt(math.pi) * wofz(zeta) / scale
        total = total + residue * mean_inv
    return total.real


def _segment_nodes(lo, hi, breaks, n, cluster=False):
    """Gauss-Legendre nodes on [lo, hi] with extra segment edges at ``breaks``.

    ``cluster=True`` maps each segment through ``x = a + (b - a) sin^2(pi t / 2)``,
    which absorbs inverse-square-root singularities at the segment ends.
    """
    edges = np.unique(np.clip(np.concatenate([[lo, hi], np.asarray(breaks, float)]), lo, hi))
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (x + 1.0)
    if cluster:
        u = np.sin(0.5 * np.pi * t) ** 2
        du = 0.5 * w * 0.5 * np.pi * np.sin(np.pi * t)
    else:
        u, du = t, 0.5 * w
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            nodes.append(a + (b - a) * u)
            weights.append((b - a) * du)
    return np.concatenate(nodes), np.concatenate(weights)


def _pair_breaks(mat, delta, detuning):
    """Pair energies where the detuning-averaged integrand changes quickly.

    Channel thresholds, the minima of each resonance scale, and the points
    where a resonance scale crosses the mean detuning.
    """
    breaks = []
    target = abs(detuning)
    channels = [(pair_threshold(mat, b), mat.mass_ratio(b)) for b in BANDS]
    channels.append((mixed_threshold(mat), mat.reduced_hole_mass / mat.m_n))
    for threshold, slope in channels:
        centre = threshold + 2.0 * mat.mu_n / slope
        breaks += [threshold, centre]
        if target > 2.0 * delta:
            offset = math.sqrt(target**2 - 4.0 * delta**2) / slope
            breaks += [centre - offset, centre + offset]
    return breaks


def _gauss_pdf(x, mean, sd):
    return np.exp(-0.5 * ((x - mean) / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))


def bandwidth_averaged_rates(
    mat: MaterialParams,
    sc: SuperconductorParams,
    op: OperatingPoint,
    n_quad: int = 21,
    linewidth: float = DEFAULT_LINEWIDTH,
):
    """Rates averaged over independent Gaussian spectra of both photons.

    Returns ``(r1, r2_psi_plus, r2_phi)``; ``op.bw`` is the FWHM of each
    photon.  The two-photon rates have double poles in the detuning, so their
    spectral average only exists with a finite resonance ``linewidth`` (meV),
    which enters as ``detuning -> detuning + i linewidth``.  The detuning
    average is then done in closed form and the pair-energy average by
    Gauss-Legendre quadrature (``n_quad`` nodes per segment, segments split
    at the channel thresholds).  ``bw = 0`` returns the monochromatic rates.
    """
    if n_quad < 9:
        raise ValueError("n_quad must be at least 9")
    if not linewidth > 0:
        raise ValueError("linewidth must be positive")
    delta = gap_at_temperature(sc, op.T)
    if op.bw == 0:
        r1 = sum(max(float(one_photon_rate(mat, delta, op.T, w, op.B2)), 0.0) for w in (op.w_mu, op.w_nu))
        return r1, psi_rate(mat, delta, op.w_mu, op.w_nu, op.B2), phi_rate(mat, delta, op.w_mu, op.w_nu, op.B2)

    sigma = op.bw / FWHM_PER_SIGMA

    r1 = 0.0
    edges = one_photon_edges(mat, delta)
    for w0 in (op.w_mu, op.w_nu):
        w, wt = _segment_nodes(w0 - GAUSS_SPAN * sigma, w0 + GAUSS_SPAN * sigma, edges, 4 * n_quad, cluster=True)
        r1 += float(np.sum(wt * _gauss_pdf(w, w0, sigma) * one_photon_rate(mat, delta, op.T, w, op.B2)))

    if delta == 0:
        return r1, 0.0, 0.0
    # w_sum and the detuning are independent Gaussians of width sqrt(2) sigma
    sd = math.sqrt(2.0) * sigma
    s, ws = _segment_nodes(
        op.w_sum - GAUSS_SPAN * sd, op.w_sum + GAUSS_SPAN * sd, _pair_breaks(mat, delta, op.detuning), 4 * n_quad
    )
    ws = ws * _gauss_pdf(s, op.w_sum, sd)
    scale = PAIR_PREFACTOR * mat.S * op.B2 * delta**2

    r_psi = 0.0
    for band in BANDS:
        omega = _pair_omega(mat, band, delta, s)
        avg = _gauss_pole_average(op.detuning, sd, 0.0, omega, linewidth)
        r_psi += scale * mat.hole_mass(band) * float(np.sum(ws * (s >= pair_threshold(mat, band)) * avg))

    omega, dw_lh, _ = _mixed_terms(mat, delta, s, 0.0)
    split = -dw_lh
    avg = _gauss_pole_average(op.detuning, sd, split, omega, linewidth) + _gauss_pole_average(
        op.detuning, sd, -split, omega, linewidth
    )
    r_phi = scale * mat.reduced_hole_mass * float(np.sum(ws * (s >= mixed_threshold(mat)) * avg))
    return r1, r_psi, r_phi


def dp_with_bandwidth(
    mat: MaterialParams,
    sc: SuperconductorParams,
    op: OperatingPoint,
    n_quad: int = 21,
    linewidth: float = DEFAULT_LINEWIDTH,
) -> RateBreakdown:
    """Detection purity with each rate averaged over the photon spectra."""
    r1, r_psi, r_phi = bandwidth_averaged_rates(mat, sc, op, n_quad, linewidth)
    dp, dp_db, flags = purity(r1, r_psi, r_phi)
    return RateBreakdown(r1, r_psi, 0.0, r_phi, dp, dp_db, flags, r1)
