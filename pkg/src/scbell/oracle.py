"""Brute-force k-space sums for the hole-generation rates.

The energy-conserving delta functions are replaced by Lorentzians of width
``eta`` and the 2D momentum sum by ``S/(2 pi) int k dk`` on a uniform radial
grid.  The smearing error has sizeable linear and quadratic parts in ``eta``, so
results are extrapolated to ``eta -> 0`` from ``eta``, ``eta/2`` and
``eta/4`` (second-order Richardson); repeating that one halving further
down measures how converged the extrapolation is.

Where the first photon alone can reach a real intermediate state (a
momentum with ``Omega_mu = +-E_k``), the slow Lorentzian tail of the
energy delta times the ``1/eta`` intermediate peak leaves a finite,
eta-independent cascade term that the pair formulas do not contain.  The
mixed LH/HH channel is prone to this; ``profile="gaussian"`` smears with a
Gaussian instead, whose tails make that term vanish.

These sums are an independent check on :mod:`scbell.rates` and share only
the BCS primitives with it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from scbell.bcs import BANDS, MaterialParams, OperatingPoint, SuperconductorParams, gap_at_temperature, qp_occupation
from scbell.errors import ConfigurationError, OracleConvergenceError

TWO_PHOTON_PREFACTOR = 32.0 * math.pi
CONVERGENCE_TOLERANCE = 0.005
STATES = ("psi_plus", "psi_minus", "phi")
PROFILES = ("lorentzian", "gaussian")


@dataclass(frozen=True)
class OracleConfig:
    """Discretisation of the k-sum.

    ``k_max`` is in units of the Fermi momentum ``sqrt(2 m_n mu_n)``; ``eta``
    (meV) defaults to 2% of the zero-temperature gap and is the half width
    (Lorentzian) or standard deviation (Gaussian) of the smeared delta.
    """

    n_k: int = 20000
    k_max: float = 8.0
    eta: float | None = None
    chunks: int = 1
    profile: str = "lorentzian"

    def __post_init__(self):
        if self.n_k < 1000:
            raise ConfigurationError("n_k must be at least 1000")
        if not self.k_max > 1:
            raise ConfigurationError("k_max must exceed the Fermi momentum")
        if self.eta is not None and not self.eta > 0:
            raise ConfigurationError("eta must be positive")
        if self.chunks < 1:
            raise ConfigurationError("chunks must be at least 1")
        if self.profile not in PROFILES:
            raise ConfigurationError(f"profile must be one of {PROFILES}, got {self.profile!r}")

    def smearing(self, sc: SuperconductorParams) -> float:
        return 0.02 * sc.delta0 if self.eta is None else self.eta


@dataclass(frozen=True)
class OracleResult:
    """Extrapolated rate plus the raw sums it came from."""

    value: float
    etas: tuple
    raw: tuple
    refined: float

    @property
    def change(self) -> float:
        """Relative change of the extrapolation when eta is halved."""
        scale = max(abs(self.value), abs(self.refined))
        return 0.0 if scale == 0 else abs(self.refined - self.value) / scale

    @property
    def converged(self) -> bool:
        return self.change < CONVERGENCE_TOLERANCE


def lorentzian(x, eta):
    return (eta / math.pi) / (x * x + eta * eta)


def gaussian(x, eta):
    return np.exp(-0.5 * (x / eta) ** 2) / (eta * math.sqrt(2.0 * math.pi))


def _delta(cfg):
    return gaussian if cfg.profile == "gaussian" else lorentzian


def _grid(mat: MaterialParams, cfg: OracleConfig, refine: int = 1):
    k_f = math.sqrt(2.0 * mat.m_n * mat.mu_n)
    k = np.linspace(0.0, cfg.k_max * k_f, (cfg.n_k - 1) * refine + 1)
    h = k[1] - k[0]
    w = np.full_like(k, h)
    w[0] = w[-1] = 0.5 * h
    return k, k * w * mat.S / (2.0 * math.pi)


def _ksum(terms, chunks):
    """Sum with compensated partial sums so the partitioning cannot matter."""
    parts = np.array_split(terms, chunks)
    return math.fsum(math.fsum(p) for p in parts)


def _check_resolution(arg, eta, what):
    """Trapezoid steps across a Lorentzian must stay below its width."""
    near = np.abs(arg) < 10.0 * eta
    if not near.any():
        return
    steps = np.abs(np.diff(arg))
    touched = near[1:] | near[:-1]
    worst = steps[touched].max()
    if worst >= eta:
        raise OracleConvergenceError(
            f"{what}: grid step {worst:.3g} meV in the delta argument exceeds eta = {eta:.3g} meV; raise n_k"
        )


def _check_cutoff(mat, cfg, excess, delta):
    xi_max = (cfg.k_max**2 - 1.0) * mat.mu_n
    if xi_max <= 10.0 * max(abs(excess), delta):
        raise OracleConvergenceError(
            f"k_max = {cfg.k_max} gives xi_n = {xi_max:.3g} meV, below ten times the excess energy {excess:.3g} meV"
        )


def _bcs_factors(xi, delta, T):
    if delta > 0:
        energy = np.hypot(xi, delta)
        small = delta * delta / (2.0 * energy * (energy + np.abs(xi)))
        u2 = np.where(xi >= 0, 1.0 - small, small)
    else:
        energy = np.abs(xi)
        u2 = np.where(xi > 0, 1.0, np.where(xi < 0, 0.0, 0.5))
    return energy, u2, 1.0 - u2, qp_occupation(xi, delta, T)


def _one_photon_sum(mat, delta, T, w, B2, eta, cfg, refine=1):
    k, measure = _grid(mat, cfg, refine)
    xi = k * k / (2.0 * mat.m_n) - mat.mu_n
    energy, u2, v2, f = _bcs_factors(xi, delta, T)
    terms = np.zeros_like(k)
    for band in BANDS:
        omega = w - mat.E_g - mat.mu_n - mat.hole_offset(band) - k * k / (2.0 * mat.hole_mass(band))
        _check_resolution(omega - energy, eta, f"one-photon {band}")
        _check_resolution(omega + energy, eta, f"one-photon {band}")
        delta_fn = _delta(cfg)
        terms += u2 * (1.0 - f) * delta_fn(omega - energy, eta) + v2 * f * delta_fn(omega + energy, eta)
    return 2.0 * math.pi * B2 * _ksum(measure * terms, cfg.chunks)


def _pair_sum(mat, delta, w_mu, w_nu, B2, eta, cfg, orderings, refine=1):
    if delta == 0:
        return 0.0
    k, measure = _grid(mat, cfg, refine)
    xi = k * k / (2.0 * mat.m_n) - mat.mu_n
    energy = np.hypot(xi, delta)
    terms = np.zeros_like(k)
    for band_mu, band_nu in orderings:
        om_mu = w_mu - mat.E_g - mat.mu_n - mat.hole_offset(band_mu) - k * k / (2.0 * mat.hole_mass(band_mu))
        om_nu = w_nu - mat.E_g - mat.mu_n - mat.hole_offset(band_nu) - k * k / (2.0 * mat.hole_mass(band_nu))
        _check_resolution(om_mu + om_nu, eta, f"two-photon {band_mu}/{band_nu}")
        resonance = np.abs(om_mu + energy + 1j * eta) ** 2 * np.abs(om_mu - energy + 1j * eta) ** 2
        terms += _delta(cfg)(om_mu + om_nu, eta) / resonance
    return TWO_PHOTON_PREFACTOR * B2 * delta**2 * _ksum(measure * terms, cfg.chunks)


def richardson(r1, r2, r3):
    """Zero-width limit from values at widths (h, h/2, h/4), error a h + b h^2."""
    return (8.0 * r3 - 6.0 * r2 + r1) / 3.0


def _extrapolate(fn, eta):
    """Evaluate ``fn(eta, refine)`` on halving widths.

    The k-grid is refined along with ``eta`` so that every level resolves
    its Lorentzians equally well.
    """
    etas = (eta, 0.5 * eta, 0.25 * eta, 0.125 * eta)
    raw = tuple(fn(e, 2**j) for j, e in enumerate(etas))
    return OracleResult(value=richardson(*raw[:3]), etas=etas, raw=raw, refined=richardson(*raw[1:]))


def oracle_rate_one_photon(
    mat: MaterialParams, sc: SuperconductorParams, op: OperatingPoint, cfg: OracleConfig | None = None
) -> OracleResult:
    """Smeared k-sum for the one-photon rate of both photons and both hole bands."""
    cfg = cfg or OracleConfig()
    delta = gap_at_temperature(sc, op.T)
    excess = max(op.w_mu, op.w_nu) - mat.E_g - mat.mu_n
    _check_cutoff(mat, cfg, excess, delta)

    def total(eta, refine):
        return sum(_one_photon_sum(mat, delta, op.T, w, op.B2, eta, cfg, refine) for w in (op.w_mu, op.w_nu))

    return _extrapolate(total, cfg.smearing(sc))


def oracle_rate_two_photon(
    mat: MaterialParams,
    sc: SuperconductorParams,
    op: OperatingPoint,
    state: str = "psi_plus",
    cfg: OracleConfig | None = None,
) -> OracleResult:
    """Smeared k-sum for the Cooper-pair rate of a Bell state.

    ``psi_minus`` carries a vanishing symmetry factor and returns 0 without
    any summation.  ``phi`` sums the two mixed LH/HH hole orderings.
    """
    if state not in STATES:
        raise ValueError(f"state must be one of {STATES}, got {state!r}")
    cfg = cfg or OracleConfig()
    eta = cfg.smearing(sc)
    if state == "psi_minus":
        etas = (eta, 0.5 * eta, 0.25 * eta, 0.125 * eta)
        return OracleResult(0.0, etas, (0.0,) * 4, 0.0)
    delta = gap_at_temperature(sc, op.T)
    _check_cutoff(mat, cfg, 0.5 * op.w_sum - mat.E_g - mat.mu_n, delta)
    if state == "psi_plus":
        orderings = [(band, band) for band in BANDS]
    else:
        orderings = [("LH", "HH"), ("HH", "LH")]
    return _extrapolate(lambda e, r: _pair_sum(mat, delta, op.w_mu, op.w_nu, op.B2, e, cfg, orderings, r), eta)
