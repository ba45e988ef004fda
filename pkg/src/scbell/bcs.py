"""Material parameters and BCS quasiparticle primitives.

Units
-----
Energies are in meV, temperatures in K and masses in units of the free
electron mass.  Contact area ``S`` is in cm^2 and the group velocity ``v_g``
in cm/s; those two only matter for the absorption-coefficient calibration.

The temperature dependence of the gap is the weak-coupling BCS curve
``Delta(T)/Delta0 = g(T/Tc)``.  ``g`` is obtained by solving the reduced gap
equation

    ln(1/d) = 2 * int_0^inf f(sqrt(x^2 + d^2) / tau) / sqrt(x^2 + d^2) dx,
    tau = (T/Tc) * exp(gamma_E) / pi,

(energies in units of Delta0) by bisection, and is tabulated once on 1001
points of ``T/Tc``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit

from scbell.errors import ConfigurationError

K_B = 0.0861733  # meV / K
HBAR = 6.582119569e-13  # meV * s
C_LIGHT = 2.99792458e10  # cm / s

EULER_GAMMA = 0.5772156649015329
# k_B Tc / Delta0 on the weak-coupling curve
TC_OVER_GAP = math.exp(EULER_GAMMA) / math.pi

BANDS = ("LH", "HH")

GAP_TABLE_POINTS = 1001


@dataclass(frozen=True)
class MaterialParams:
    """Quantum-well semiconductor band parameters.

    ``mu_n`` is measured upward from the conduction-band edge and ``mu_p``
    from the valence-band edge (strongly negative in an n-type region).
    ``dw_p`` is the LH-HH splitting; the heavy-hole band sits at zero offset.
    """

    E_g: float
    m_n: float
    m_p_LH: float
    m_p_HH: float
    dw_p: float
    mu_n: float
    mu_p: float
    S: float
    v_g: float

    def __post_init__(self):
        for name in ("m_n", "m_p_LH", "m_p_HH", "E_g", "S", "v_g"):
            value = getattr(self, name)
            if not value > 0:
                raise ConfigurationError(f"{name} must be positive, got {value!r}")
        if not self.dw_p >= 0:
            raise ConfigurationError(f"dw_p must be non-negative, got {self.dw_p!r}")
        for band in BANDS:
            if abs(1.0 - self.mass_ratio(band) ** 2) <= 1e-9:
                raise ConfigurationError(
                    f"degenerate {band} mass ratio m_p/m_n = {self.mass_ratio(band)!r}"
                )

    def hole_mass(self, band: str) -> float:
        if band == "LH":
            return self.m_p_LH
        if band == "HH":
            return self.m_p_HH
        raise ValueError(f"unknown band {band!r}")

    def mass_ratio(self, band: str) -> float:
        """m_p / m_n for the given hole band."""
        return self.hole_mass(band) / self.m_n

    def hole_offset(self, band: str) -> float:
        """Band offset of the hole band: dw_p for LH, zero for HH."""
        return self.dw_p if band == "LH" else 0.0

    def band_chemical_potential(self, band: str) -> float:
        """mu_J = mu_p - offset_J - mu_n / (m_p/m_n)."""
        return self.mu_p - self.hole_offset(band) - self.mu_n / self.mass_ratio(band)

    @property
    def reduced_hole_mass(self) -> float:
        """Harmonic mean m_p with 2/m_p = 1/m_LH + 1/m_HH."""
        return 2.0 / (1.0 / self.m_p_LH + 1.0 / self.m_p_HH)

    def replace(self, **changes) -> "MaterialParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SuperconductorParams:
    delta0: float
    Tc: float

    def __post_init__(self):
        if not self.delta0 > 0:
            raise ConfigurationError(f"delta0 must be positive, got {self.delta0!r}")
        if not self.Tc > 0:
            raise ConfigurationError(f"Tc must be positive, got {self.Tc!r}")

    def replace(self, **changes) -> "SuperconductorParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class OperatingPoint:
    """Temperature, the two photon energies, coupling scale and bandwidth."""

    T: float
    w_mu: float
    w_nu: float
    B2: float = 1.0
    bw: float = 0.0

    def __post_init__(self):
        if not self.T >= 0:
            raise ConfigurationError(f"T must be non-negative, got {self.T!r}")
        if not (self.w_mu > 0 and self.w_nu > 0):
            raise ConfigurationError("photon energies must be positive")
        if not self.B2 > 0:
            raise ConfigurationError(f"B2 must be positive, got {self.B2!r}")
        if not self.bw >= 0:
            raise ConfigurationError(f"bw must be non-negative, got {self.bw!r}")

    @classmethod
    def from_sum(cls, T, w_sum, detuning, B2=1.0, bw=0.0) -> "OperatingPoint":
        """Build from the pair energy ``w_sum`` and detuning ``w_mu - w_nu``."""
        return cls(T, 0.5 * (w_sum + detuning), 0.5 * (w_sum - detuning), B2, bw)

    @property
    def w_sum(self) -> float:
        return self.w_mu + self.w_nu

    @property
    def detuning(self) -> float:
        return self.w_mu - self.w_nu

    def replace(self, **changes) -> "OperatingPoint":
        return dataclasses.replace(self, **changes)


SUPERCONDUCTORS = {
    "Nb": SuperconductorParams(delta0=3.6, Tc=9.25),
    "NbN": SuperconductorParams(delta0=5.2, Tc=16.0),
}

# In0.53Ga0.47As well; masses and gap are textbook low-temperature values.
MATERIALS = {
    "InGaAs-QW": MaterialParams(
        E_g=800.0,
        m_n=0.041,
        m_p_LH=0.052,
        m_p_HH=0.45,
        dw_p=10.0,
        mu_n=10.0,
        mu_p=-1000.0,
        S=1e-8,
        v_g=C_LIGHT / 3.0,
    ),
}


# --------------------------------------------------------------------------
# Gap equation
# --------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(256)


def _gap_residual(d, t):
    """ln(1/d) - 2 int f(E/tau) dx/E in Delta0 units, vectorised.

    Uses x = d sinh(u) so that dx/E = du and the integrand is bounded.
    """
    tau = t * TC_OVER_GAP
    u_max = np.arccosh(np.maximum(60.0 * tau / d, 1.0))
    u = 0.5 * u_max[..., None] * (_GL_NODES + 1.0)
    energy = d[..., None] * np.cosh(u)
    occupation = expit(-energy / tau[..., None])
    integral = 0.5 * u_max * (occupation @ _GL_WEIGHTS)
    return np.log(1.0 / d) - 2.0 * integral


def solve_reduced_gap(t, iterations: int = 64):
    """Reduced gap Delta/Delta0 at reduced temperature ``t = T/Tc``.

    Vectorised bisection of the weak-coupling gap equation.  Returns 1 for
    ``t <= 0`` and 0 for ``t >= 1``.
    """
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 1.0, 0.0, 1.0)
    inside = (t > 0.0) & (t < 1.0)
    if not inside.any():
        return out if out.ndim else float(out)
    tt = t[inside]
    lo = np.zeros_like(tt)
    hi = np.ones_like(tt)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        positive = _gap_residual(mid, tt) > 0.0
        lo = np.where(positive, mid, lo)
        hi = np.where(positive, hi, mid)
    out = out.astype(float)
    out[inside] = 0.5 * (lo + hi)
    return out if out.ndim else float(out)


@lru_cache(maxsize=1)
def _gap_table():
    t = np.linspace(0.0, 1.0, GAP_TABLE_POINTS)
    d = solve_reduced_gap(t)
    # d^2 is linear in (1 - t) close to Tc, so interpolating it keeps the
    # square-root onset accurate in the last table interval.
    d2 = np.asarray(d) ** 2
    t.setflags(write=False)
    d2.setflags(write=False)
    return t, d2


def reduced_gap(t):
    """Tabulated universal curve Delta(T)/Delta0 as a function of T/Tc."""
    grid, d2 = _gap_table()
    t = np.asarray(t, dtype=float)
    value = np.sqrt(np.interp(t, grid, d2, left=1.0, right=0.0))
    value = np.where(t >= 1.0, 0.0, value)
    return value if value.ndim else float(value)


def gap_at_temperature(sc: SuperconductorParams, T):
    """Superconducting gap Delta(T) in meV."""
    if np.any(np.asarray(T) < 0):
        raise ValueError("temperature must be non-negative")
    return sc.delta0 * reduced_gap(np.asarray(T, dtype=float) / sc.Tc)


def gap_tanh_approximation(sc: SuperconductorParams, T: float) -> float:
    """Common closed-form approximation Delta0 tanh(1.74 sqrt(Tc/T - 1))."""
    if T <= 0:
        return sc.delta0
    if T >= sc.Tc:
        return 0.0
    return sc.delta0 * math.tanh(1.74 * math.sqrt(sc.Tc / T - 1.0))


# --------------------------------------------------------------------------
# Quasiparticles
# --------------------------------------------------------------------------


def quasiparticle_energy(xi_n, delta):
    """E = sqrt(xi_n^2 + Delta^2)."""
    return np.hypot(xi_n, delta)


def coherence_factors(xi_n, delta):
    """Return ``(u^2, v^2)`` for the Bogoliubov transformation.

    Evaluated in the cancellation-free form so that ``u^2 v^2 4E^2 = Delta^2``
    holds to rounding even far from the Fermi surface.
    """
    xi = np.asarray(xi_n, dtype=float)
    d = np.asarray(delta, dtype=float)
    energy = np.hypot(xi, d)
    if np.any(energy == 0):
        raise ValueError("coherence factors undefined for xi_n = delta = 0")
    small = d * d / (2.0 * energy * (energy + np.abs(xi)))
    u2 = np.where(xi >= 0, 1.0 - small, small)
    v2 = np.where(xi >= 0, small, 1.0 - small)
    if u2.ndim == 0:
        return float(u2), float(v2)
    return u2, v2


def qp_occupation(xi_n, delta, T):
    """Fermi occupation of a quasiparticle, 1/(exp(E/k_B T) + 1).

    Zero at ``T = 0``; an infinite temperature gives 1/2.
    """
    energy = np.hypot(xi_n, delta)
    T = np.asarray(T, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        x = np.where(T > 0, energy / (K_B * np.where(T > 0, T, 1.0)), np.inf)
    x = np.where(np.isinf(T), 0.0, x)
    value = expit(-x)
    return value if np.ndim(value) else float(value)
