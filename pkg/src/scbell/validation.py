"""Closed-form rates against the brute-force k-sums on a spot grid."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

from scbell.bcs import MaterialParams, OperatingPoint, SuperconductorParams, gap_at_temperature
from scbell.oracle import OracleConfig, oracle_rate_one_photon, oracle_rate_two_photon
from scbell.rates import bracket_zero_sum, rate_one_photon, rate_two_photon_psi

# closed / oracle for the pair rate; see README
EXPECTED_PAIR_SCALE = 2.0


@dataclass(frozen=True)
class SpotCheck:
    quantity: str
    t_over_tc: float
    detuning_over_gap: float
    closed: float
    oracle: float
    oracle_change: float

    @property
    def ratio(self) -> float:
        return self.closed / self.oracle if self.oracle else math.nan


@dataclass(frozen=True)
class ValidationReport:
    checks: list
    pair_scale: float
    tolerance: float

    def error(self, check: SpotCheck) -> float:
        scale = self.pair_scale if check.quantity == "r2_psi_plus" else 1.0
        return abs(check.ratio / scale - 1.0)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not self.error(c) <= self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failures


def validate(
    mat: MaterialParams,
    sc: SuperconductorParams,
    temperatures=(0.2, 0.35, 0.5, 0.65, 0.8),
    one_photon_detunings=(2.5, 3.0, 3.5, 4.0, 5.0),
    two_photon_detunings=(0.2, 0.55, 0.9, 1.25, 1.6),
    cfg: OracleConfig | None = None,
    tolerance: float = 0.02,
    B2: float = 1.0,
) -> ValidationReport:
    """Spot-check both rates at the heavy-hole bracket zero.

    Detunings are in units of the gap at each temperature.  One-photon
    points sit above the quasiparticle edge, pair points below it.  The pair
    rate may differ by one global factor, taken as the median ratio.
    """
    cfg = cfg or OracleConfig()
    w_sum = bracket_zero_sum(mat)
    checks = []
    for t in temperatures:
        T = t * sc.Tc
        delta = float(gap_at_temperature(sc, T))
        for x in one_photon_detunings:
            op = OperatingPoint.from_sum(T, w_sum, x * delta, B2)
            o = oracle_rate_one_photon(mat, sc, op, cfg)
            checks.append(SpotCheck("r1", t, x, rate_one_photon(mat, sc, op), o.value, o.change))
        for x in two_photon_detunings:
            op = OperatingPoint.from_sum(T, w_sum, x * delta, B2)
            o = oracle_rate_two_photon(mat, sc, op, "psi_plus", cfg)
            checks.append(SpotCheck("r2_psi_plus", t, x, rate_two_photon_psi(mat, sc, op), o.value, o.change))
    ratios = [c.ratio for c in checks if c.quantity == "r2_psi_plus" and math.isfinite(c.ratio)]
    scale = statistics.median(ratios) if ratios else math.nan
    return ValidationReport(checks, scale, tolerance)
