"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid material, superconductor or run configuration."""


class ResonanceError(ArithmeticError):
    """A rate denominator vanished exactly (photon detuning on a pole)."""


class OracleConvergenceError(RuntimeError):
    """The brute-force k-sum is under-resolved for the requested smearing."""
