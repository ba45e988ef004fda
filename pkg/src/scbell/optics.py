"""Polarisation algebra for frequency-tagged photon pairs.

Jones conventions (the Bell-label pairing depends on them):

* linear basis (H, V); circular basis R = (1, -i)/sqrt(2), L = (1, i)/sqrt(2);
* a retarder with fast axis at angle ``theta`` from H and retardance ``g`` is
  ``Rot(-theta) diag(1, exp(i g)) Rot(theta)``, QWP g = pi/2, HWP g = pi;
* operators are built in the linear basis and conjugated into the circular
  basis, in which the two-photon amplitudes are stored.

Two-photon amplitudes are ordered (RR, RL, LR, LL) with the first letter the
polarisation of the ``mu`` photon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NORM_TOLERANCE = 1e-10
IDENTIFY_THRESHOLD = 0.999

_S = 1.0 / math.sqrt(2.0)
# columns are R and L in the (H, V) basis
CIRCULAR = np.array([[_S, _S], [-1j * _S, 1j * _S]])

BELL_LABELS = ("Psi+", "Psi-", "Phi+", "Phi-")
BELL_VECTORS = {
    "Psi+": np.array([0, _S, _S, 0], dtype=complex),
    "Psi-": np.array([0, _S, -_S, 0], dtype=complex),
    "Phi+": np.array([_S, 0, 0, _S], dtype=complex),
    "Phi-": np.array([_S, 0, 0, -_S], dtype=complex),
}
RETARDANCE = {"QWP": math.pi / 2.0, "HWP": math.pi}

# Fast-axis angles of the first and second QWP.  With both at 45 degrees the
# chain around a 45-degree HWP is the identity; crossing the second plate
# gives the Psi/Phi exchange.
DEFAULT_QWP_ANGLES = (math.pi / 4.0, -math.pi / 4.0)


@dataclass(frozen=True)
class TwoPhotonState:
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.shape != (4,):
            raise ValueError("a two-photon state has four amplitudes")
        object.__setattr__(self, "amps", amps)

    @classmethod
    def bell(cls, label: str) -> "TwoPhotonState":
        return cls(BELL_VECTORS[label].copy())

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def is_normalised(self) -> bool:
        return abs(self.norm - 1.0) <= NORM_TOLERANCE

    def overlap(self, other: "TwoPhotonState") -> float:
        """|<other|self>|, insensitive to global phase."""
        return float(abs(np.vdot(other.amps, self.amps)))


@dataclass(frozen=True)
class OpticalElement:
    kind: str
    angle: float
    arm: str = "mu"

    def __post_init__(self):
        if self.kind not in RETARDANCE:
            raise ValueError(f"kind must be QWP or HWP, got {self.kind!r}")
        if self.arm not in ("mu", "nu"):
            raise ValueError(f"arm must be 'mu' or 'nu', got {self.arm!r}")

    def jones_linear(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        rot = np.array([[c, s], [-s, c]])
        return rot.T @ np.diag([1.0, np.exp(1j * RETARDANCE[self.kind])]) @ rot

    def jones(self) -> np.ndarray:
        """Single-photon operator in the (R, L) basis."""
        return CIRCULAR.conj().T @ self.jones_linear() @ CIRCULAR

    def two_photon_operator(self) -> np.ndarray:
        u = self.jones()
        return np.kron(u, np.eye(2)) if self.arm == "mu" else np.kron(np.eye(2), u)


def apply_elements(state: TwoPhotonState, elements) -> TwoPhotonState:
    """Pass the pair through ``elements`` in order."""
    if not state.is_normalised():
        raise ValueError(f"input state is not normalised (norm {state.norm!r})")
    amps = state.amps
    for element in elements:
        amps = element.two_photon_operator() @ amps
    return TwoPhotonState(amps)


def identify_bell(state: TwoPhotonState):
    """Closest Bell state and its fidelity |<Bell|state>|^2.

    Returns ``("other", f)`` when the best fidelity is below
    :data:`IDENTIFY_THRESHOLD` or shared by two Bell states.
    """
    fidelities = {label: abs(np.vdot(vec, state.amps)) ** 2 for label, vec in BELL_VECTORS.items()}
    ranked = sorted(fidelities.items(), key=lambda item: -item[1])
    (best, f_best), (_, f_next) = ranked[0], ranked[1]
    if f_best < IDENTIFY_THRESHOLD or math.isclose(f_best, f_next, rel_tol=0.0, abs_tol=1e-12):
        return "other", float(f_best)
    return best, float(f_best)


def converter(hwp_angle: float, qwp_angles=DEFAULT_QWP_ANGLES, arm: str = "mu"):
    """QWP, HWP, QWP chain acting on one frequency arm."""
    q1, q2 = qwp_angles
    return [OpticalElement("QWP", q1, arm), OpticalElement("HWP", hwp_angle, arm), OpticalElement("QWP", q2, arm)]


def conversion_table(qwp_angles=DEFAULT_QWP_ANGLES, arm: str = "mu", hwp_degrees=(0.0, 45.0)):
    """Map ``(input label, HWP angle in degrees) -> (output label, fidelity)``."""
    table = {}
    for degrees in hwp_degrees:
        chain = converter(math.radians(degrees), qwp_angles, arm)
        for label in BELL_LABELS:
            table[(label, degrees)] = identify_bell(apply_elements(TwoPhotonState.bell(label), chain))
    return table
