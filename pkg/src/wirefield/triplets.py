"""Admissible (rbar, L, p_z) triplets and their resonance classification."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import InvalidTripletError

__all__ = [
    "Triplet",
    "AdmissibilityReport",
    "ResonanceReport",
    "StrongResonanceReport",
    "complete_triplet",
    "is_admissible",
    "resonance_check",
    "strong_resonance_check",
    "classify",
]

RESONANCE_REL_TOL = 1e-9
RESONANCE_N_MAX = 10**6


@dataclass(frozen=True)
class Triplet:
    rbar: float
    L: float
    p_z: float
    I0: float

    def __post_init__(self):
        if not self.rbar > 0:
            raise InvalidTripletError("rbar must be positive")
        if self.I0 == 0:
            raise InvalidTripletError("I0 must be nonzero")

    @property
    def omega0(self) -> float:
        """Linear frequency of the k = 0 radial oscillation about rbar."""
        return math.sqrt(self.Abar)

    @property
    def Abar(self) -> float:
        r = self.rbar
        return 2 * self.L**2 / r**4 + self.I0**2 / r**2

    @property
    def Bbar(self) -> float:
        r = self.rbar
        return -5 * self.L**2 / r**5 - 1.5 * self.I0**2 / r**3

    @property
    def Cbar(self) -> float:
        r = self.rbar
        return 9 * self.L**2 / r**6 + (11.0 / 6.0) * self.I0**2 / r**4

    @property
    def axial_velocity(self) -> float:
        """dz/dt on the k = 0 equilibrium."""
        return self.p_z + self.I0 * math.log(self.rbar)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    defect: float

    def __bool__(self):
        return self.admissible


def complete_triplet(rbar: float, I0: float, branch: int = 1) -> Triplet:
    """L = branch |I0| rbar, p_z = I0 - I0 ln rbar."""
    if not rbar > 0:
        raise InvalidTripletError("rbar must be positive")
    if I0 == 0:
        raise InvalidTripletError("I0 must be nonzero")
    sign = 1.0 if branch >= 0 else -1.0
    return Triplet(float(rbar), sign * abs(I0) * rbar, I0 - I0 * math.log(rbar), float(I0))


def is_admissible(t: Triplet, tol: float = 1e-12) -> AdmissibilityReport:
    if t.L == 0:
        raise InvalidTripletError("admissible triplets need nonzero angular momentum L")
    defect = t.L**2 - t.rbar**2 * t.I0 * (t.p_z + t.I0 * math.log(t.rbar))
    return AdmissibilityReport(abs(defect) <= tol * max(1.0, t.L**2), defect)


@dataclass(frozen=True)
class ResonanceReport:
    """``paper_literal`` / ``spectral`` are True when the triplet is NON-resonant.

    paper_literal tests T against {n * omega0}; spectral tests omega0 * T
    against 2 pi N (a nontrivial T-periodic solution of the linearization).
    Margins are relative distances to the nearest resonant value.
    """

    paper_literal: bool
    spectral: bool
    paper_margin: float
    spectral_margin: float
    paper_n: int
    spectral_n: int


def _nearest(x: float, step: float, rel_tol: float, n_max: int):
    n = max(1, round(x / step))
    if n > n_max:
        return True, float("inf"), n
    margin = abs(x - n * step) / x
    return margin > rel_tol, margin, n


def resonance_check(t: Triplet, T: float, rel_tol: float = RESONANCE_REL_TOL,
                    n_max: int = RESONANCE_N_MAX) -> ResonanceReport:
    w0 = t.omega0
    p_ok, p_margin, p_n = _nearest(T, w0, rel_tol, n_max)
    s_ok, s_margin, s_n = _nearest(w0 * T, 2 * math.pi, rel_tol, n_max)
    return ResonanceReport(p_ok, s_ok, p_margin, s_margin, p_n, s_n)


@dataclass(frozen=True)
class StrongResonanceReport:
    strong: bool
    margin: float

    def __bool__(self):
        return self.strong


def strong_resonance_check(t: Triplet, T: float) -> StrongResonanceReport:
    """omega0 < pi / (2T); margin = pi/(2T) - omega0."""
    margin = math.pi / (2 * T) - t.omega0
    return StrongResonanceReport(margin > 0, margin)


def classify(t: Triplet, T: float, tol: float = 1e-12) -> dict:
    """Everything the ``triplet`` CLI command reports."""
    adm = is_admissible(t, tol)
    res = resonance_check(t, T)
    strong = strong_resonance_check(t, T)
    return {
        "triplet": t.as_dict(),
        "T": T,
        "admissible": adm.admissible,
        "defect": adm.defect,
        "omega0": t.omega0,
        "paper_literal": res.paper_literal,
        "spectral": res.spectral,
        "strong": strong.strong,
        "margins": {
            "paper_literal": res.paper_margin,
            "spectral": res.spectral_margin,
            "strong": strong.margin,
        },
    }
