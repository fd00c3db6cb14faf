"""Third-order expansion coefficients along a periodic orbit and twist checks.

Writing r = r_k(t) + y in the radial equation r'' = F(t, r) gives

    y'' + A(t) y + B(t) y^2 + C(t) y^3 + O(y^4) = 0,
    A = -F_r,  B = -F_rr / 2,  C = -F_rrr / 6,

evaluated at r = r_k(t). With g = p_z + I0 ln r + k a these are

    A = 3 L^2/r^4 + g_r^2 + g g_rr
    B = -6 L^2/r^5 + (3 g_r g_rr + g g_rrr) / 2
    C = 10 L^2/r^6 + (3 g_rr^2 + 4 g_r g_rrr + g g_rrrr) / 6

(``form="taylor"``). ``form="paper"`` evaluates the alternative closed
expressions in which the k-dependent part is k d^n/dr^n (a g) for n = 2, 3, 4
with no factorial weights; it agrees with the Taylor form at k = 0 only.

The twist test compares sup/inf of the sampled coefficients; each extremum
is inflated by half a grid step times the largest sampled slope so that a
coarse grid cannot certify falsely.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from .continuation import PeriodicOrbit
from .dynamics import resolve_source
from .errors import UnsupportedOrderError, ValidationError
from .potential import PotentialField
from .triplets import Triplet

__all__ = [
    "TwistCoefficients",
    "TwistCertificate",
    "ThresholdReport",
    "compute_coefficients",
    "limit_coefficients",
    "check_twist",
    "twist_threshold",
]

FORMS = ("taylor", "paper")


@dataclass
class TwistCoefficients:
    t: np.ndarray
    r: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Abar: float
    Bbar: float
    Cbar: float
    k: float = 0.0
    form: str = "taylor"
    rotation_angle: float | None = None

    @property
    def xi_A(self):
        return self.A - self.Abar

    @property
    def xi_B(self):
        return self.B - self.Bbar

    @property
    def xi_C(self):
        return self.C - self.Cbar

    def residual_norms(self) -> dict:
        return {"xi_A": float(np.max(np.abs(self.xi_A))),
                "xi_B": float(np.max(np.abs(self.xi_B))),
                "xi_C": float(np.max(np.abs(self.xi_C)))}


def limit_coefficients(triplet: Triplet):
    """(Abar, Bbar, Cbar) on the constant orbit at k = 0."""
    return triplet.Abar, triplet.Bbar, triplet.Cbar


def _leibniz(u, v, n):
    return sum(math.comb(n, m) * u[m] * v[n - m] for m in range(n + 1))


def compute_coefficients(orbit: PeriodicOrbit, field: PotentialField, triplet: Triplet,
                         k: float | None = None, form: str = "taylor", exact: bool = False,
                         r_range=None, L: float | None = None, p_z: float | None = None
                         ) -> TwistCoefficients:
    """A, B, C sampled along ``orbit``.

    Parameters
    ----------
    exact : bool
        Evaluate a and its r-derivatives by direct quadrature instead of the
        memoized interpolant (slow; about 40 ms per sample).
    """
    if form not in FORMS:
        raise ValidationError(f"form must be one of {FORMS}")
    k = orbit.k if k is None else float(k)
    prof = field.profile
    if k != 0 and not prof.is_zero and prof.smoothness < 4:
        raise UnsupportedOrderError("the coefficients need four r-derivatives of the potential")
    L = triplet.L if L is None else L
    p_z = triplet.p_z if p_z is None else p_z
    I0 = prof.I0
    t = np.asarray(orbit.t, dtype=float)
    r = np.asarray(orbit.r, dtype=float)
    if np.any(r <= 0):
        raise ValidationError("orbit radius must stay positive")

    # static part g0 = p_z + I0 ln r and its derivatives
    g0 = [p_z + I0 * np.log(r), I0 / r, -I0 / r**2, 2 * I0 / r**3, -6 * I0 / r**4]
    a = [np.zeros_like(r) for _ in range(5)]
    if k != 0 and not prof.is_zero:
        if r_range is None:
            r_range = (0.5 * triplet.rbar, 2.0 * triplet.rbar)
        src = resolve_source(field, k, fast=not exact, r_range=r_range)
        cols = [src.jet(ti, ri, 4) for ti, ri in zip(t, r)]
        a = [np.array([float(c[j]) for c in cols]) for j in range(5)]
    g = [g0[j] + k * a[j] for j in range(5)]
    L2 = L * L

    if form == "taylor":
        A = 3 * L2 / r**4 + g[1] ** 2 + g[0] * g[2]
        B = -6 * L2 / r**5 + 0.5 * (3 * g[1] * g[2] + g[0] * g[3])
        C = 10 * L2 / r**6 + (3 * g[2] ** 2 + 4 * g[1] * g[3] + g[0] * g[4]) / 6.0
    else:
        lr = np.log(r)
        A = 3 * L2 / r**4 - I0 * p_z / r**2 + I0**2 * (1 - lr) / r**2 + k * _leibniz(a, g, 2)
        B = (-6 * L2 / r**5 + I0 * p_z / r**3 + I0**2 * (2 * lr - 3) / (2 * r**3)
             + k * _leibniz(a, g, 3))
        C = (10 * L2 / r**6 - I0 * p_z / r**4 + I0**2 * (11 - 6 * lr) / (6 * r**4)
             + k * _leibniz(a, g, 4))
    Abar, Bbar, Cbar = limit_coefficients(triplet)
    return TwistCoefficients(t, r, A, B, C, Abar, Bbar, Cbar, k, form, orbit.rotation_angle)


@dataclass
class TwistCertificate:
    condition_i: bool
    condition_ii: bool
    condition_iii: bool
    margin_i: float
    margin_i_lower: float
    margin_ii: float
    margin_iii: float
    margin_iii_raw: float
    Ainf: float
    Asup: float
    Cinf: float
    Csup: float
    Binf2: float
    B_sign_change: bool
    h: float | None
    grid_stable: bool
    inflation: dict = dc_field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.condition_i and self.condition_ii and self.condition_iii

    def __bool__(self):
        return self.certified

    def min_margin(self) -> float:
        return min(self.margin_i, self.margin_i_lower, self.margin_ii, self.margin_iii)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["certified"] = self.certified
        return d


def _extrema(t, f):
    """(inf, sup, inflation) with a Lipschitz allowance of slope * h / 2."""
    if f.size < 2:
        return float(f.min()), float(f.max()), 0.0
    dt = np.diff(t)
    slope = np.abs(np.diff(f)) / dt
    infl = float(np.max(slope) * np.max(dt) / 2.0)
    return float(f.min()) - infl, float(f.max()) + infl, infl


def _bounds(t, A, B, C):
    Ainf, Asup, iA = _extrema(t, A)
    Cinf, Csup, iC = _extrema(t, C)
    sign_change = bool(np.min(B) <= 0 <= np.max(B))
    if sign_change:
        Binf_abs, iB = 0.0, 0.0
    else:
        absB = np.abs(B)
        lo, _, iB = _extrema(t, absB)
        Binf_abs = max(lo, 0.0)
    return Ainf, Asup, Cinf, Csup, Binf_abs, sign_change, {"A": iA, "B": iB, "C": iC}


def check_twist(coeffs: TwistCoefficients, T: float, grid_tol: float = 1e-6) -> TwistCertificate:
    """Twist conditions on sampled coefficients.

    (i)   0 < A_* <= A^* < (pi / (2T))^2
    (ii)  C_* > 0
    (iii) 10 B_*^2 A_*^{3/2} > 9 C^* (A^*)^{5/2}

    ``margin_iii`` is the left side minus the right side divided by
    A_*^{3/2}, so at k = 0 it reduces to 10 Bbar^2 - 9 Cbar Abar.
    ``h`` is the monodromy rotation number (rotation angle / 2 pi).
    """
    t, A, B, C = coeffs.t, coeffs.A, coeffs.B, coeffs.C
    Ainf, Asup, Cinf, Csup, Babs, sign_change, infl = _bounds(t, A, B, C)
    # stability of the extrema under halving the grid
    if t.size >= 5:
        coarse = _bounds(t[::2], A[::2], B[::2], C[::2])
        drift = max(abs(x - y) for x, y in zip(coarse[:5], (Ainf, Asup, Cinf, Csup, Babs)))
        grid_stable = drift <= grid_tol + 2 * max(infl.values())
    else:
        grid_stable = False
    lim = (math.pi / (2 * T)) ** 2
    Binf2 = Babs * Babs
    margin_i = lim - Asup
    cond_i = Ainf > 0 and Ainf <= Asup and margin_i > 0
    cond_ii = Cinf > 0
    if Ainf > 0:
        raw = 10 * Binf2 * Ainf**1.5 - 9 * Csup * Asup**2.5
        margin_iii = raw / Ainf**1.5
    else:
        raw = margin_iii = -math.inf
    cond_iii = raw > 0
    h = None if coeffs.rotation_angle is None else coeffs.rotation_angle / (2 * math.pi)
    return TwistCertificate(cond_i, cond_ii, cond_iii, margin_i, Ainf, Cinf, margin_iii, raw,
                            Ainf, Asup, Cinf, Csup, Binf2, sign_change, h, bool(grid_stable), infl)


@dataclass
class ThresholdReport:
    k1: float | None
    ks: list[float]
    certified: list[bool]
    margins: list[dict]
    margins_decreasing: bool
    reason: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def twist_threshold(orbits, field: PotentialField, triplet: Triplet, T: float,
                    safety: float = 0.0, **kw) -> ThresholdReport:
    """Largest k along a branch whose certificate passes with margins > safety."""
    ks, passed, margins = [], [], []
    k1 = None
    for orb in orbits:
        cert = check_twist(compute_coefficients(orb, field, triplet, **kw), T)
        ks.append(orb.k)
        ok = cert.certified and cert.min_margin() > safety
        passed.append(bool(ok))
        margins.append({"i": cert.margin_i, "ii": cert.margin_ii, "iii": cert.margin_iii})
        if ok and (k1 is None or abs(orb.k) > abs(k1)):
            k1 = orb.k
    dec = all(margins[j + 1][key] <= margins[j][key] + 1e-12
              for j in range(len(margins) - 1) for key in ("i", "ii", "iii"))
    reason = "" if k1 is not None else "no orbit on the branch passes the twist test"
    return ThresholdReport(k1, ks, passed, margins, dec, reason)
