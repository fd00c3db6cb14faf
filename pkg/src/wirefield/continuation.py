"""Radially T-periodic orbits by Newton shooting and continuation in k.

The period map P_k sends (r(0), rdot(0)) to (r(T), rdot(T)) along the radial
equation. Its Jacobian (the monodromy matrix) comes from integrating the
first variation

    y' = [[0, 1], [-V_rr(t, r(t)), 0]] y

jointly with the orbit, using the same potential source as the right-hand
side so that the Jacobian is consistent with the map.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import R_MIN, resolve_source
from .errors import (CollisionError, ConvergenceError, IntegrationError, NoBranchError,
                     NumericalError, PotentialRangeError, SingularJacobianError,
                     ValidationError)
from .potential import PotentialField
from .triplets import Triplet

__all__ = [
    "PeriodMap",
    "PeriodicOrbit",
    "Branch",
    "period_map",
    "newton_shoot",
    "continue_in_k",
    "rotation_angle",
    "SHOOT_TOL",
    "SIGMA_MIN",
]

log = logging.getLogger(__name__)

SHOOT_TOL = 1e-9
SIGMA_MIN = 1e-6
MAX_HALVINGS = 8


def radial_jet(t, r, L, p_z, I0, k, source):
    """(F, V_rr) with F = r'' and V_rr = -dF/dr, vectorized over r."""
    g = p_z + I0 * np.log(r)
    gr = I0 / r
    grr = -I0 / r**2
    if source is not None and k != 0:
        a, ar, arr = source.jet(t, r, 2)
        g = g + k * a
        gr = gr + k * ar
        grr = grr + k * arr
    F = L * L / r**3 - g * gr
    Vrr = 3 * L * L / r**4 + gr * gr + g * grr
    return F, Vrr


def _variational_rhs(L, p_z, I0, k, source):
    """Flattened batch [r, rdot, m11, m12, m21, m22] x m."""

    def f(t, y):
        Y = y.reshape(6, -1)
        r, rd = Y[0], Y[1]
        F, Vrr = radial_jet(t, r, L, p_z, I0, k, source)
        out = np.empty_like(Y)
        out[0] = rd
        out[1] = F
        out[2] = Y[4]
        out[3] = Y[5]
        out[4] = -Vrr * Y[2]
        out[5] = -Vrr * Y[3]
        return out.ravel()
    return f


@dataclass
class PeriodMap:
    """Time-T map of the radial equation for a fixed (L, p_z) and current.

    Parameters
    ----------
    triplet : Triplet
        Supplies (L, p_z, I0) and the reference radius rbar.
    field : PotentialField
        Potential of the periodic current; its k is ignored (k is an argument
        of every map evaluation).
    T : float, optional
        Period; defaults to the current's period.
    fast : bool
        Use the memoized interpolant on ``r_range`` (default ``(rbar/2, 2 rbar)``).
    """

    triplet: Triplet
    field: PotentialField
    T: float | None = None
    rtol: float = 1e-12
    atol: float = 1e-13
    fast: bool = True
    r_range: tuple[float, float] | None = None
    method: str = "RK45"
    L: float | None = None
    p_z: float | None = None

    def __post_init__(self):
        if self.T is None:
            self.T = self.field.profile.T
        if self.r_range is None:
            self.r_range = (0.5 * self.triplet.rbar, 2.0 * self.triplet.rbar)
        if self.L is None:
            self.L = self.triplet.L
        if self.p_z is None:
            self.p_z = self.triplet.p_z

    @property
    def I0(self) -> float:
        return self.field.profile.I0

    @property
    def rbar(self) -> float:
        return self.triplet.rbar

    def source(self, k: float):
        return resolve_source(self.field, k, self.fast, self.r_range)

    def flow(self, x, k: float, t_span, t_eval=None, variational: bool = True, L=None, p_z=None):
        """Integrate orbit (and first variation) from state(s) x over t_span.

        ``x`` is (r, rdot) or an (m, 2) array of states. Returns the
        :class:`scipy.integrate.OdeResult` with y reshaped to (6, m, nt).
        """
        X = np.atleast_2d(np.asarray(x, dtype=float))
        m = X.shape[0]
        if np.any(X[:, 0] <= 0):
            raise CollisionError("initial radius must be positive", 0.0)
        L = self.L if L is None else L
        p_z = self.p_z if p_z is None else p_z
        y0 = np.zeros((6, m))
        y0[0], y0[1] = X[:, 0], X[:, 1]
        y0[2] = 1.0
        y0[5] = 1.0
        fun = _variational_rhs(L, p_z, self.I0, k, self.source(k))
        lo, hi = self.r_range
        bounded = self.fast and k != 0

        def hit_wire(t, y):
            return np.min(y[:m]) - R_MIN
        hit_wire.terminal = True

        def escape(t, y):
            if not bounded:
                return 1.0
            return min(np.min(y[:m]) - lo, hi - np.max(y[:m]))
        escape.terminal = True

        sol = solve_ivp(fun, t_span, y0.ravel(), method=self.method, rtol=self.rtol,
                        atol=self.atol, t_eval=t_eval, events=(hit_wire, escape))
        if sol.status == -1:
            raise IntegrationError(f"period map integration failed: {sol.message}")
        if sol.status == 1:
            if len(sol.t_events[0]):
                te = float(sol.t_events[0][0])
                raise CollisionError(f"collision with the wire at t={te:.6g}", te)
            te = float(sol.t_events[1][0])
            raise PotentialRangeError(
                f"orbit left the interpolation range {self.r_range} at t={te:.6g}")
        sol.y = sol.y.reshape(6, m, -1)
        return sol

    def __call__(self, x, k: float, n_periods: int = 1):
        """(image, monodromy) of the n-fold period map at a single state."""
        sol = self.flow(x, k, (0.0, n_periods * self.T))
        y = sol.y[:, 0, -1]
        return y[:2].copy(), y[2:].reshape(2, 2)


def period_map(pm: PeriodMap, x, k: float, n_periods: int = 1):
    """Image of x under the period map and its monodromy matrix."""
    return pm(x, k, n_periods)


def rotation_angle(t, y, M, omega_ref: float) -> float:
    """Lifted rotation angle of the monodromy M.

    The principal angle comes from trace(M) = 2 cos(theta) (elliptic case);
    the lift is chosen from the winding of the first variation column in the
    scaled phase plane (y, -y'/omega_ref) along the sampled solution.
    """
    phase = np.unwrap(np.arctan2(-y[4] / omega_ref, y[2]))
    winding = phase[-1] - phase[0]
    tr = 0.5 * (M[0, 0] + M[1, 1])
    if abs(tr) > 1:
        # hyperbolic: no rotation, report the winding to the nearest half-turn
        return float(math.pi * round(winding / math.pi))
    base = math.acos(tr)
    m = round((winding - base) / (2 * math.pi))
    cands = [2 * math.pi * m + base, 2 * math.pi * (m + 1) - base, 2 * math.pi * m - base]
    return float(min(cands, key=lambda c: abs(c - winding)))


@dataclass
class PeriodicOrbit:
    k: float
    x0: np.ndarray
    residual: float
    t: np.ndarray
    r: np.ndarray
    rdot: np.ndarray
    monodromy: np.ndarray
    rotation_angle: float
    iterations: int = 0
    sigma_min: float = float("nan")

    @property
    def eigenvalues(self):
        return np.linalg.eigvals(self.monodromy)

    @property
    def elliptic(self) -> bool:
        return abs(np.trace(self.monodromy)) < 2.0

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.monodromy))

    def deviation(self, rbar: float) -> float:
        return float(np.max(np.abs(self.r - rbar)))

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "x0": [float(v) for v in self.x0],
            "residual": self.residual,
            "r_min": float(self.r.min()),
            "r_max": float(self.r.max()),
            "monodromy": self.monodromy.tolist(),
            "det": self.det,
            "trace": float(np.trace(self.monodromy)),
            "rotation_angle": self.rotation_angle,
            "iterations": self.iterations,
            "sigma_min": self.sigma_min,
        }


def _sample_orbit(pm: PeriodMap, x0, k, n_samples=None):
    w = pm.triplet.omega0
    if n_samples is None:
        n_samples = max(257, int(math.ceil(16 * w * pm.T / math.pi)) + 1)
    t = np.linspace(0.0, pm.T, n_samples)
    sol = pm.flow(x0, k, (0.0, pm.T), t_eval=t)
    y = sol.y[:, 0, :]
    return t, y


def newton_shoot(pm: PeriodMap, guess, k: float, tol: float = SHOOT_TOL, max_iter: int = 30,
                 sigma_tol: float = SIGMA_MIN, n_samples: int | None = None) -> PeriodicOrbit:
    """Damped Newton iteration on F(x) = P_k(x) - x.

    Raises
    ------
    SingularJacobianError
        smallest singular value of M - I at or below ``sigma_tol``.
    ConvergenceError
        no convergence to ``tol`` within ``max_iter`` iterations.
    """
    x = np.asarray(guess, dtype=float).copy()
    eye = np.eye(2)
    img, M = pm(x, k)
    F = img - x
    res = float(np.linalg.norm(F))
    sig = float("nan")
    it = 0
    polished = False
    while True:
        J = M - eye
        sig = float(np.linalg.svd(J, compute_uv=False)[-1])
        if sig <= sigma_tol:
            raise SingularJacobianError(
                f"shooting Jacobian is singular (sigma_min={sig:.3e}); resonance", sig)
        if res <= tol and (polished or res == 0.0):
            break
        if it >= max_iter:
            raise ConvergenceError(f"Newton did not converge (residual {res:.3e})", res)
        step = np.linalg.solve(J, -F)
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            x_try = x + lam * step
            try:
                img_t, M_t = pm(x_try, k)
            except (CollisionError, IntegrationError, PotentialRangeError):
                lam *= 0.5
                continue
            F_t = img_t - x_try
            r_t = float(np.linalg.norm(F_t))
            if r_t < res or r_t <= tol * 1e-3:
                break
            lam *= 0.5
        else:
            if res <= tol:
                break
            raise ConvergenceError(f"damped Newton stalled (residual {res:.3e})", res)
        polished = res <= tol
        x, img, M, F, res = x_try, img_t, M_t, F_t, r_t
        it += 1
    t, y = _sample_orbit(pm, x, k, n_samples)
    M = y[2:, -1].reshape(2, 2)
    theta = rotation_angle(t, y, M, pm.triplet.omega0)
    log.debug("k=%g converged in %d iterations, residual %.2e", k, it, res)
    return PeriodicOrbit(float(k), x, res, t, y[0].copy(), y[1].copy(), M, theta, it, sig)


@dataclass
class Branch:
    orbits: list[PeriodicOrbit]
    reason: str
    k_reached: float
    path: list[float] = dc_field(default_factory=list)

    @property
    def ks(self):
        return [o.k for o in self.orbits]

    @property
    def k0_estimate(self) -> float:
        """Empirical end of the branch (largest |k| reached)."""
        return self.k_reached

    def as_dict(self) -> dict:
        return {
            "reason": self.reason,
            "k_reached": self.k_reached,
            "orbits": [o.as_dict() for o in self.orbits],
        }


def continue_in_k(pm: PeriodMap, k_targets, dk_max: float | None = None, dk_min: float = 1e-10,
                  tol: float = SHOOT_TOL) -> Branch:
    """Follow the periodic orbit from k = 0 through the targets.

    Predictor: secant through the last two converged orbits. Step control:
    halve on failure, double after two consecutive successes, cap at
    ``dk_max``. The first entry is always the constant orbit at k = 0.
    """
    targets = [float(k) for k in k_targets if k != 0]
    if any(abs(b) <= abs(a) for a, b in zip(targets, targets[1:])):
        raise ValidationError("k targets must be strictly increasing in |k|")
    if targets and any(np.sign(k) != np.sign(targets[0]) for k in targets):
        raise ValidationError("k targets must share one sign")
    x_bar = np.array([pm.rbar, 0.0])
    try:
        orbit0 = newton_shoot(pm, x_bar, 0.0, tol)
    except NumericalError as exc:
        raise NoBranchError(f"no orbit at k=0: {exc}") from exc
    orbits = [orbit0]
    path = [0.0]
    prev = [(0.0, orbit0.x0)]
    k_cur = 0.0
    sgn = math.copysign(1.0, targets[0]) if targets else 1.0
    dk = abs(targets[0]) if targets else 0.0
    if dk_max is not None:
        dk = min(dk, dk_max)
    successes = 0
    reason = "completed"
    for target in targets:
        # try the full distance first; step control only kicks in on failure
        dk = max(dk, abs(target) - abs(k_cur))
        if dk_max is not None:
            dk = min(dk, dk_max)
        while abs(k_cur) < abs(target):
            k_try = sgn * min(abs(k_cur) + dk, abs(target))
            if len(prev) >= 2:
                (k1, x1), (k2, x2) = prev[-2], prev[-1]
                guess = x2 + (x2 - x1) * (k_try - k2) / (k2 - k1)
            else:
                guess = prev[-1][1]
            try:
                orb = newton_shoot(pm, guess, k_try, tol)
            except (SingularJacobianError, ConvergenceError, CollisionError, IntegrationError,
                    PotentialRangeError) as exc:
                last_reason = {
                    SingularJacobianError: "eigenvalue-1 crossing",
                    ConvergenceError: "non-convergence",
                    CollisionError: "collision",
                    IntegrationError: "integration failure",
                    PotentialRangeError: "left interpolation range",
                }[type(exc)]
                dk *= 0.5
                successes = 0
                if dk < dk_min:
                    if len(orbits) == 1:
                        raise NoBranchError(f"continuation failed at the first step: {exc}") from exc
                    reason = last_reason
                    return Branch(orbits, reason, k_cur, path)
                continue
            k_cur = k_try
            path.append(k_cur)
            prev.append((k_cur, orb.x0))
            successes += 1
            if successes >= 2:
                dk *= 2.0
                successes = 0
            if dk_max is not None:
                dk = min(dk, dk_max)
            if k_cur == target:
                orbits.append(orb)
    return Branch(orbits, reason, k_cur, path)
