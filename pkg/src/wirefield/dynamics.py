"""Equations of motion, first integrals and effective potential.

Radial equation (unit charge and mass, mu0 = 2 pi)::

    r'' = L^2 / r^3 - g(t, r) dg/dr,     g = p_z + I0 ln r + k a(t, r)

with theta' = L / r^2 and z' = g. The Cartesian Newton-Lorentz form uses
E = E_z z-hat, B = B_theta theta-hat (see :mod:`wirefield.fields`).

All integrations go through :func:`scipy.integrate.solve_ivp` with the
Dormand-Prince 5(4) pair (``RK45``) by default. The potential a(t, r) is read
from a memoized :class:`~wirefield.potential.PotentialInterpolant` in fast
mode and from direct quadrature in exact mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

from .errors import CollisionError, IntegrationError, ValidationError, WireSingularityError
from .potential import PotentialField, _check_r

__all__ = [
    "RadialState",
    "CylindricalState",
    "MomentumPair",
    "Trajectory",
    "R_MIN",
    "resolve_source",
    "radial_rhs",
    "radial_rhs_batch",
    "g_derivatives",
    "effective_potential",
    "static_potential",
    "integrate",
    "first_integrals",
    "reconstruct_angles",
    "radial_from_cartesian",
]

R_MIN = 1e-8
SYSTEMS = ("radial", "cylindrical", "cartesian")


class RadialState(NamedTuple):
    r: float
    rdot: float


class CylindricalState(NamedTuple):
    r: float
    rdot: float
    theta: float
    z: float


class MomentumPair(NamedTuple):
    L: float
    p_z: float


def resolve_source(field: PotentialField, k: float, fast: bool = True, r_range=None,
                   interp_tol: float = 1e-10):
    """Object answering ``partial``/``a_ar`` for a(t, r), or None when k a vanishes."""
    if k == 0 or field.profile.is_zero:
        return None
    if not fast:
        return field
    if r_range is None:
        raise ValidationError("fast mode needs an interpolation range r_range=(r_lo, r_hi)")
    return field.interpolant(r_range[0], r_range[1], interp_tol)


def _k(field, k):
    return field.profile.k if k is None else float(k)


# ------------------------------------------------------------------ radial
def radial_rhs(t, state, momenta, field: PotentialField, k=None, source=None):
    """r'' for the reduced radial equation.

    ``state`` may be a RadialState or a bare radius. ``source`` defaults to
    exact quadrature of the field.
    """
    r = state[0] if isinstance(state, (tuple, RadialState)) else state
    r = _check_r(r)
    k = _k(field, k)
    src = field if source is None else source
    L, p_z = momenta
    I0 = field.profile.I0
    g = p_z + I0 * np.log(r)
    gr = I0 / r
    if k != 0 and not field.profile.is_zero:
        a, ar = src.a_ar(t, r)
        g = g + k * a
        gr = gr + k * ar
    return L * L / r**3 - g * gr


def radial_rhs_batch(I0: float, k: float, source, L, p_z):
    """Vector field for ``solve_ivp`` on flattened batches y = [r..., rdot...]."""
    L2 = np.asarray(L, dtype=float) ** 2
    p_z = np.asarray(p_z, dtype=float)

    if source is None or k == 0:
        def f(t, y):
            m = y.size // 2
            r = y[:m]
            return np.concatenate((y[m:], L2 / r**3 - (p_z + I0 * np.log(r)) * (I0 / r)))
    else:
        def f(t, y):
            m = y.size // 2
            r = y[:m]
            a, ar = source.a_ar(t, r)
            g = p_z + I0 * np.log(r) + k * a
            return np.concatenate((y[m:], L2 / r**3 - g * (I0 / r + k * ar)))
    return f


def g_derivatives(t, r, momenta, field: PotentialField, order: int, k=None, source=None):
    """[g, dg/dr, ..., d^order g/dr^order] for g = p_z + I0 ln r + k a."""
    r = _check_r(r)
    k = _k(field, k)
    src = field if source is None else source
    out = [momenta[1] + field.a0(r)]
    for j in range(1, order + 1):
        out.append(field.a0(r, j))
    if k != 0 and not field.profile.is_zero:
        for j in range(order + 1):
            out[j] = out[j] + k * src.partial(t, r, 0, j)
    return out


def effective_potential(t, r, momenta, field: PotentialField, order: int = 0, k=None, source=None):
    """V = L^2/(2 r^2) + g^2/2 or its r-derivative of the given order (<= 4)."""
    if not 0 <= order <= 4:
        raise ValidationError("effective potential derivatives are available up to order 4")
    r = _check_r(r)
    L = momenta[0]
    g = g_derivatives(t, r, momenta, field, order, k, source)
    cent = 0.5 * L * L * (-1) ** order * math.factorial(order + 1) * r ** (-2 - order)
    quad = 0.5 * sum(math.comb(order, m) * g[m] * g[order - m] for m in range(order + 1))
    return cent + quad


def static_potential(r, momenta, I0: float):
    """V0(r) for k = 0."""
    L, p_z = momenta
    return 0.5 * L * L / r**2 + 0.5 * (p_z + I0 * np.log(r)) ** 2


# ------------------------------------------------------------------ integrate
@dataclass
class Trajectory:
    system: str
    t: np.ndarray
    y: np.ndarray
    status: str
    message: str = ""
    collision_time: float | None = None
    sol: object = dc_field(default=None, repr=False)
    nfev: int = 0

    @property
    def collided(self) -> bool:
        return self.collision_time is not None

    @property
    def r(self):
        if self.system == "cartesian":
            return np.hypot(self.y[0], self.y[1])
        m = self.y.shape[0] // (2 if self.system == "radial" else 4)
        return self.y[:m] if m > 1 else self.y[0]

    @property
    def rdot(self):
        if self.system == "cartesian":
            x, y, _, vx, vy, _ = self.y
            return (x * vx + y * vy) / np.hypot(x, y)
        if self.system == "radial":
            m = self.y.shape[0] // 2
            return self.y[m:] if m > 1 else self.y[1]
        return self.y[1]


def _radius_span(y0, system):
    y0 = np.asarray(y0, dtype=float)
    if system == "cartesian":
        r = np.hypot(y0[0], y0[1])
    elif system == "radial":
        r = y0[: y0.size // 2]
    else:
        r = y0[0]
    return float(np.min(r)), float(np.max(r))


def default_r_range(y0, system="radial"):
    lo, hi = _radius_span(y0, system)
    return 0.25 * lo, 4.0 * hi


def integrate(system: str, y0, t_span, field: PotentialField, momenta=None, k=None,
              rtol: float = 1e-10, atol: float = 1e-12, t_eval=None, fast: bool = True,
              r_range=None, r_min: float = R_MIN, method: str = "RK45", dense_output: bool = False,
              max_step: float = np.inf, raise_on_collision: bool = False) -> Trajectory:
    """Integrate one of the three formulations.

    Parameters
    ----------
    system : {"radial", "cylindrical", "cartesian"}
    y0 : array_like
        radial: (r, rdot) or a flattened batch (r_1..r_m, rdot_1..rdot_m);
        cylindrical: (r, rdot, theta, z); cartesian: (x, y, z, vx, vy, vz).
    momenta : MomentumPair
        Required for radial/cylindrical; for batches L and p_z may be arrays.
    fast : bool
        Read a(t, r) from a memoized interpolant on ``r_range`` (default
        ``(r0/4, 4 r0)``) instead of direct quadrature.

    Collisions (r < r_min) stop the run with status ``"collision"``; leaving
    the interpolation range stops it with status ``"escape"``.
    """
    if system not in SYSTEMS:
        raise ValidationError(f"unknown system {system!r}; expected one of {SYSTEMS}")
    y0 = np.asarray(y0, dtype=float).ravel()
    k = _k(field, k)
    lo, _ = _radius_span(y0, system)
    if not lo > 0:
        raise WireSingularityError("initial position on the wire")
    if system != "cartesian" and momenta is None:
        raise ValidationError(f"{system} integration needs momenta (L, p_z)")
    if r_range is None:
        r_range = default_r_range(y0, system)
    src = resolve_source(field, k, fast, r_range)
    I0 = field.profile.I0

    if system == "radial":
        if y0.size % 2:
            raise ValidationError("radial state must hold (r, rdot) pairs")
        fun = radial_rhs_batch(I0, k, src, momenta[0], momenta[1])
        m = y0.size // 2

        def event(t, y):
            return np.min(y[:m]) - r_min
    elif system == "cylindrical":
        fun = _cylindrical_rhs(I0, k, src, momenta)

        def event(t, y):
            return y[0] - r_min
    else:
        fun = _cartesian_rhs(I0, k, src)

        def event(t, y):
            return math.hypot(y[0], y[1]) - r_min
    event.terminal = True
    event.direction = -1
    events = [event]
    if src is not None and src is not field:
        lo_r, hi_r = src.r_lo, src.r_hi

        def escape(t, y):
            r = np.hypot(y[0], y[1]) if system == "cartesian" else y[: (y.size // 2 if system == "radial" else 1)]
            return min(np.min(r) - lo_r, hi_r - np.max(r))
        escape.terminal = True
        events.append(escape)

    sol = solve_ivp(fun, t_span, y0, method=method, rtol=rtol, atol=atol, t_eval=t_eval,
                    events=events, dense_output=dense_output, max_step=max_step)
    if sol.status == -1:
        raise IntegrationError(f"integration failed: {sol.message}")
    collision = None
    status = "ok"
    if sol.status == 1 and len(sol.t_events[0]):
        collision = float(sol.t_events[0][0])
        status = "collision"
        if raise_on_collision:
            raise CollisionError(f"collision with the wire at t={collision:.6g}", collision)
    elif sol.status == 1:
        status = "escape"
    return Trajectory(system, sol.t, sol.y, status, sol.message, collision,
                      sol.sol if dense_output else None, sol.nfev)


def _cylindrical_rhs(I0, k, src, momenta):
    L, p_z = momenta
    L2 = L * L

    def f(t, y):
        r, rd = y[0], y[1]
        g = p_z + I0 * math.log(r)
        gr = I0 / r
        if src is not None:
            a, ar = src.a_ar(t, r)
            g += k * float(a)
            gr += k * float(ar)
        return np.array([rd, L2 / r**3 - g * gr, L / (r * r), g])
    return f


def _cartesian_rhs(I0, k, src):
    def f(t, y):
        x, yy, _, vx, vy, vz = y
        r = math.hypot(x, yy)
        B = I0 / r
        Ez = 0.0
        if src is not None:
            _, ar = src.a_ar(t, r)
            B += k * float(ar)
            Ez = k * float(src.partial(t, r, 1, 0))
        s = vz * B / r
        return np.array([vx, vy, vz, -s * x, -s * yy, Ez + B * (x * vx + yy * vy) / r])
    return f


# ------------------------------------------------------------------ diagnostics
def first_integrals(traj: Trajectory, field: PotentialField, k=None, fast: bool = True,
                    r_range=None):
    """Time series of L, p_z and E0 along a Cartesian trajectory.

    E0 = rdot^2/2 + V0(r) uses the instantaneous L and p_z; it is a first
    integral only for k = 0.
    """
    if traj.system != "cartesian":
        raise ValidationError("first integrals are computed from Cartesian trajectories")
    x, y, z, vx, vy, vz = traj.y
    r = np.hypot(x, y)
    if np.any(~(r > 0)):
        raise WireSingularityError("trajectory touches the wire")
    k = _k(field, k)
    I0 = field.profile.I0
    L = x * vy - y * vx
    Az = I0 * np.log(r)
    if k != 0 and not field.profile.is_zero:
        if r_range is None:
            r_range = (0.25 * float(r.min()), 4.0 * float(r.max()))
        src = resolve_source(field, k, fast, r_range)
        Az = Az + k * src.partial(traj.t, r)
    p_z = vz - Az
    rdot = (x * vx + y * vy) / r
    E0 = 0.5 * rdot**2 + static_potential(r, (L, p_z), I0)
    return {"t": traj.t, "L": L, "p_z": p_z, "E0": E0}


def radial_from_cartesian(traj: Trajectory):
    """(r, rdot) along a Cartesian trajectory."""
    return traj.r, traj.rdot


_GL8 = leggauss(12)


def reconstruct_angles(t, sol_r, momenta, field: PotentialField, k=None, theta0=0.0, z0=0.0,
                       source=None):
    """theta(t), z(t) by quadrature of theta' = L/r^2, z' = g along r(t).

    ``sol_r`` is a dense-output callable returning (r, rdot) (e.g. the
    ``sol`` of a radial :class:`Trajectory`).
    """
    t = np.asarray(t, dtype=float)
    k = _k(field, k)
    L, p_z = momenta
    I0 = field.profile.I0
    x, w = _GL8
    theta = np.empty_like(t)
    z = np.empty_like(t)
    theta[0], z[0] = theta0, z0
    for i in range(1, t.size):
        a_, b_ = t[i - 1], t[i]
        s = 0.5 * (a_ + b_) + 0.5 * (b_ - a_) * x
        r = np.asarray(sol_r(s))[0]
        g = p_z + I0 * np.log(r)
        if k != 0 and source is not None:
            g = g + k * np.array([float(source.partial(si, ri)) for si, ri in zip(s, r)])
        elif k != 0 and not field.profile.is_zero:
            g = g + k * np.array([float(field.partial(si, ri)) for si, ri in zip(s, r)])
        h = 0.5 * (b_ - a_)
        theta[i] = theta[i - 1] + h * np.dot(w, L / r**2)
        z[i] = z[i - 1] + h * np.dot(w, g)
    return theta, z
