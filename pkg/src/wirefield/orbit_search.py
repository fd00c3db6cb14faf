"""Rotation numbers, subharmonic orbits and perturbation ensembles.

Rotation numbers are measured in the normal-form coordinates of the
monodromy matrix, where the linearized period map is a rigid rotation, and
lifted with the continuously tracked rotation angle of the orbit.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .continuation import PeriodicOrbit, PeriodMap
from .dynamics import integrate
from .errors import ConvergenceError, NumericalError, ValidationError

__all__ = [
    "SubharmonicOrbit",
    "SubharmonicReport",
    "StabilityProbe",
    "normal_form",
    "rotation_number",
    "rotation_number_from_iterates",
    "radial_period",
    "count_sign_changes",
    "find_subharmonic",
    "stability_probe",
    "thread_cap",
]

log = logging.getLogger(__name__)

ZERO_CLUSTER_TOL = 1e-10


def thread_cap(default: int = 1) -> int:
    """Worker count from WIREFIELD_THREADS, else ``default``.

    Ensemble chunks share the interpreter lock, so one vectorized batch is
    usually fastest; threads only pay off with a thread-releasing BLAS.
    """
    env = os.environ.get("WIREFIELD_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError("WIREFIELD_THREADS must be an integer") from None
    return max(1, int(default))


# ------------------------------------------------------------------ rotation
def normal_form(M):
    """(P, theta) with P^{-1} M P the rotation by +theta, theta in (0, pi).

    Requires an elliptic M (|trace| < 2).
    """
    M = np.asarray(M, dtype=float)
    if abs(np.trace(M)) >= 2.0:
        raise ValidationError("monodromy is not elliptic; rotation numbers are undefined")
    w, V = np.linalg.eig(M)
    j = int(np.argmax(w.imag))
    theta = float(np.angle(w[j]))
    v = V[:, j]
    # M (a + i b) = e^{i theta}(a + i b) makes [a, -b] a rotation basis
    P = np.column_stack((v.real, -v.imag))
    return P, theta


def rotation_number_from_iterates(iterates, center, monodromy, lifted_angle: float) -> float:
    """Revolutions per period from successive iterates of the period map.

    ``iterates`` has shape (n, 2); angles are taken in normal-form
    coordinates around ``center``. Each step's increment is taken nearest to
    the linear rotation angle, and the integer number of full turns comes from
    ``lifted_angle``.
    """
    P, _ = normal_form(monodromy)
    u = np.linalg.solve(P, (np.asarray(iterates, dtype=float) - np.asarray(center)).T)
    phi = np.arctan2(u[1], u[0])
    # the tracked angle turns clockwise in the (r, rdot) plane; flip when P
    # preserves that orientation
    if np.linalg.det(P) > 0:
        phi = -phi
    base = lifted_angle % (2 * math.pi)
    d = np.diff(phi) - base
    d = (d + math.pi) % (2 * math.pi) - math.pi + base
    turns = math.floor(lifted_angle / (2 * math.pi))
    return float((np.mean(d) + 2 * math.pi * turns) / (2 * math.pi))


def rotation_number(pm: PeriodMap, orbit: PeriodicOrbit, radius, n_iter: int = 10_000,
                    annulus: float = 10.0) -> np.ndarray | float:
    """Average angular advance per period around the fixed point of ``orbit``.

    Start points sit at distance ``radius`` (scalar or array) from the fixed
    point along the first normal-form axis; all radii are integrated as one
    batch over ``n_iter`` periods.

    Raises
    ------
    ConvergenceError
        an iterate leaves the annulus [radius / annulus, radius * annulus].
    """
    radii = np.atleast_1d(np.asarray(radius, dtype=float))
    P, _ = normal_form(orbit.monodromy)
    axis = P[:, 0] / np.linalg.norm(P[:, 0])
    starts = orbit.x0[None, :] + radii[:, None] * axis[None, :]
    m = radii.size
    y0 = np.concatenate((starts[:, 0], starts[:, 1]))
    t_eval = np.arange(n_iter + 1) * pm.T
    traj = integrate("radial", y0, (0.0, t_eval[-1]), pm.field, momenta=(pm.L, pm.p_z), k=orbit.k,
                     rtol=pm.rtol, atol=pm.atol, t_eval=t_eval, fast=pm.fast, r_range=pm.r_range,
                     method=pm.method)
    if traj.status != "ok":
        raise ConvergenceError(f"rotation-number run stopped early ({traj.status})", float("nan"))
    out = np.empty(m)
    Pinv = np.linalg.inv(P)
    for i in range(m):
        it = np.column_stack((traj.y[i], traj.y[m + i]))
        dist = np.linalg.norm((Pinv @ (it - orbit.x0).T), axis=0)
        d0 = dist[0]
        if np.any(dist > annulus * d0) or np.any(dist < d0 / annulus):
            raise ConvergenceError("iterates escaped the sampling annulus", float(dist.max()))
        out[i] = rotation_number_from_iterates(it, orbit.x0, orbit.monodromy, orbit.rotation_angle)
    return out if np.ndim(radius) else float(out[0])


# ------------------------------------------------------------------ subharmonics
def radial_period(pm: PeriodMap, amplitude: float, rtol: float = 1e-11) -> float:
    """Period of the k = 0 radial oscillation started at (rbar + amplitude, 0)."""
    I0, L, p_z = pm.I0, pm.L, pm.p_z

    def f(t, y):
        r = y[0]
        return [y[1], L * L / r**3 - (p_z + I0 * math.log(r)) * I0 / r]

    def back(t, y):
        return y[1]
    back.direction = -1 if amplitude > 0 else 1
    guess = 2 * math.pi / pm.triplet.omega0
    ev = []
    t0, span = 0.0, 2.0 * guess
    y0 = [pm.rbar + amplitude, 0.0]
    # the start sits on the event surface, so events are collected and the
    # spurious one at t = 0 is dropped
    while not ev and t0 < 50 * guess:
        sol = solve_ivp(f, (t0, t0 + span), y0, rtol=rtol, atol=1e-13, events=back,
                        method="RK45")
        if sol.status == -1:
            break
        ev = [te for te in sol.t_events[0] if te > 1e-6 * guess]
        t0, y0 = sol.t[-1], sol.y[:, -1]
    if not ev:
        raise ConvergenceError("no return of the k=0 radial oscillation", float("nan"))
    return float(ev[0])


def count_sign_changes(values, cluster_tol: float = ZERO_CLUSTER_TOL, cyclic: bool = True) -> int:
    """Sign changes of a sampled signal; samples with |v| <= cluster_tol are skipped."""
    v = np.asarray(values, dtype=float)
    s = np.sign(v[np.abs(v) > cluster_tol])
    if s.size < 2:
        return 0
    n = int(np.count_nonzero(s[1:] != s[:-1]))
    if cyclic and s[-1] != s[0]:
        n += 1
    return n


@dataclass
class SubharmonicOrbit:
    p: int
    q: int
    k: float
    x0: np.ndarray
    residual: float
    t: np.ndarray
    r: np.ndarray
    rdot: np.ndarray
    zero_count: int
    minimal_period_check: list[bool]
    lT_distances: list[float]
    amplitude_seed: float

    @property
    def valid(self) -> bool:
        return self.zero_count == 2 * self.p and all(self.minimal_period_check)

    def summary(self) -> dict:
        return {
            "p": self.p, "q": self.q, "k": self.k, "found": True,
            "x0": [float(v) for v in self.x0], "residual": self.residual,
            "zeros": self.zero_count, "minimal_period_check": self.minimal_period_check,
            "amplitude_seed": self.amplitude_seed,
        }


@dataclass
class SubharmonicReport:
    p: int
    q: int
    k: float
    found: bool
    orbit: SubharmonicOrbit | None
    reason: str
    rotation_number: float
    attempts: int = 0

    def summary(self) -> dict:
        if self.orbit is not None:
            d = self.orbit.summary()
        else:
            d = {"p": self.p, "q": self.q, "k": self.k, "found": False, "residual": None,
                 "zeros": None}
        d.update({"reason": self.reason, "rotation_number": self.rotation_number,
                  "attempts": self.attempts})
        return d


def _seed_amplitude(pm: PeriodMap, target: float, max_amp: float):
    """Amplitude where the k = 0 rotation per period T / tau equals target."""
    def rho(a):
        return pm.T / radial_period(pm, a) - target

    grid = pm.rbar * np.geomspace(1e-4, max_amp, 40)
    prev_a, prev_v = None, None
    for sgn in (1.0, -1.0):
        prev_a, prev_v = None, None
        for a in grid:
            try:
                v = rho(sgn * a)
            except NumericalError:
                break
            if prev_v is not None and np.sign(v) != np.sign(prev_v):
                return brentq(lambda x: rho(sgn * x), prev_a, a, xtol=1e-12) * sgn
            prev_a, prev_v = a, v
    return None


def find_subharmonic(pm: PeriodMap, k: float, p: int, q: int, orbit: PeriodicOrbit | None = None,
                     n_phases: int = 12, tol: float = 1e-8, max_iter: int = 25,
                     min_period_tol: float = 1e-6, max_amp: float = 0.6,
                     samples_per_period: int = 64) -> SubharmonicReport:
    """Search a radially (rbar, p, q)-subharmonic orbit of the time-T map at k.

    Seeds lie on the k = 0 oscillation whose rotation per period is p/q;
    Newton iterations on P^q(x) - x run for all phase seeds as one batch.
    Absence of a solution is reported, not raised.
    """
    if p < 1 or q < 1:
        raise ValidationError("p and q must be positive integers")
    rho0 = float("nan")
    if orbit is not None and orbit.elliptic:
        rho0 = orbit.rotation_angle / (2 * math.pi)
    else:
        rho0 = pm.triplet.omega0 * pm.T / (2 * math.pi)
    target = p / q
    if not target < rho0:
        return SubharmonicReport(p, q, k, False, None,
                                 f"p/q={target:.6g} is not below the rotation number {rho0:.6g}",
                                 rho0)
    amp = _seed_amplitude(pm, target, max_amp)
    if amp is None:
        return SubharmonicReport(p, q, k, False, None,
                                 "no k=0 oscillation with rotation p/q in the amplitude scan", rho0)
    tau = radial_period(pm, amp)
    # phase seeds along the k = 0 closed curve
    I0, L, p_z = pm.I0, pm.L, pm.p_z

    def f0(t, y):
        return [y[1], L * L / y[0] ** 3 - (p_z + I0 * math.log(y[0])) * I0 / y[0]]
    ph = np.linspace(0.0, tau, n_phases, endpoint=False)
    curve = solve_ivp(f0, (0.0, tau), [pm.rbar + amp, 0.0], t_eval=ph, rtol=1e-11, atol=1e-13)
    X = curve.y.T.copy()
    eye = np.eye(2)
    res = np.full(len(X), np.inf)
    active = np.ones(len(X), bool)
    attempts = 0
    for _ in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        attempts += 1
        try:
            sol = pm.flow(X[idx], k, (0.0, q * pm.T))
        except NumericalError:
            # fall back to one seed at a time so one bad seed does not sink the batch
            sols = []
            for i in idx:
                try:
                    sols.append(pm.flow(X[i], k, (0.0, q * pm.T)).y[:, 0, -1])
                except NumericalError:
                    active[i] = False
                    sols.append(None)
            Y = [(i, y) for i, y in zip(idx, sols) if y is not None]
        else:
            Y = list(zip(idx, sol.y[:, :, -1].T))
        for i, y in Y:
            F = y[:2] - X[i]
            res[i] = float(np.linalg.norm(F))
            if res[i] <= tol * 1e-2:
                active[i] = False
                continue
            J = y[2:].reshape(2, 2) - eye
            step = np.linalg.lstsq(J, -F, rcond=1e-12)[0]
            nrm = np.linalg.norm(step)
            cap = 0.05 * pm.rbar
            if nrm > cap:
                step *= cap / nrm
            X[i] = X[i] + step
            if X[i][0] <= 0:
                active[i] = False
    # final residuals and validation in order of residual
    order = np.argsort(res)
    best_reason = "Newton did not converge from any seed"
    for i in order:
        if not np.isfinite(res[i]) or res[i] > 10 * tol:
            continue
        try:
            orb = _validate(pm, k, p, q, X[i], tol, min_period_tol, samples_per_period, amp)
        except NumericalError as exc:
            best_reason = f"validation failed: {exc}"
            continue
        if orb.residual > tol:
            best_reason = f"residual {orb.residual:.3e} above {tol:g}"
            continue
        if orb.valid:
            return SubharmonicReport(p, q, k, True, orb, "found", rho0, attempts)
        best_reason = (f"candidate rejected: zeros={orb.zero_count}, "
                       f"minimal period checks={orb.minimal_period_check}")
    return SubharmonicReport(p, q, k, False, None, best_reason, rho0, attempts)


def _validate(pm, k, p, q, x0, tol, min_period_tol, spp, amp) -> SubharmonicOrbit:
    n = q * spp
    t = np.linspace(0.0, q * pm.T, n + 1)
    sol = pm.flow(x0, k, (0.0, q * pm.T), t_eval=t)
    y = sol.y[:, 0, :]
    r, rd = y[0], y[1]
    residual = float(np.hypot(r[-1] - x0[0], rd[-1] - x0[1]))
    zeros = count_sign_changes(r[:-1] - pm.rbar)
    dists = [float(np.hypot(r[l * spp] - x0[0], rd[l * spp] - x0[1])) for l in range(1, q)]
    checks = [d > min_period_tol for d in dists]
    return SubharmonicOrbit(p, q, k, np.asarray(x0, float), residual, t, r, rd, zeros, checks,
                            dists, float(amp))


# ------------------------------------------------------------------ stability probe
@dataclass
class StabilityProbe:
    k: float
    delta: float
    horizon: int
    n_members: int
    seed: int
    max_excursion: float
    max_phase_excursion: float
    excursions: np.ndarray = dc_field(repr=False)
    collisions: int = 0
    escapes: int = 0
    eps: float = 1e-2
    exceeded: int = 0
    perturbations: np.ndarray = dc_field(default=None, repr=False)

    def summary(self) -> dict:
        return {
            "k": self.k, "delta": self.delta, "horizon": self.horizon,
            "n_members": self.n_members, "seed": self.seed,
            "max_excursion": self.max_excursion,
            "max_phase_excursion": self.max_phase_excursion,
            "collisions": self.collisions, "escapes": self.escapes,
            "eps": self.eps, "exceeded": self.exceeded,
        }


def _ball(rng, n, dim, delta):
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (delta * rng.random(n) ** (1.0 / dim))[:, None]


def stability_probe(pm: PeriodMap, orbit: PeriodicOrbit, delta: float, horizon: int = 1000,
                    n_members: int = 200, seed: int = 0, eps: float = 1e-2,
                    samples_per_period: int = 16, rtol: float = 1e-9, atol: float = 1e-11,
                    chunks: int | None = None) -> StabilityProbe:
    """Ensemble of perturbed radial solutions around ``orbit``.

    Perturbations are uniform in the delta-ball over (r0, rdot0, L, p_z).
    The excursion of a member is max_t |r(t) - r_k(t)| on a grid of
    ``samples_per_period`` points per period; the phase-space metric
    |dr| + |drdot| is reported as well. Findings are data, never errors.
    """
    rng = np.random.default_rng(seed)
    dp = _ball(rng, n_members, 4, delta)
    if delta == 0:
        dp[:] = 0.0
    n_grid = orbit.t.size - 1
    if n_grid % samples_per_period:
        raise ValidationError("orbit sampling must be a multiple of samples_per_period")
    stride = n_grid // samples_per_period
    ref_r = orbit.r[:-1:stride]
    ref_rd = orbit.rdot[:-1:stride]
    t_eval = np.arange(horizon * samples_per_period + 1) * (pm.T / samples_per_period)
    chunks = chunks or min(thread_cap(1), n_members)
    groups = np.array_split(np.arange(n_members), chunks)

    def run(idx):
        return _run_members(pm, orbit, dp, idx, t_eval, rtol, atol)

    if chunks > 1:
        with ThreadPoolExecutor(max_workers=chunks) as ex:
            results = list(ex.map(run, groups))
    else:
        results = [run(g) for g in groups]
    exc = np.zeros(n_members)
    ph_exc = np.zeros(n_members)
    collisions = escapes = 0
    reps = horizon + 1
    for idx, (status, R, RD) in zip(groups, results):
        for j, i in enumerate(idx):
            st = status[j]
            collisions += st == "collision"
            escapes += st == "escape"
            r, rd = R[j], RD[j]
            nt = r.size
            rr = np.tile(ref_r, reps)[:nt]
            rrd = np.tile(ref_rd, reps)[:nt]
            exc[i] = np.max(np.abs(r - rr)) if st == "ok" else np.inf
            ph_exc[i] = np.max(np.abs(r - rr) + np.abs(rd - rrd)) if st == "ok" else np.inf
    return StabilityProbe(orbit.k, delta, horizon, n_members, seed, float(exc.max()),
                          float(ph_exc.max()), exc, int(collisions), int(escapes), eps,
                          int(np.count_nonzero(exc > eps)), dp)


def _run_members(pm, orbit, dp, idx, t_eval, rtol, atol):
    m = idx.size
    r0 = orbit.x0[0] + dp[idx, 0]
    v0 = orbit.x0[1] + dp[idx, 1]
    L = pm.L + dp[idx, 2]
    pz = pm.p_z + dp[idx, 3]
    traj = integrate("radial", np.concatenate((r0, v0)), (0.0, t_eval[-1]), pm.field,
                     momenta=(L, pz), k=orbit.k, rtol=rtol, atol=atol, t_eval=t_eval,
                     fast=pm.fast, r_range=pm.r_range, method=pm.method)
    if traj.status == "ok":
        return ["ok"] * m, traj.y[:m], traj.y[m:]
    if m == 1:
        return [traj.status], traj.y[:1], traj.y[1:]
    # attribute the failure: rerun members one at a time
    status, R, RD = [], [], []
    for i in idx:
        s, r, rd = _run_members(pm, orbit, dp, np.array([i]), t_eval, rtol, atol)
        status += s
        R.append(r[0])
        RD.append(rd[0])
    return status, R, RD
