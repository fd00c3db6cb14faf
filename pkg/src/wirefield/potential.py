"""Vector potential of the wire: a0(r) = I0 ln r and the retarded integral

    a(t, r) = int_0^inf I(t - sqrt(r^2 + tau^2)/c) / sqrt(r^2 + tau^2) dtau.

Evaluation strategy
-------------------
The integral is split at tau = r * sqrt(v_s^2 - 1) (v_s >= 2). Writing
tau = r sinh(xi) on the inner piece and sqrt(r^2 + tau^2) = r v on the outer
piece gives fixed integration limits in both variables:

    inner = int_0^{acosh v_s} I(t - r cosh(xi)/c) dxi
    outer = int_{v_s}^inf I(t - r v/c) w(v) dv,      w(v) = (v^2 - 1)^(-1/2)

so partial derivatives in (t, r) act on the integrands only. The outer piece
is integrated by parts ``n`` times, moving primitives of I onto derivatives of
w. The remaining integrand decays like v^-(p+1) and is cut at v = V with a
rigorous bound on the discarded tail (the power series of w has positive
coefficients, so every |w^(n)| is an explicit convergent series).

Both finite pieces use composite Gauss-Legendre panels narrow enough to
resolve the oscillation; the 16- and 24-point rules on the same panels give
the quadrature error estimate.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from math import comb

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial.legendre import leggauss

from .current import CurrentProfile
from .errors import (
    PotentialRangeError,
    QuadratureBudgetError,
    UnsupportedOrderError,
    ValidationError,
    WireSingularityError,
)

__all__ = [
    "QuadConfig",
    "QuadResult",
    "PotentialField",
    "PotentialInterpolant",
    "a0",
    "a",
    "a_partial",
    "wave_residual",
    "static_wave_residual",
]

_GL_LO = leggauss(16)
_GL_HI = leggauss(24)
_EPS = np.finfo(float).eps
_CHUNK = 4_000_000


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature settings.

    tol : error target for each evaluation, absolute for integrands of unit
        size and relative to the integrand's L1 mass when that is larger
        (high derivatives of fast currents are large numbers).
    parts : extra integrations by parts beyond the r-derivative order (>= 3);
        more parts shorten the outer range at no loss of accuracy.
    max_refine : number of panel halvings allowed before giving up.
    v_max : hard cap on the truncation point in the scaled variable v.
    """

    tol: float = 1e-10
    parts: int = 5
    max_refine: int = 4
    v_max: float = 1e7


@dataclass(frozen=True)
class QuadResult:
    value: np.ndarray
    error: np.ndarray

    def __iter__(self):
        yield self.value
        yield self.error


def _rising(s: int, q: int) -> float:
    out = 1.0
    for i in range(q):
        out *= s + i
    return out


def _dr_inverse_power(s: int, q: int, r: float) -> float:
    """q-th derivative of r**-s."""
    return (-1) ** q * _rising(s, q) * r ** (-s - q)


def _w_derivs(v, n: int):
    """w, w', ..., w^(n) for w(v) = (v^2 - 1)^(-1/2), v > 1.

    Uses (v^2 - 1) w^(k+1) = -(2k + 1) v w^(k) - k^2 w^(k-1).
    """
    v = np.asarray(v, dtype=float)
    s = v * v - 1.0
    out = [s ** -0.5]
    if n >= 1:
        out.append(-v * out[0] / s)
    for kk in range(1, n):
        out.append((-(2 * kk + 1) * v * out[kk] - kk * kk * out[kk - 1]) / s)
    return out


def _tail_moment(V: float, n: int, m: int) -> float:
    """Bound for int_V^inf v^m |w^(n)(v)| dv, requires n - m >= 1 and V > 1."""
    if n - m < 1:
        raise ValueError("tail integral diverges")
    total = 0.0
    beta = 1.0
    kk = 0
    while True:
        s = 2 * kk + 1
        term = beta * _rising(s, n) * V ** (m - s + 1 - n) / (s - 1 + n - m)
        total += term
        if term <= 1e-17 * total or kk > 400:
            break
        beta *= (2 * kk + 1) / (2 * kk + 2)
        kk += 1
    return total


def _panel_quad(fun, edges, n_t: int):
    """Integrate ``fun(nodes) -> (n_t, len(nodes))`` over panels.

    Returns (value, error_estimate, l1) arrays of length n_t.
    """
    edges = np.asarray(edges, dtype=float)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    val_hi = np.zeros(n_t)
    est = np.zeros(n_t)
    l1 = np.zeros(n_t)
    n_pan = mid.size
    per_chunk = max(1, _CHUNK // max(1, n_t * 40))
    for start in range(0, n_pan, per_chunk):
        sl = slice(start, start + per_chunk)
        m_, h_ = mid[sl], half[sl]
        x_lo, w_lo = _GL_LO
        x_hi, w_hi = _GL_HI
        nodes_lo = (m_[:, None] + h_[:, None] * x_lo[None, :]).ravel()
        nodes_hi = (m_[:, None] + h_[:, None] * x_hi[None, :]).ravel()
        f_lo = fun(nodes_lo).reshape(n_t, m_.size, x_lo.size)
        f_hi = fun(nodes_hi).reshape(n_t, m_.size, x_hi.size)
        q_lo = (f_lo @ w_lo) * h_[None, :]
        q_hi = (f_hi @ w_hi) * h_[None, :]
        val_hi += q_hi.sum(axis=1)
        est += np.abs(q_hi - q_lo).sum(axis=1)
        l1 += (np.abs(f_hi) @ w_hi * h_[None, :]).sum(axis=1)
    return val_hi, est, l1


def _march_edges(start: float, stop: float, width) -> np.ndarray:
    edges = [start]
    x = start
    while x < stop:
        h = width(x)
        x = min(x + h, stop)
        if stop - x < 1e-3 * h:
            x = stop
        edges.append(x)
    return np.asarray(edges)


class PotentialField:
    """Evaluator of a0, a and their partial derivatives for one current profile.

    Parameters
    ----------
    profile : CurrentProfile
    c : float
        Signal speed (default 1).
    quad : QuadConfig
    """

    def __init__(self, profile: CurrentProfile, c: float = 1.0, quad: QuadConfig | None = None):
        if not isinstance(profile, CurrentProfile):
            raise ValidationError("the potential needs a Fourier CurrentProfile")
        if not c > 0:
            raise ValidationError("signal speed c must be positive")
        self.profile = profile
        self.c = float(c)
        self.quad = quad or QuadConfig()
        if self.quad.parts < 3:
            raise ValidationError("at least three integrations by parts are required")
        self._interp_cache: dict = {}
        self._lock = threading.Lock()

    @property
    def I0(self) -> float:
        return self.profile.I0

    @property
    def k(self) -> float:
        return self.profile.k

    @property
    def key(self):
        p = self.profile
        return (p.T, p.cos_coeffs, p.sin_coeffs, self.c, self.quad)

    def with_profile(self, profile: CurrentProfile) -> "PotentialField":
        """Field for a new profile; interpolants are shared when only k changed."""
        new = PotentialField(profile, self.c, self.quad)
        if new.key == self.key:
            new._interp_cache = self._interp_cache
            new._lock = self._lock
        return new

    def with_k(self, k: float) -> "PotentialField":
        return self.with_profile(self.profile.with_k(k))

    # ------------------------------------------------------------------ a0
    def a0(self, r, dr_order: int = 0):
        r = _check_r(r)
        I0 = self.profile.I0
        if dr_order == 0:
            return I0 * np.log(r)
        return I0 * (-1) ** (dr_order - 1) * math.factorial(dr_order - 1) * r ** (-dr_order)

    # ------------------------------------------------------------------ a
    def evaluate(self, t, r, dt_order: int = 0, dr_order: int = 0, tol: float | None = None) -> QuadResult:
        """Value and error bound of d^i/dt^i d^j/dr^j a(t, r) (broadcasting)."""
        self._check_orders(dt_order, dr_order)
        t, r = np.broadcast_arrays(np.asarray(t, dtype=float), _check_r(r))
        tol = self.quad.tol if tol is None else float(tol)
        value = np.zeros(t.shape)
        error = np.zeros(t.shape)
        if self.profile.is_zero:
            return QuadResult(_squeeze(value), _squeeze(error))
        flat_t, flat_r = t.ravel(), r.ravel()
        v_out, e_out = value.reshape(-1), error.reshape(-1)
        for rr in np.unique(flat_r):
            idx = np.nonzero(flat_r == rr)[0]
            v, e = self._single_r(flat_t[idx], float(rr), dt_order, dr_order, tol)
            v_out[idx] = v
            e_out[idx] = e
        return QuadResult(_squeeze(value), _squeeze(error))

    def a(self, t, r):
        return self.evaluate(t, r).value

    def partial(self, t, r, dt_order: int = 0, dr_order: int = 0):
        return self.evaluate(t, r, dt_order, dr_order).value

    def a_ar(self, t, r):
        return self.partial(t, r), self.partial(t, r, 0, 1)

    def jet(self, t, r, order: int = 2):
        """[a, da/dr, ..., d^order a/dr^order] by direct quadrature."""
        return [self.partial(t, r, 0, j) for j in range(order + 1)]

    def _check_orders(self, i: int, j: int):
        if i < 0 or j < 0 or i > 2 or j > 4:
            raise UnsupportedOrderError(f"derivative orders (dt={i}, dr={j}) outside dt<=2, dr<=4")
        if i + j > self.profile.smoothness:
            raise UnsupportedOrderError(
                f"dt+dr={i + j} exceeds the smoothness {self.profile.smoothness} of the current")

    def _single_r(self, t, r, i, j, tol):
        prof, c, cfg = self.profile, self.c, self.quad
        freqs = prof.frequencies
        w_min, nu_max = float(freqs.min()), float(freqs.max())
        n = j + cfg.parts
        v_s = max(2.0, 1.5 * n * c / (r * w_min))
        xi_s = math.acosh(v_s)
        n_t = t.size

        def inner(xi):
            ch = np.cosh(xi)
            arg = t[:, None] - (r / c) * ch[None, :]
            return ((-ch / c) ** j)[None, :] * prof.signal(arg, i + j)

        # boundary terms at v_s
        W_s = _w_derivs(v_s, n - 1)
        arg_s = t - r * v_s / c
        boundary = np.zeros(n_t)
        for ii in range(n):
            s = ii + 1
            for m in range(j + 1):
                coef = W_s[ii] * c**s * comb(j, m) * _dr_inverse_power(s, j - m, r) * (-v_s / c) ** m
                if coef != 0.0:
                    boundary += coef * prof.signal(arg_s, -s + i + m)

        rem_coefs = [comb(j, m) * _dr_inverse_power(n, j - m, r) * c**n * (-1.0 / c) ** m
                     for m in range(j + 1)]

        def remainder(v):
            wn = _w_derivs(v, n)[n]
            arg = t[:, None] - (r / c) * v[None, :]
            out = np.zeros((n_t, v.size))
            for m, cm in enumerate(rem_coefs):
                out += cm * (v**m)[None, :] * prof.signal(arg, -n + i + m)
            return out * wn[None, :]

        def tail_bound(V):
            return sum(abs(cm) * prof.sup_bound(-n + i + m) * _tail_moment(V, n, m)
                       for m, cm in enumerate(rem_coefs))

        V = max(2.0 * v_s, v_s + 8.0)
        tail = tail_bound(V)
        while tail > 0.25 * tol:
            V *= 2.0
            if V > cfg.v_max:
                raise QuadratureBudgetError(
                    f"tail cutoff exceeded v_max={cfg.v_max:g} at r={r}", None, tail)
            tail = tail_bound(V)

        kr = r * nu_max / c
        best = None
        for refine in range(cfg.max_refine + 1):
            scale = 0.5**refine
            e_in = _march_edges(0.0, xi_s, lambda x: scale * min(0.5, math.pi / (1.65 * kr * math.cosh(x))))
            e_out = _march_edges(v_s, V, lambda x: scale * min(0.25 * x, math.pi / kr))
            q_in, est_in, l1_in = _panel_quad(inner, e_in, n_t)
            q_out, est_out, l1_out = _panel_quad(remainder, e_out, n_t)
            value = q_in + boundary + q_out
            round_off = 50 * _EPS * (l1_in + l1_out + np.abs(boundary))
            err = est_in + est_out + tail + round_off
            best = (value, err)
            if np.all(est_in + est_out <= 0.5 * tol * np.maximum(1.0, l1_in + l1_out)):
                return best
        raise QuadratureBudgetError(
            f"quadrature did not reach tol={tol:g} at r={r} (est {float(np.max(best[1])):.3g})",
            best[0], best[1])

    # --------------------------------------------------------- interpolant
    def interpolant(self, r_lo: float, r_hi: float, tol: float = 1e-10) -> "PotentialInterpolant":
        """Memoized tensor interpolant on [r_lo, r_hi] (exact trigonometric in t)."""
        key = (float(r_lo), float(r_hi), float(tol))
        with self._lock:
            hit = self._interp_cache.get(key)
            if hit is None:
                hit = PotentialInterpolant(self, r_lo, r_hi, tol)
                self._interp_cache[key] = hit
        return hit


def _check_r(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise WireSingularityError("the potential is singular on the wire (r <= 0)")
    return r


def _squeeze(x):
    return x.item() if x.ndim == 0 else x


class PotentialInterpolant:
    """Interpolant of a(t, r) on one period times [r_lo, r_hi].

    In t the representation is the exact trigonometric polynomial (the
    profile is band limited); in r it is a Chebyshev series whose degree is
    doubled until the trailing coefficients fall below ``tol``. The
    r-derivatives up to order four are fitted separately on the same nodes. The
    interpolation error is then measured against direct quadrature at points
    between the nodes and stored in ``error`` (values) and ``error_dr``
    (first r-derivative).
    """

    def __init__(self, field: PotentialField, r_lo: float, r_hi: float, tol: float = 1e-10,
                 max_degree: int = 384, verify: bool = True):
        if not 0 < r_lo < r_hi:
            raise ValidationError("interpolation range must satisfy 0 < r_lo < r_hi")
        self.field = field
        self.r_lo, self.r_hi = float(r_lo), float(r_hi)
        self.tol = float(tol)
        prof = field.profile
        self.omega = prof.omega
        self.n_harm = prof.n_harmonics
        self._zero = prof.is_zero
        self._mid = 0.5 * (self.r_lo + self.r_hi)
        self._half = 0.5 * (self.r_hi - self.r_lo)
        if self._zero:
            self.degree = 0
            self._H = {0: np.zeros((1, 1), complex)}
            self.max_dr = 4
            self.error = self.error_dr = 0.0
            return
        nt = 2 * self.n_harm + 2
        t_grid = np.arange(nt) * (prof.T / nt)
        deg = 48
        while True:
            x = np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
            r_nodes = self._mid + self._half * x
            vals = np.empty((nt, deg + 1))
            for kk, rr in enumerate(r_nodes):
                vals[:, kk] = field.evaluate(t_grid, rr).value
            coef = vals @ C.chebvander(x, deg) * (2.0 / (deg + 1))
            coef[:, 0] *= 0.5
            trailing = float(np.max(np.abs(coef[:, -4:])))
            if trailing <= 0.1 * self.tol or deg >= max_degree:
                break
            deg = min(2 * deg, max_degree)
        self.degree = deg
        self.trailing = trailing
        self._n = np.arange(self.n_harm + 1)
        # each r-derivative gets its own fit on the same nodes; differentiating
        # the value series would amplify the quadrature noise by ~deg^2 per order
        self.max_dr = min(4, prof.smoothness)
        self._nodes = (t_grid, x, r_nodes)
        self._lock = threading.Lock()
        self._H = {0: self._harmonics(coef, nt)}
        self._Hs = self._H[0][None]
        self._ensure(min(2, self.max_dr))
        self.error = self.error_dr = float("nan")
        if verify:
            self._verify(prof.T)

    def _ensure(self, order: int):
        """Fit the r-derivatives up to ``order`` (built lazily, then cached)."""
        if order > self.max_dr:
            raise UnsupportedOrderError(f"interpolant holds r-derivatives up to {self.max_dr}")
        if order < len(self._Hs):
            return
        with self._lock:
            t_grid, x, r_nodes = self._nodes
            deg = self.degree
            for dr in range(len(self._Hs), order + 1):
                vals = np.empty((t_grid.size, deg + 1))
                for kk, rr in enumerate(r_nodes):
                    vals[:, kk] = self.field.evaluate(t_grid, rr, 0, dr).value
                c_dr = vals @ C.chebvander(x, deg) * (2.0 / (deg + 1))
                c_dr[:, 0] *= 0.5
                self._H[dr] = self._harmonics(c_dr, t_grid.size)
                self._Hs = np.concatenate([self._Hs, self._H[dr][None]])

    def _harmonics(self, coef, nt):
        H = np.fft.rfft(coef, axis=0) / nt
        H[1:] *= 2.0
        return H[: self.n_harm + 1]

    def _verify(self, T):
        deg = self.degree
        xc = np.cos(np.pi * np.arange(1, deg + 1) / (deg + 1))[:: max(1, deg // 12)]
        r_chk = self._mid + self._half * xc
        t_chk = (np.arange(3) + 0.37) * T / 3.0
        tt, rr = np.meshgrid(t_chk, r_chk, indexing="ij")
        exact = self.field.evaluate(tt, rr)
        exact_r = self.field.evaluate(tt, rr, 0, 1)
        self.error = float(np.max(np.abs(self.partial(tt, rr) - exact.value)) + np.max(exact.error))
        self.error_dr = float(np.max(np.abs(self.partial(tt, rr, 0, 1) - exact_r.value))
                              + np.max(exact_r.error))

    def _x(self, r):
        r = np.asarray(r, dtype=float)
        x = (r - self._mid) / self._half
        if np.any(np.abs(x) > 1.0 + 1e-12) or np.any(~np.isfinite(x)):
            bad = r[np.abs(x) > 1.0 + 1e-12] if r.ndim else r
            raise PotentialRangeError(
                f"radius {np.ravel(bad)[:3]} outside interpolation range [{self.r_lo}, {self.r_hi}]")
        return x

    def _coef(self, t, dt_order, dr_order):
        self._ensure(dr_order)
        H = self._H[dr_order]
        fac = (1j * self._n * self.omega) ** dt_order
        t = np.asarray(t, dtype=float)
        phase = np.exp(1j * self.omega * np.multiply.outer(t, self._n)) * fac
        return np.real(phase @ H)

    def partial(self, t, r, dt_order: int = 0, dr_order: int = 0):
        if self._zero:
            return np.zeros(np.broadcast(np.asarray(t), np.asarray(r)).shape) * 1.0
        x = self._x(r)
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            out = C.chebval(x, self._coef(t, dt_order, dr_order))
        else:
            t, x = np.broadcast_arrays(t, x)
            coef = self._coef(t.ravel(), dt_order, dr_order)
            out = C.chebval(x.ravel(), coef.T, tensor=False).reshape(t.shape)
        return out

    def _cheb_basis(self, r):
        """T_j(x(r)) for j = 0..degree, shape (degree + 1,) + shape(r)."""
        x = np.clip(self._x(r), -1.0, 1.0)
        j = np.arange(self.degree + 1).reshape((-1,) + (1,) * x.ndim)
        return np.cos(j * np.arccos(x))

    def jet(self, t: float, r, order: int = 2):
        """[a, da/dr, ..., d^order a/dr^order] at a scalar time, vectorized over r."""
        if self._zero:
            z = np.zeros(np.shape(r))
            return [z] * (order + 1)
        self._ensure(order)
        basis = self._cheb_basis(r)
        phase = np.exp(1j * self.omega * t * self._n)
        coef = np.real(phase @ self._Hs[: order + 1])
        out = np.tensordot(coef, basis, axes=(1, 0))
        return list(out)

    def a_ar(self, t: float, r):
        """(a, da/dr) at a scalar time, vectorized over r."""
        a, ar = self.jet(t, r, 1)
        return a, ar

    def a(self, t, r):
        return self.partial(t, r)


# ---------------------------------------------------------------- functional API
def a0(field: PotentialField, r):
    return field.a0(r)


def a(field: PotentialField, t, r) -> QuadResult:
    return field.evaluate(t, r)


def a_partial(field: PotentialField, t, r, dt_order: int = 0, dr_order: int = 0) -> QuadResult:
    return field.evaluate(t, r, dt_order, dr_order)


def wave_residual(field: PotentialField, t, r) -> QuadResult:
    """d2a/dt2 - c^2 (d2a/dr2 + (1/r) da/dr) with a propagated error bound."""
    r = _check_r(r)
    tt = field.evaluate(t, r, 2, 0)
    rr = field.evaluate(t, r, 0, 2)
    r1 = field.evaluate(t, r, 0, 1)
    c2 = field.c**2
    value = tt.value - c2 * (rr.value + r1.value / r)
    error = tt.error + c2 * (rr.error + r1.error / r)
    return QuadResult(value, error)


def static_wave_residual(field: PotentialField, r):
    """Laplacian of a0 off the wire; zero in exact arithmetic."""
    r = _check_r(r)
    g = field.profile.I0 / r
    return -g / r + g / r
