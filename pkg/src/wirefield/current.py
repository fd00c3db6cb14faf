"""Wire current J(t) = (I0 + k I(t)) z-hat with a T-periodic, zero-mean I.

Profiles are stored as finite Fourier series without a constant term, so the
zero-mean condition holds exactly and every derivative and primitive is
available in closed form. Primitives of any order are the zero-mean ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import InvalidProfileError, UnsupportedOrderError

__all__ = [
    "CurrentProfile",
    "FunctionProfile",
    "ValidationReport",
    "sinusoid",
    "fourier",
    "smoothed_square",
    "eval_current",
    "eval_primitive",
    "validate",
    "profile_from_config",
]

DEFAULT_VALIDATION_TOL = 1e-10


@dataclass(frozen=True)
class CurrentProfile:
    """Fourier-series current profile.

    ``I(t) = sum_n cos_coeffs[n-1] cos(n w t) + sin_coeffs[n-1] sin(n w t)``
    with ``w = 2 pi / T``.

    Parameters
    ----------
    T : float
        Period, must be positive.
    I0 : float
        Constant part of the current, must be nonzero.
    k : float
        Perturbation amplitude multiplying ``I``.
    cos_coeffs, sin_coeffs : sequence of float
        Harmonic coefficients for n = 1, 2, ...; the constant term is absent
        by construction.
    smoothness : int
        Highest derivative order exposed through :func:`eval_current`.
    """

    T: float
    I0: float
    k: float = 0.0
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()
    smoothness: int = 4
    name: str = field(default="fourier", compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise InvalidProfileError(f"period must be positive, got T={self.T}")
        if self.I0 == 0 or not np.isfinite(self.I0):
            raise InvalidProfileError("the base current I0 must be nonzero")
        cos_c = tuple(float(c) for c in self.cos_coeffs)
        sin_c = tuple(float(c) for c in self.sin_coeffs)
        n = max(len(cos_c), len(sin_c))
        cos_c += (0.0,) * (n - len(cos_c))
        sin_c += (0.0,) * (n - len(sin_c))
        object.__setattr__(self, "cos_coeffs", cos_c)
        object.__setattr__(self, "sin_coeffs", sin_c)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "I0", float(self.I0))
        object.__setattr__(self, "k", float(self.k))

    @property
    def omega(self) -> float:
        return 2.0 * math.pi / self.T

    @property
    def n_harmonics(self) -> int:
        return len(self.cos_coeffs)

    @property
    def is_zero(self) -> bool:
        return not any(self.cos_coeffs) and not any(self.sin_coeffs)

    def _active(self):
        n = np.arange(1, self.n_harmonics + 1)
        a = np.asarray(self.cos_coeffs)
        b = np.asarray(self.sin_coeffs)
        keep = (a != 0) | (b != 0)
        return n[keep], a[keep], b[keep]

    @property
    def frequencies(self) -> np.ndarray:
        """Angular frequencies of the nonzero harmonics."""
        n, _, _ = self._active()
        return n * self.omega

    def with_k(self, k: float) -> "CurrentProfile":
        return replace(self, k=float(k))

    def signal(self, t, order: int = 0):
        """Derivative (order > 0) or zero-mean primitive (order < 0) of I.

        No smoothness check is applied; the potential module needs
        primitives of high order.
        """
        t = np.asarray(t, dtype=float)
        n, a, b = self._active()
        if n.size == 0:
            return np.zeros_like(t)
        w = n * self.omega
        phase = order * (math.pi / 2.0)
        scale = w ** float(order)
        arg = np.multiply.outer(t, w) + phase
        out = np.cos(arg) @ (a * scale) + np.sin(arg) @ (b * scale)
        return out

    def sup_bound(self, order: int = 0) -> float:
        """Upper bound of ``sup |signal(., order)|`` from the coefficients."""
        n, a, b = self._active()
        if n.size == 0:
            return 0.0
        w = n * self.omega
        return float(np.sum(np.hypot(a, b) * w ** float(order)))

    def __call__(self, t):
        return self.signal(t, 0)


class FunctionProfile:
    """Profile given by callables for I and its derivatives.

    Only used for validation of arbitrary user functions; the potential
    evaluator requires a :class:`CurrentProfile`.
    """

    def __init__(self, T: float, I0: float, funcs: Sequence[Callable], k: float = 0.0):
        if not (np.isfinite(T) and T > 0):
            raise InvalidProfileError(f"period must be positive, got T={T}")
        if I0 == 0:
            raise InvalidProfileError("the base current I0 must be nonzero")
        if not funcs:
            raise InvalidProfileError("at least I itself must be supplied")
        self.T = float(T)
        self.I0 = float(I0)
        self.k = float(k)
        self.funcs = tuple(funcs)
        self.smoothness = len(self.funcs) - 1
        self._mean = None

    def signal(self, t, order: int = 0):
        t = np.asarray(t, dtype=float)
        if order >= 0:
            return np.vectorize(self.funcs[order], otypes=[float])(t)
        if order != -1:
            raise UnsupportedOrderError("function profiles only provide the first primitive")
        return np.vectorize(self._primitive, otypes=[float])(t)

    def _primitive(self, t: float) -> float:
        f = self.funcs[0]
        if self._mean is None:
            # mean of the primitive P(t) = int_0^t f over one period
            inner = lambda s: integrate.quad(f, 0.0, s, epsabs=1e-13)[0]
            self._mean = integrate.quad(inner, 0.0, self.T, epsabs=1e-12)[0] / self.T
        return integrate.quad(f, 0.0, t, epsabs=1e-13, limit=200)[0] - self._mean

    def __call__(self, t):
        return self.signal(t, 0)


def sinusoid(T: float = 2 * math.pi, I0: float = 1.0, k: float = 0.0,
             amplitude: float = 1.0, harmonic: int = 1) -> CurrentProfile:
    """``I(t) = amplitude * sin(2 pi harmonic t / T)``."""
    if harmonic < 1:
        raise InvalidProfileError("harmonic index must be >= 1")
    sin_c = [0.0] * harmonic
    sin_c[-1] = amplitude
    return CurrentProfile(T, I0, k, (), tuple(sin_c), name="sinusoid")


def fourier(T: float, I0: float, k: float = 0.0, cos_coeffs: Sequence[float] = (),
            sin_coeffs: Sequence[float] = ()) -> CurrentProfile:
    return CurrentProfile(T, I0, k, tuple(cos_coeffs), tuple(sin_coeffs), name="fourier")


def smoothed_square(T: float, I0: float = 1.0, k: float = 0.0, n_harmonics: int = 15,
                    amplitude: float = 1.0) -> CurrentProfile:
    """Square wave with Lanczos-sigma^5 damped odd harmonics.

    The damping makes the coefficients fall off like n**-6 near the cutoff,
    so the truncated series stays close to a C^4 profile without Gibbs
    overshoot.
    """
    if n_harmonics < 1:
        raise InvalidProfileError("need at least one harmonic")
    sin_c = []
    m = n_harmonics + 1
    for n in range(1, n_harmonics + 1):
        if n % 2 == 0:
            sin_c.append(0.0)
            continue
        sigma = math.sin(math.pi * n / m) / (math.pi * n / m)
        sin_c.append(amplitude * 4.0 / (math.pi * n) * sigma**5)
    return CurrentProfile(T, I0, k, (), tuple(sin_c), name="smoothed_square")


def eval_current(profile, t, order: int = 0):
    """n-th derivative of I at t (order 0..smoothness)."""
    if not 0 <= order <= profile.smoothness:
        raise UnsupportedOrderError(
            f"order {order} outside the available range 0..{profile.smoothness}")
    return profile.signal(t, order)


def eval_primitive(profile, t):
    """Zero-mean antiderivative of I."""
    return profile.signal(t, -1)


@dataclass(frozen=True)
class ValidationReport:
    periodicity_defect: float
    mean: float
    primitive_periodicity_defect: float
    tol: float

    @property
    def passed(self) -> bool:
        return (self.periodicity_defect <= self.tol and abs(self.mean) <= self.tol
                and self.primitive_periodicity_defect <= max(self.tol, 1e-8))

    def as_dict(self) -> dict:
        return {
            "periodicity_defect": self.periodicity_defect,
            "mean": self.mean,
            "primitive_periodicity_defect": self.primitive_periodicity_defect,
            "tol": self.tol,
            "passed": self.passed,
        }


def validate(profile, tol: float = DEFAULT_VALIDATION_TOL, n_samples: int = 256) -> ValidationReport:
    """Check periodicity and zero mean of I on a uniform grid.

    The mean uses the composite trapezoid rule over one period, which is
    exact for trigonometric polynomials of degree below ``n_samples``.
    """
    T = getattr(profile, "T", None)
    if T is None or not T > 0:
        raise InvalidProfileError("period must be positive")
    if getattr(profile, "I0", 0.0) == 0:
        raise InvalidProfileError("the base current I0 must be nonzero")
    n_samples = max(n_samples, 4 * getattr(profile, "n_harmonics", 0) + 8)
    t = np.linspace(0.0, T, n_samples, endpoint=False)
    v = profile.signal(t, 0)
    v_shift = profile.signal(t + T, 0)
    defect = float(np.max(np.abs(v_shift - v)))
    if isinstance(profile, CurrentProfile):
        mean = float(np.mean(v))
    else:
        mean = integrate.quad(lambda s: float(profile.signal(s, 0)), 0.0, T,
                              epsabs=1e-14, limit=400)[0] / T
    t_coarse = t[:: max(1, n_samples // 16)]
    p_defect = float(np.max(np.abs(profile.signal(t_coarse + T, -1) - profile.signal(t_coarse, -1))))
    return ValidationReport(defect, mean, p_defect, tol)


def profile_from_config(cfg: dict) -> CurrentProfile:
    """Build a profile from a JSON-style mapping.

    Supported ``type`` values: ``fourier`` (``cos_coeffs``, ``sin_coeffs``),
    ``sinusoid`` (``amplitude``, ``harmonic``) and ``smoothed_square``
    (``n_harmonics``, ``amplitude``). A constant term is rejected.
    """
    cfg = dict(cfg)
    kind = cfg.pop("type", "fourier")
    for key in ("constant", "a0", "mean"):
        if cfg.get(key):
            raise InvalidProfileError("profiles must not carry a constant term")
        cfg.pop(key, None)
    try:
        T = float(cfg.pop("T"))
        I0 = float(cfg.pop("I0"))
    except KeyError as exc:
        raise InvalidProfileError(f"profile config is missing {exc}") from None
    k = float(cfg.pop("k", 0.0))
    if kind == "fourier":
        return fourier(T, I0, k, cfg.pop("cos_coeffs", ()), cfg.pop("sin_coeffs", ()))
    if kind == "sinusoid":
        return sinusoid(T, I0, k, float(cfg.pop("amplitude", 1.0)), int(cfg.pop("harmonic", 1)))
    if kind == "smoothed_square":
        return smoothed_square(T, I0, k, int(cfg.pop("n_harmonics", 15)),
                               float(cfg.pop("amplitude", 1.0)))
    raise InvalidProfileError(f"unknown profile type {kind!r}")
