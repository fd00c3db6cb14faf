"""Electric and magnetic fields of the wire (mu0 = 2 pi, Phi = 0).

With A = -(a0 + k a) z-hat the fields are E = E_z z-hat and
B = B_theta theta-hat where

    E_z = k da/dt,     B_theta = I0 / r + k da/dr.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .potential import PotentialField, _check_r

__all__ = ["FieldSample", "field_eval", "field_components", "cylindrical_to_cartesian",
           "divergence_A", "divergence_B_fd"]


@dataclass(frozen=True)
class FieldSample:
    """Fields at one point; vectors in cylindrical components (r, theta, z)."""

    t: float
    r: float
    theta: float
    z: float
    E: tuple[float, float, float]
    B: tuple[float, float, float]

    def cartesian(self):
        """(E_xyz, B_xyz) at the sample's angle."""
        return (cylindrical_to_cartesian(self.E, self.theta),
                cylindrical_to_cartesian(self.B, self.theta))


def field_components(field: PotentialField, t, r, k: float | None = None, source=None):
    """(E_z, B_theta), vectorized. ``source`` may be an interpolant."""
    r = _check_r(r)
    k = field.k if k is None else k
    src = field if source is None else source
    B = field.profile.I0 / r
    if k == 0:
        return np.zeros_like(B) + 0.0 * np.asarray(t, dtype=float), B
    Ez = k * src.partial(t, r, 1, 0)
    B = B + k * src.partial(t, r, 0, 1)
    return Ez, B


def field_eval(field: PotentialField, t: float, r: float, theta: float = 0.0, z: float = 0.0,
               k: float | None = None) -> FieldSample:
    Ez, Bt = field_components(field, t, r, k)
    return FieldSample(float(t), float(r), float(theta), float(z),
                       (0.0, 0.0, float(Ez)), (0.0, float(Bt), 0.0))


def cylindrical_to_cartesian(vec, theta):
    vr, vt, vz = vec
    c, s = np.cos(theta), np.sin(theta)
    return (vr * c - vt * s, vr * s + vt * c, vz)


def divergence_A(field: PotentialField, t, r):
    """Coulomb/Lorenz gauge check: A = A_z(t, r) z-hat has no z dependence."""
    return np.zeros(np.broadcast(np.asarray(t), np.asarray(r)).shape)


def divergence_B_fd(field: PotentialField, t: float, x: float, y: float, h: float = 1e-4,
                    k: float | None = None) -> float:
    """Central-difference divergence of the Cartesian B field at (x, y, 0)."""

    def bxy(px, py):
        r = np.hypot(px, py)
        _, bt = field_components(field, t, r, k)
        return -bt * py / r, bt * px / r

    bx_p, _ = bxy(x + h, y)
    bx_m, _ = bxy(x - h, y)
    _, by_p = bxy(x, y + h)
    _, by_m = bxy(x, y - h)
    return float((bx_p - bx_m) / (2 * h) + (by_p - by_m) / (2 * h))
