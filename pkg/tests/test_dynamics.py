import math

import numpy as np
import pytest

from wirefield.current import sinusoid
from wirefield.dynamics import (effective_potential, first_integrals, integrate, radial_rhs,
                                reconstruct_angles)
from wirefield.errors import ValidationError, WireSingularityError
from wirefield.potential import PotentialField

R_RANGE = (0.5, 2.0)


def test_rhs_examples():
    field = PotentialField(sinusoid())
    assert radial_rhs(0.0, 1.0, (1.0, 1.0), field, k=0) == 0.0
    assert radial_rhs(0.0, 1.0, (0.0, 0.0), field, k=0) == 0.0
    assert radial_rhs(0.0, math.e, (0.0, 0.0), field, k=0) == pytest.approx(-1 / math.e)
    with pytest.raises(WireSingularityError):
        radial_rhs(0.0, 0.0, (1.0, 1.0), field)


def test_centrifugal_potential_only():
    field = PotentialField(sinusoid(I0=1e-300))
    assert effective_potential(0.0, 1.0, (1.0, 0.0), field, k=0) == pytest.approx(0.5)


def test_potential_gradient_is_minus_force(sin_field, rng):
    src = sin_field.interpolant(*R_RANGE)
    for t, r in zip(rng.uniform(0, 0.5, 8), rng.uniform(0.6, 1.9, 8)):
        dV = effective_potential(t, r, (1.0, 1.0), sin_field, 1, k=0.1, source=src)
        assert -dV == pytest.approx(radial_rhs(t, r, (1.0, 1.0), sin_field, 0.1, src), abs=1e-9)


def test_potential_derivatives_by_finite_differences(sin_field):
    src = sin_field.interpolant(*R_RANGE)
    t, r, h = 0.13, 1.1, 1e-4
    for n in range(1, 5):
        lo = effective_potential(t, r - h, (1.0, 1.0), sin_field, n - 1, 0.05, src)
        hi = effective_potential(t, r + h, (1.0, 1.0), sin_field, n - 1, 0.05, src)
        exact = effective_potential(t, r, (1.0, 1.0), sin_field, n, 0.05, src)
        assert exact == pytest.approx((hi - lo) / (2 * h), rel=1e-6, abs=1e-6)


def test_static_minimum_at_rbar(sin_field):
    m = (1.0, 1.0)
    assert effective_potential(0, 1.0, m, sin_field, 1, k=0) == pytest.approx(0, abs=1e-15)
    assert effective_potential(0, 1.0, m, sin_field, 2, k=0) == pytest.approx(3.0)


def test_equilibrium_and_linear_frequency(sin_field):
    t = np.linspace(0, 50, 2001)
    eq = integrate("radial", [1.0, 0.0], (0, 50), sin_field, (1.0, 1.0), k=0, t_eval=t)
    assert np.max(np.abs(eq.r - 1.0)) < 1e-12
    tr = integrate("radial", [1.0 + 1e-6, 0.0], (0, 50), sin_field, (1.0, 1.0), k=0, t_eval=t)
    y = tr.r - 1.0
    idx = np.nonzero(np.diff(np.sign(y)))[0]
    tz = t[idx] - y[idx] * (t[idx + 1] - t[idx]) / (y[idx + 1] - y[idx])
    omega = math.pi * (len(tz) - 1) / (tz[-1] - tz[0])
    assert omega == pytest.approx(math.sqrt(3), rel=1e-4)


def test_time_reversal(sin_field):
    fwd = integrate("radial", [1.2, 0.1], (0, 10), sin_field, (1.0, 1.0), k=0, rtol=1e-12, atol=1e-14)
    back = integrate("radial", fwd.y[:, -1], (10, 0), sin_field, (1.0, 1.0), k=0,
                     rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(back.y[:, -1], [1.2, 0.1], atol=1e-9)


def test_helix_at_k0(sin_field):
    t = np.linspace(0, 10, 101)
    tr = integrate("cartesian", [1.0, 0, 0, 0, 1.0, 1.0], (0, 10), sin_field, k=0, t_eval=t)
    np.testing.assert_allclose(tr.r, 1.0, atol=1e-9)
    slope = np.polyfit(t, tr.y[2], 1)[0]
    assert slope == pytest.approx(1.0 + math.log(1.0), abs=1e-9)


def test_cartesian_matches_radial(sin_field):
    k = 0.05
    t = np.linspace(0, 5, 201)
    r0, v0, L, p_z = 1.1, 0.05, 1.0, 1.0
    vz = p_z + math.log(r0) + k * float(sin_field.partial(0.0, r0))
    cart = integrate("cartesian", [r0, 0, 0, v0, L / r0, vz], (0, 5), sin_field, k=k,
                     t_eval=t, rtol=1e-11, atol=1e-13, r_range=R_RANGE)
    rad = integrate("radial", [r0, v0], (0, 5), sin_field, (L, p_z), k=k, t_eval=t,
                    rtol=1e-11, atol=1e-13, r_range=R_RANGE)
    np.testing.assert_allclose(cart.r, rad.r, atol=1e-6)


def test_reconstruction_matches_cylindrical(sin_field):
    k = 0.05
    t = np.linspace(0, 3, 61)
    src = sin_field.interpolant(*R_RANGE)
    cyl = integrate("cylindrical", [1.1, 0.05, 0.0, 0.0], (0, 3), sin_field, (1.0, 1.0), k=k,
                    t_eval=t, rtol=1e-12, atol=1e-14, r_range=R_RANGE)
    rad = integrate("radial", [1.1, 0.05], (0, 3), sin_field, (1.0, 1.0), k=k, rtol=1e-12,
                    atol=1e-14, r_range=R_RANGE, dense_output=True)
    theta, z = reconstruct_angles(t, rad.sol, (1.0, 1.0), sin_field, k, source=src)
    np.testing.assert_allclose(theta, cyl.y[2], atol=1e-7)
    np.testing.assert_allclose(z, cyl.y[3], atol=1e-7)


def test_collision_reported(sin_field):
    # with L = 0 the barrier (ln r)^2 / 2 is finite at r = 1e-8
    tr = integrate("radial", [0.5, -30.0], (0, 5), sin_field, (0.0, 0.0), k=0)
    assert tr.status == "collision" and tr.collision_time > 0


def test_batch_radial(sin_field):
    y0 = np.array([1.0, 1.1, 0.0, 0.0])
    tr = integrate("radial", y0, (0, 1), sin_field, (np.array([1.0, 1.0]), np.array([1.0, 1.0])),
                   k=0.01, r_range=R_RANGE)
    single = integrate("radial", [1.1, 0.0], (0, 1), sin_field, (1.0, 1.0), k=0.01, r_range=R_RANGE)
    assert tr.r[1][-1] == pytest.approx(single.r[-1], abs=1e-8)


def test_first_integrals_need_cartesian(sin_field):
    tr = integrate("radial", [1.0, 0.0], (0, 1), sin_field, (1.0, 1.0), k=0)
    with pytest.raises(ValidationError):
        first_integrals(tr, sin_field)


def test_first_integrals_conserved_at_k0(sin_field):
    tr = integrate("cartesian", [1.0, 0, 0, 0.1, 1.0, 1.0], (0, 20), sin_field, k=0,
                   t_eval=np.linspace(0, 20, 401))
    fi = first_integrals(tr, sin_field, 0)
    for key in ("L", "p_z", "E0"):
        assert np.ptp(fi[key]) / abs(fi[key][0]) < 1e-8


def test_bad_system(sin_field):
    with pytest.raises(ValidationError):
        integrate("polar", [1.0, 0.0], (0, 1), sin_field, (1.0, 1.0))
