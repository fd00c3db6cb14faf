import math

import numpy as np
import pytest

from wirefield.continuation import newton_shoot
from wirefield.orbit_search import (count_sign_changes, find_subharmonic, normal_form,
                                    radial_period, rotation_number, stability_probe)


@pytest.fixture(scope="module")
def orbit0(pm):
    return newton_shoot(pm, [1.0, 0.0], 0.0)


def test_normal_form_is_rotation(branch):
    M = branch.orbits[-1].monodromy
    P, theta = normal_form(M)
    R = np.linalg.solve(P, M @ P)
    np.testing.assert_allclose(R, [[math.cos(theta), -math.sin(theta)],
                                   [math.sin(theta), math.cos(theta)]], atol=1e-10)


def test_rotation_number_linear_limit(pm, orbit0):
    rho = rotation_number(pm, orbit0, np.array([1e-6, 1e-4]), n_iter=300)
    expected = math.sqrt(3) * 0.5 / (2 * math.pi)
    assert rho[0] == pytest.approx(expected, abs=1e-6)
    assert rho[0] == pytest.approx(rho[1], abs=1e-5)


def test_rotation_number_continuity_in_k(pm, branch, orbit0):
    o = branch.orbits[-1]
    rho = rotation_number(pm, o, 1e-6, n_iter=300)
    assert rho == pytest.approx(o.rotation_angle / (2 * math.pi), abs=1e-6)
    assert abs(rho - orbit0.rotation_angle / (2 * math.pi)) < 10 * o.k


def test_radial_period_small_amplitude(pm):
    assert radial_period(pm, 1e-5) == pytest.approx(2 * math.pi / math.sqrt(3), rel=1e-8)


def test_sign_change_counter():
    assert count_sign_changes([1, -1, -1, 1]) == 2
    assert count_sign_changes([1, 1e-12, 1, -1]) == 2
    assert count_sign_changes([1, -1e-12, 1, 1]) == 0
    assert count_sign_changes([1, -1, 1], cyclic=False) == 2


def test_half_rotation_is_not_found(pm, branch):
    rep = find_subharmonic(pm, 0.01, 1, 2, orbit=branch.orbits[-1])
    assert not rep.found and "not below" in rep.reason


def test_linear_flow_has_only_the_fixed_point(orbit0):
    # w0 T = sqrt(3)/2 is irrational, so M^q - I is nonsingular for every q
    for q in range(1, 9):
        Mq = np.linalg.matrix_power(orbit0.monodromy, q)
        assert np.linalg.svd(Mq - np.eye(2), compute_uv=False)[-1] > 1e-3


def test_probe_is_deterministic(pm, branch):
    o = branch.orbits[-1]
    a = stability_probe(pm, o, 1e-3, horizon=5, n_members=8, seed=7)
    b = stability_probe(pm, o, 1e-3, horizon=5, n_members=8, seed=7)
    assert a.max_excursion == b.max_excursion
    np.testing.assert_array_equal(a.excursions, b.excursions)


def test_zero_radius_probe(pm, branch):
    probe = stability_probe(pm, branch.orbits[-1], 0.0, horizon=3, n_members=4)
    assert probe.max_excursion < 1e-9


def test_probe_k0_confinement(pm, orbit0):
    probe = stability_probe(pm, orbit0, 1e-3, horizon=200, n_members=40, seed=1)
    assert probe.collisions == 0 and probe.max_excursion <= 1e-2
