"""Acceptance gate: one logged PASS/FAIL line per criterion, asserted at its stated tolerance.

Criteria 1, 7 and 11 fail as stated; each has a companion test that checks
the corrected statement.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import j0, y0

from wirefield.continuation import PeriodMap, continue_in_k, newton_shoot
from wirefield.current import sinusoid
from wirefield.dynamics import first_integrals, integrate, radial_rhs
from wirefield.errors import SingularJacobianError
from wirefield.orbit_search import find_subharmonic, stability_probe
from wirefield.potential import PotentialField, wave_residual
from wirefield.triplets import complete_triplet, resonance_check
from wirefield.twist import check_twist, compute_coefficients

pytestmark = pytest.mark.acceptance

R_RANGE = (0.5, 2.0)


def log(criteria_log, n, ok, detail):
    criteria_log.append(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")


def fd_taylor(F, r, h=2e-3):
    """(-F', -F''/2, -F'''/6) from fourth-order central differences."""
    f = [F(r + j * h) for j in range(-3, 4)]
    d1 = (f[1] - 8 * f[2] + 8 * f[4] - f[5]) / (12 * h)
    d2 = (-f[1] + 16 * f[2] - 30 * f[3] + 16 * f[4] - f[5]) / (12 * h * h)
    d3 = (f[0] - 8 * f[1] + 13 * f[2] - 13 * f[4] + 8 * f[5] - f[6]) / (8 * h**3)
    return np.array([-d1, -d2 / 2, -d3 / 6])


def _grid():
    return np.meshgrid(np.linspace(0, 2 * math.pi, 5, endpoint=False),
                       np.linspace(0.5, 5, 5), indexing="ij")


# ---------------------------------------------------------------- 1
def test_c1_bessel_closed_form_as_stated(criteria_log):
    t, r = _grid()
    start = time.perf_counter()
    a = PotentialField(sinusoid(T=2 * math.pi)).a(t, r)
    elapsed = time.perf_counter() - start
    err = float(np.max(np.abs(a - 0.5 * math.pi * (np.sin(t) * y0(r) + np.cos(t) * j0(r)))))
    ok = err <= 1e-6 and elapsed < 10
    log(criteria_log, 1, ok, f"max|a - (pi/2)(sin t Y0 + cos t J0)| = {err:.3e} "
        f"(tol 1e-6), {elapsed:.2f} s; the negated form is the true value")
    assert ok


def test_c1_companion_negated_closed_form():
    t, r = _grid()
    start = time.perf_counter()
    a = PotentialField(sinusoid(T=2 * math.pi)).a(t, r)
    elapsed = time.perf_counter() - start
    expected = -0.5 * math.pi * (np.sin(t) * y0(r) + np.cos(t) * j0(r))
    assert np.max(np.abs(a - expected)) <= 1e-6
    assert elapsed < 10


# ---------------------------------------------------------------- 2
def test_c2_wave_residual(criteria_log, sin_field, rng):
    t = rng.uniform(0, 0.5, 10)
    r = rng.uniform(0.5, 5, 10)
    res = float(np.max(np.abs(wave_residual(sin_field, t, r).value)))
    ok = res <= 1e-4
    log(criteria_log, 2, ok, f"max wave residual = {res:.3e} (tol 1e-4)")
    assert ok


# ---------------------------------------------------------------- 3
def _conservation_run(field, k):
    T_rad = 10 * 2 * math.pi / math.sqrt(3)
    r0, v0, L, p_z = 1.0, 0.1, 1.0, 1.0
    vz = p_z + math.log(r0) + k * float(field.partial(0.0, r0))
    tr = integrate("cartesian", [r0, 0, 0, v0, L / r0, vz], (0, T_rad), field, k=k,
                   t_eval=np.linspace(0, T_rad, 1001), rtol=1e-10, atol=1e-12, r_range=R_RANGE)
    fi = first_integrals(tr, field, k, r_range=R_RANGE)
    return {key: np.ptp(fi[key]) / abs(fi[key][0]) for key in ("L", "p_z", "E0")}, fi


def test_c3_first_integrals(criteria_log, sin_field):
    d0, _ = _conservation_run(sin_field, 0.0)
    d1, fi1 = _conservation_run(sin_field, 0.05)
    e_var = float(np.ptp(fi1["E0"]))
    ok = (max(d0.values()) < 1e-8 and d1["L"] <= 1e-8 and d1["p_z"] <= 1e-8 and e_var >= 1e-3)
    log(criteria_log, 3, ok, f"k=0 drifts L,p_z,E0 = {d0['L']:.1e},{d0['p_z']:.1e},{d0['E0']:.1e}; "
        f"k=0.05 drifts L,p_z = {d1['L']:.1e},{d1['p_z']:.1e}, E0 range {e_var:.2e} (>= 1e-3)")
    assert ok


# ---------------------------------------------------------------- 4
def test_c4_equilibrium_and_frequency(criteria_log, sin_field, std_triplet):
    mom = (std_triplet.L, std_triplet.p_z)
    t = np.linspace(0, 50, 2001)
    eq = integrate("radial", [1.0, 0.0], (0, 50), sin_field, mom, k=0, t_eval=t)
    dev = float(np.max(np.abs(eq.r - 1.0)))
    t = np.linspace(0, 40, 40001)
    pert = integrate("radial", [1.0 + 1e-6, 0.0], (0, 40), sin_field, mom, k=0, t_eval=t,
                     rtol=1e-12, atol=1e-15)
    y = pert.r - 1.0
    idx = np.nonzero(np.sign(y[:-1]) != np.sign(y[1:]))[0]
    zeros = t[idx] - y[idx] * (t[idx + 1] - t[idx]) / (y[idx + 1] - y[idx])
    omega = math.pi / np.mean(np.diff(zeros))
    rel = abs(omega - math.sqrt(std_triplet.Abar)) / math.sqrt(std_triplet.Abar)
    ok = dev <= 1e-8 and rel <= 1e-4
    log(criteria_log, 4, ok, f"max|r - rbar| over 100T = {dev:.1e}; "
        f"omega = {omega:.8f} vs sqrt(3), rel err {rel:.1e}")
    assert ok


# ---------------------------------------------------------------- 5
def test_c5_continuation(criteria_log, std_triplet):
    start = time.perf_counter()
    pm = PeriodMap(std_triplet, PotentialField(sinusoid(T=0.5)))
    br = continue_in_k(pm, [1e-4, 1e-3, 1e-2])
    elapsed = time.perf_counter() - start
    orbs = [o for o in br.orbits if o.k in (1e-4, 1e-3, 1e-2)]
    res = max(o.residual for o in orbs)
    ratios = [o.deviation(1.0) / o.k for o in orbs]
    band = max(ratios) / min(ratios)
    ok = (len(orbs) == 3 and res <= 1e-9 and all(np.all(o.r > 0) for o in orbs)
          and band <= 3 and elapsed < 60)
    log(criteria_log, 5, ok, f"residual max {res:.1e}, dev/k = "
        f"{', '.join(f'{x:.4f}' for x in ratios)} (band {band:.3f}), {elapsed:.1f} s")
    assert ok


# ---------------------------------------------------------------- 6
def test_c6_twist_at_limit(criteria_log, pm, sin_field, std_triplet):
    orb = newton_shoot(pm, [1.0, 0.0], 0.0)
    c = compute_coefficients(orb, sin_field, std_triplet)
    coef_err = max(np.max(np.abs(c.A - 3)), np.max(np.abs(c.B + 6.5)),
                   np.max(np.abs(c.C - 65 / 6)))
    cert = check_twist(c, 0.5)
    m = (cert.margin_i, cert.margin_ii, cert.margin_iii)
    ok = (coef_err <= 1e-9 and cert.certified
          and np.allclose(m, (math.pi**2 - 3, 65 / 6, 130.0), rtol=1e-9))
    log(criteria_log, 6, ok, f"coef err {coef_err:.1e}; margins "
        f"({m[0]:.6f}, {m[1]:.6f}, {m[2]:.6f})")
    assert ok


# ---------------------------------------------------------------- 7
def _oracle_errors(orb, field, triplet, form):
    c = compute_coefficients(orb, field, triplet, form=form)
    src = field.interpolant(*R_RANGE)
    mom = (triplet.L, triplet.p_z)
    err = np.zeros(3)
    for i in range(0, orb.t.size, 4):
        F = lambda r: radial_rhs(orb.t[i], r, mom, field, orb.k, src)
        got = np.array([c.A[i], c.B[i], c.C[i]])
        err = np.maximum(err, np.abs(fd_taylor(F, orb.r[i]) - got))
    return err


def test_c7_displayed_formulas_match_oracle(criteria_log, branch, sin_field, std_triplet):
    err = _oracle_errors(branch.orbits[-1], sin_field, std_triplet, "paper")
    ok = bool(np.all(err <= 1e-5))
    log(criteria_log, 7, ok, f"displayed-formula vs oracle max err (A,B,C) = "
        f"({err[0]:.1e}, {err[1]:.1e}, {err[2]:.1e}) (tol 1e-5)")
    assert ok


def test_c7_companion_taylor_form(branch, sin_field, std_triplet):
    err = _oracle_errors(branch.orbits[-1], sin_field, std_triplet, "taylor")
    assert np.all(err <= 1e-5)


def test_c7_companion_exact_mode(branch, sin_field, std_triplet):
    orb = branch.orbits[-1]
    sub = type(orb)(**{**orb.__dict__, "t": orb.t[::32], "r": orb.r[::32],
                       "rdot": orb.rdot[::32]})
    fast = compute_coefficients(sub, sin_field, std_triplet)
    exact = compute_coefficients(sub, sin_field, std_triplet, exact=True)
    for name in ("A", "B", "C"):
        np.testing.assert_allclose(getattr(exact, name), getattr(fast, name), atol=1e-7)


# ---------------------------------------------------------------- 8
def test_c8_universal_inequality(criteria_log, rng):
    worst = math.inf
    for _ in range(100):
        rbar = rng.uniform(0.1, 10)
        I0 = rng.uniform(0.1, 10) * rng.choice([-1, 1])
        t = complete_triplet(rbar, I0, int(rng.choice([-1, 1])))
        worst = min(worst, (10 * t.Bbar**2 - 9 * t.Cbar * t.Abar) / (t.Bbar**2))
    ok = worst > 0
    log(criteria_log, 8, ok, f"min (10B^2 - 9CA)/B^2 over 100 triplets = {worst:.4f}")
    assert ok


# ---------------------------------------------------------------- 9
def test_c9_resonance_discrepancy(criteria_log, std_triplet, sin_field):
    T = 2 * math.pi / std_triplet.omega0
    rep = resonance_check(std_triplet, T)
    pm = PeriodMap(std_triplet, sin_field, T=T)
    sigma = None
    try:
        newton_shoot(pm, [1.0, 0.0], 0.0)
    except SingularJacobianError as exc:
        sigma = exc.sigma_min
    ok = sigma is not None and sigma <= 1e-6 and rep.paper_literal and not rep.spectral
    log(criteria_log, 9, ok, f"sigma_min = {sigma:.1e}; paper_literal non-resonant = "
        f"{rep.paper_literal}, spectral non-resonant = {rep.spectral}")
    assert ok


# ---------------------------------------------------------------- 10
def test_c10_subharmonic(criteria_log, pm, branch):
    start = time.perf_counter()
    rep = find_subharmonic(pm, 1e-2, 1, 8, orbit=branch.orbits[-1])
    elapsed = time.perf_counter() - start
    o = rep.orbit
    ok = (rep.found and o.residual <= 1e-8 and o.zero_count == 2
          and all(o.minimal_period_check) and elapsed < 120)
    detail = (f"residual {o.residual:.1e}, zeros {o.zero_count}, "
              f"min lT distance {min(o.lT_distances):.2e}" if o else rep.reason)
    log(criteria_log, 10, ok, f"{detail}, {elapsed:.1f} s")
    assert ok


# ---------------------------------------------------------------- 11
@pytest.fixture(scope="module")
def probe_k2(pm, branch):
    return stability_probe(pm, branch.orbits[-1], 1e-3, horizon=1000, n_members=200, seed=0)


@pytest.mark.slow
def test_c11_certified_orbit_is_stable(criteria_log, branch, sin_field, std_triplet, probe_k2):
    cert = check_twist(compute_coefficients(branch.orbits[-1], sin_field, std_triplet), 0.5)
    bounded = probe_k2.max_excursion <= 1e-2 and probe_k2.collisions == 0
    ok = cert.certified and bounded
    log(criteria_log, 11, ok, f"k=1e-2 twist certified = {cert.certified} (margin iii "
        f"{cert.margin_iii:.1f}); probe max excursion {probe_k2.max_excursion:.2e}, "
        f"collisions {probe_k2.collisions}")
    assert ok


@pytest.mark.slow
def test_c11_companion_probe_bound(probe_k2):
    assert probe_k2.max_excursion <= 1e-2
    assert probe_k2.collisions == 0 and probe_k2.escapes == 0


@pytest.mark.slow
def test_c11_companion_certified_at_smaller_k(pm, branch, sin_field, std_triplet):
    orb = next(o for o in branch.orbits if o.k == 1e-3)
    assert check_twist(compute_coefficients(orb, sin_field, std_triplet), 0.5).certified
    probe = stability_probe(pm, orb, 1e-3, horizon=1000, n_members=200, seed=0)
    assert probe.max_excursion <= 1e-2 and probe.collisions == 0
