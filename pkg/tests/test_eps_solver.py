import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adhesim.e0_solver import refine_young, solve_e0_dp
from adhesim.energy import GridProfile, eval_Eeps
from adhesim.eps_solver import (BAND, SmoothedEnergy, SolveOptions, minimize_eps,
                                smooth_step, smooth_step_derivs, smoothed_adhesion)
from adhesim.scene import flat_tent, fully_adhered, sine_ripple

E0_FLAT = 0.5 + np.sqrt(3) * 0.1


def test_smoothed_adhesion_examples():
    assert smoothed_adhesion(-0.5, 0.1, 0.3) == 0.3
    assert smoothed_adhesion(0.2, 0.1, 0.3) == 1.0
    assert smoothed_adhesion(0.05, 0.1, 0.5) == pytest.approx(0.75, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=-0.5, max_value=1.5))
def test_smooth_step_derivatives(t):
    s, ds, dds = smooth_step_derivs(t)
    d = 1e-6
    if 1e-5 < t < 1 - 1e-5:
        assert ds == pytest.approx((smooth_step(t + d) - smooth_step(t - d)) / (2 * d), abs=1e-8)
        assert dds == pytest.approx((smooth_step(t + d) - 2 * s + smooth_step(t - d)) / d**2,
                                    abs=1e-3)
    assert 0.0 <= s <= 1.0


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(rho=1.5)
    with pytest.raises(ValueError):
        SolveOptions(eta0_factor=0)
    with pytest.raises(ValueError):
        SolveOptions(method="lbfgs")


def _random_profile(rng, scene, n, eta):
    xs = scene.grid(n)
    psi = scene.psi(xs)
    gap = np.abs(rng.normal(0, 0.03, n)) * (rng.uniform(size=n) < 0.7)
    us = psi + gap
    # keep every node off the kinks of the clamped step at 0 and eta
    y = (us - psi) / eta
    bad = (np.abs(y) < 1e-3) | (np.abs(y - 1) < 1e-3)
    us[bad] += 2e-3 * eta
    return xs, us


@pytest.mark.parametrize("scheme", ["angle", "fd"])
def test_gradient_matches_finite_differences(scheme):
    rng = np.random.default_rng(11)
    scene = sine_ripple()
    for _ in range(10):
        n = int(rng.integers(12, 40))
        eta = float(rng.uniform(0.01, 0.05))
        xs, us = _random_profile(rng, scene, n, eta)
        fn = SmoothedEnergy(scene, xs, float(rng.uniform(0.01, 0.5)), eta, scheme)
        g = fn.gradient(us)
        d = 1e-7
        for i in range(n):
            up, dn = us.copy(), us.copy()
            up[i] += d
            dn[i] -= d
            fd = (fn.value(up) - fn.value(dn)) / (2 * d)
            assert abs(g[i] - fd) <= 1e-6 * max(1.0, abs(fd))


@pytest.mark.parametrize("scheme", ["angle", "fd"])
def test_hessian_matches_finite_differences(scheme):
    rng = np.random.default_rng(5)
    scene = sine_ripple()
    n = 20
    xs, us = _random_profile(rng, scene, n, 0.03)
    fn = SmoothedEnergy(scene, xs, 0.1, 0.03, scheme)
    _, _, ab = fn.value_grad_hess(us)
    dense = np.zeros((n, n))
    for k in range(BAND + 1):
        diag = ab[BAND - k, k:]
        dense[np.arange(n - k), np.arange(k, n)] = diag
        dense[np.arange(k, n), np.arange(n - k)] = diag
    d = 1e-6
    for i in range(n):
        up, dn = us.copy(), us.copy()
        up[i] += d
        dn[i] -= d
        col = (fn.gradient(up) - fn.gradient(dn)) / (2 * d)
        assert np.allclose(dense[:, i], col, rtol=1e-5, atol=1e-4)


def test_adhered_scene_is_fixed_point():
    scene = fully_adhered()
    init = GridProfile.on_scene(scene, 201)
    res = minimize_eps(scene, 1e-2, init)
    assert np.all(res.profile.us == 0.0)
    assert res.energy.total == pytest.approx(0.5, abs=1e-14)


@pytest.fixture(scope="module")
def flat_tent_run():
    scene = flat_tent()
    pm = refine_young(scene, solve_e0_dp(scene, 400))
    init = pm.to_profile(scene, 10001)
    return scene, init, minimize_eps(scene, 1e-3, init)


def test_tent_seed_rounds_corners(flat_tent_run):
    scene, init, res = flat_tent_run
    assert res.energy.total <= res.initial_energy
    assert res.initial_energy == pytest.approx(eval_Eeps(scene, init, 1e-3).total)
    ratio = (res.energy.total - E0_FLAT) / 1e-3
    assert 1.2 <= ratio <= 1.9
    assert np.all(res.profile.us >= scene.psi(res.profile.xs))
    assert res.profile.us[0] == 0.1 and res.profile.us[-1] == 0.1


def test_trace_and_smoothing_bound(flat_tent_run):
    _, _, res = flat_tent_run
    etas = [r["eta"] for r in res.trace]
    assert all(b < a for a, b in zip(etas, etas[1:]))
    for r in res.trace:
        assert r["smoothing_gap"] <= r["smoothing_bound"] + 1e-12


def test_rerun_is_fixed_point(flat_tent_run):
    scene, _, res = flat_tent_run
    again = minimize_eps(scene, 1e-3, res.profile)
    assert again.energy.total <= res.energy.total
    assert res.energy.total - again.energy.total <= 1e-6 * 1e-3


def test_coarse_grid_rejected():
    scene = flat_tent()
    pm = refine_young(scene, solve_e0_dp(scene, 200))
    with pytest.raises(ValueError, match="resolve"):
        minimize_eps(scene, 1e-3, pm.to_profile(scene, 1001))


def test_gradient_descent_option_decreases_energy():
    scene = flat_tent()
    pm = refine_young(scene, solve_e0_dp(scene, 200))
    init = pm.to_profile(scene, 2001)
    res = minimize_eps(scene, 2e-2, init, SolveOptions(method="gd", gd_inner_max=200))
    assert res.energy.total < res.initial_energy
    assert np.all(res.profile.us >= scene.psi(res.profile.xs))
