import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from adhesim.e0_solver import ADHERED, CHORD, PiecewiseMinimizer, State, refine_young, solve_e0_dp
from adhesim.energy import eval_Feps
from adhesim.layers import (RecoveryError, build_recovery, default_slope_floor, eval_f,
                            f_closed_form, layer_energy_numeric, layer_profile, phi_at,
                            truncated_layer_energy)
from adhesim.scene import flat_tent, fully_adhered

F_TARGET = 8 * (np.sqrt(2) - np.sqrt(1.5))


def f_mpmath(y):
    mp.mp.dps = 30
    g = lambda z: 2 * mp.sqrt(mp.sqrt(1 + z**2) - 1) / (1 + z**2) ** mp.mpf(1.25)
    return float(mp.quad(g, [0, y]))


def g_rhs(p):
    w = np.sqrt(1 + p * p)
    return w**2.5 * np.sqrt(w - 1)


# ---------------------------------------------------------------------------
# f


def test_f_zero():
    assert eval_f(0.0) == 0.0


@pytest.mark.parametrize("y, expected", [(np.sqrt(3), 0.7578748), (1.0, 0.4306023)])
def test_f_known_values(y, expected):
    assert eval_f(y) == pytest.approx(f_mpmath(y), abs=1e-12)
    assert eval_f(y) == pytest.approx(expected, abs=1e-7)  # quoted to 7 digits
    assert abs(eval_f(y) - f_closed_form(y)) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=1e-3, max_value=50.0))
def test_f_matches_mpmath(y):
    assert abs(eval_f(y) - f_mpmath(y)) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.0, max_value=100.0), st.floats(min_value=1e-3, max_value=10.0))
def test_f_odd_increasing_bounded(y, dy):
    assert eval_f(-y) == pytest.approx(-eval_f(y), abs=1e-14)
    assert eval_f(y + dy) > eval_f(y)
    assert eval_f(y + dy) < 4 * (np.sqrt(2) - 1)


# ---------------------------------------------------------------------------
# layer profile


def test_layer_matches_ode_integration():
    theta, eps = np.pi / 3, 0.05
    layer = layer_profile(theta, eps, p_min=1e-2)

    def rhs(x, y):
        return [y[1], g_rhs(y[1]) / eps]

    sol = solve_ivp(rhs, (0.0, layer.x_min), [0.0, np.tan(theta)], method="DOP853",
                    rtol=1e-13, atol=1e-15, dense_output=True)
    ref = sol.sol(layer.xs)
    assert np.max(np.abs(layer.us - ref[0])) < 1e-9
    assert np.max(np.abs(layer.slopes - ref[1])) < 1e-8
    assert layer.slopes[0] == pytest.approx(1e-2, rel=1e-10)


@pytest.mark.parametrize("method", ["closed", "quadrature"])
def test_layer_invariants(method):
    layer = layer_profile(np.pi / 3, 1.0, p_min=1e-3, method=method)
    assert layer.us[-1] == 0.0
    assert layer.slopes[-1] == pytest.approx(np.sqrt(3), abs=1e-14)
    assert np.all(layer.us[:-1] < 0)
    assert np.all(layer.slopes > 0)
    assert np.all(layer.second_derivative > 0)
    assert np.all(np.diff(layer.slopes) > 0)
    assert np.max(np.abs(layer.equipartition_residual())) <= 1e-9


def test_quadrature_route_agrees_with_closed_form():
    theta, eps = 0.9, 0.02
    q = layer_profile(theta, eps, p_min=1e-3, method="quadrature", n=401)
    phi = phi_at(q.xs, theta, eps)
    assert np.max(np.abs(np.tan(phi) - q.slopes)) < 1e-10


def test_scaling_identity():
    theta, eps = np.pi / 3, 1e-2
    one = layer_profile(theta, 1.0, p_min=1e-3)
    small = layer_profile(theta, eps, p_min=1e-3)
    assert np.allclose(small.xs, eps * one.xs, atol=1e-14, rtol=0)
    assert np.max(np.abs(small.us - eps * one.us)) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.05, max_value=1.5), st.floats(min_value=1e-4, max_value=2.0),
       st.floats(min_value=1e-4, max_value=0.9))
def test_truncated_energy_identity(theta, eps, frac):
    p_min = frac * np.tan(theta)
    layer = layer_profile(theta, eps, p_min=p_min, n=4001)
    exact = eval_f(np.tan(theta)) - eval_f(p_min)
    assert layer.energy() == pytest.approx(exact, abs=1e-9)
    assert np.max(np.abs(layer.equipartition_residual())) <= 1e-9 * max(1.0, 1.0 / eps)


def test_truncated_energy_numeric_quadrature():
    layer = layer_profile(1.0, 0.1, p_min=0.05, n=20001)
    assert layer_energy_numeric(layer) == pytest.approx(layer.energy(), abs=1e-6)


def test_truncated_energy_small_eps():
    theta, eps = np.pi / 3, 1e-6
    p = default_slope_floor(theta, eps)
    assert truncated_layer_energy(theta, p) == pytest.approx(0.7578748, abs=1e-4)
    assert layer_profile(theta, eps).x_min == pytest.approx(-eps ** (2 / 3), rel=1e-10)


def test_empty_layer_rejected():
    with pytest.raises(ValueError):
        layer_profile(np.pi / 4, 0.1, p_min=1.5)
    with pytest.raises(ValueError):
        layer_profile(np.pi / 2, 0.1)


# ---------------------------------------------------------------------------
# recovery


@pytest.fixture(scope="module")
def flat_pm():
    scene = flat_tent()
    return scene, refine_young(scene, solve_e0_dp(scene, 200))


def test_recovery_admissible_and_c1(flat_pm):
    scene, pm = flat_pm
    eps = 1e-2
    u = build_recovery(scene, pm, eps)
    assert np.all(u.us >= scene.psi(u.xs))
    assert u.us[0] == 0.1 and u.us[-1] == 0.1
    # curvature never exceeds 1/eps, so no kinks: |du'| <= h (1+u'^2)^(3/2) / eps
    slopes = np.diff(u.us) / u.h
    bound = u.h * (1 + np.maximum(slopes[1:], slopes[:-1]) ** 2) ** 1.5 / eps
    assert np.all(np.abs(np.diff(slopes)) <= 1.05 * bound + 1e-9)
    fe = eval_Feps(scene, u, eps, pm.energy)
    assert fe > F_TARGET


def test_recovery_error_is_first_order(flat_pm):
    # measured |F_eps - F| ~ 42 eps on this scene
    scene, pm = flat_pm
    errs = []
    for eps in (1e-2, 1e-3):
        u = build_recovery(scene, pm, eps)
        errs.append(eval_Feps(scene, u, eps, pm.energy) - F_TARGET)
    assert errs[1] < errs[0]
    assert 0.5 < np.log10(errs[0] / errs[1]) < 1.5


def test_recovery_rejects_large_eps(flat_pm):
    scene, pm = flat_pm
    with pytest.raises(RecoveryError, match="not a graph"):
        build_recovery(scene, pm, 0.1)


def test_recovery_fully_adhered():
    scene = fully_adhered()
    pm = PiecewiseMinimizer((0.0, 1.0), (State(ADHERED),), (), 0.5)
    u = build_recovery(scene, pm, 1e-2)
    assert np.all(u.us == 0.0)
    assert eval_Feps(scene, u, 1e-2, 0.5) == 0.0


def test_recovery_two_sided_chord():
    # detached chord with both ends on a curved obstacle
    from adhesim.scene import Boundary, ConstantAdhesion, Scene, SineObstacle

    scene = Scene(0.0, 1.0, SineObstacle(0.05, 4 * np.pi), ConstantAdhesion(0.95),
                  Boundary.dirichlet(0.0), Boundary.dirichlet(0.0))
    pm = refine_young(scene, solve_e0_dp(scene, 400))
    assert any(s.kind == CHORD for s in pm.states)
    u = build_recovery(scene, pm, 1e-3)
    assert np.all(u.us >= scene.psi(u.xs))
