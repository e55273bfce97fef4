import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from adhesim.energy import (GridProfile, InadmissibleProfile, bending_integral, curvature_fd,
                            eval_E0, eval_Eeps, eval_F, eval_Feps, young_warp)
from adhesim.e0_solver import ADHERED, CHORD, PiecewiseMinimizer, State
from adhesim.scene import (ConstantAdhesion, FlatObstacle, Scene, SineAdhesion,
                           flat_tent, fully_adhered, sine_ripple)

E0_FLAT = 0.5 + np.sqrt(3) * 0.1
F_HALF = 8 * (np.sqrt(2) - np.sqrt(1.5))


def free_scene(a, b, obstacle=None, alpha=0.5):
    return Scene(a, b, obstacle or FlatObstacle(0.0), ConstantAdhesion(alpha))


def tent(xs, height=0.1):
    return np.maximum(0.0, np.maximum(height - np.sqrt(3) * xs, height - np.sqrt(3) * (1 - xs)))


# ---------------------------------------------------------------------------
# curvature


def test_curvature_linear_is_zero():
    xs = np.linspace(0, 1, 11)
    assert np.allclose(curvature_fd(GridProfile(xs, 0.3 * xs - 2)), 0.0, atol=1e-12)


def test_curvature_circle():
    xs = np.arange(-0.5, 0.5 + 1e-12, 1e-3)
    k = curvature_fd(GridProfile(xs, np.sqrt(1 - xs**2)))
    assert np.max(np.abs(np.abs(k) - 1)) < 1e-4


def test_curvature_parabola_vertex():
    xs = np.arange(-0.5, 0.5 + 1e-12, 1e-3)
    k = curvature_fd(GridProfile(xs, xs**2))
    assert k[np.argmin(np.abs(xs))] == pytest.approx(2.0, abs=1e-6)


def test_curvature_needs_three_nodes():
    with pytest.raises(ValueError):
        curvature_fd(GridProfile(np.array([0.0, 1.0]), np.zeros(2)))


# ---------------------------------------------------------------------------
# E_0


def test_E0_adhered_and_detached_flat():
    scene = free_scene(0.0, 1.0)
    xs = scene.grid(101)
    assert eval_E0(scene, GridProfile(xs, np.zeros_like(xs))) == pytest.approx(0.5, abs=1e-14)
    assert eval_E0(scene, GridProfile(xs, np.full_like(xs, 0.1))) == pytest.approx(1.0, abs=1e-10)


def test_E0_tent():
    scene = flat_tent()
    xs = scene.grid(10001)
    assert eval_E0(scene, GridProfile(xs, tent(xs))) == pytest.approx(E0_FLAT, abs=1e-3)


def test_E0_rejects_inadmissible():
    scene = flat_tent()
    xs = scene.grid(11)
    us = tent(xs)
    us[5] = -1e-6
    with pytest.raises(InadmissibleProfile, match="below obstacle"):
        eval_E0(scene, GridProfile(xs, us))
    us = tent(xs)
    us[0] = 0.2
    with pytest.raises(InadmissibleProfile, match="Dirichlet"):
        eval_E0(scene, GridProfile(xs, us))


def test_E0_adhered_sine_matches_quadrature():
    scene = Scene(0.0, 1.0, sine_ripple().obstacle, SineAdhesion(0.5, 0.2, 3.0))
    xs = scene.grid(257)
    exact, _ = quad(lambda x: scene.alpha(x) * np.sqrt(1 + scene.dpsi(x) ** 2), 0, 1,
                    epsabs=1e-14, limit=200)
    assert eval_E0(scene, GridProfile(xs, scene.psi(xs))) == pytest.approx(exact, abs=1e-11)


def test_E0_refinement_second_order():
    # smooth detached profile: chord lengths converge at O(h^2)
    scene = free_scene(0.0, 1.0, FlatObstacle(-1.0))
    fn = lambda x: 0.2 * np.sin(3 * x)
    exact, _ = quad(lambda x: np.sqrt(1 + (0.6 * np.cos(3 * x)) ** 2), 0, 1, epsabs=1e-14)
    errs = [abs(eval_E0(scene, GridProfile.on_scene(scene, n, fn)) - exact) for n in (51, 101, 201)]
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


# ---------------------------------------------------------------------------
# E_eps


def test_Eeps_linear_profile():
    scene = free_scene(0.0, 1.0, FlatObstacle(-1.0))
    xs = scene.grid(101)
    br = eval_Eeps(scene, GridProfile(xs, 0.5 * xs), 0.1)
    assert br.bending == pytest.approx(0.0, abs=1e-20)
    assert br.total == pytest.approx(np.sqrt(1.25), abs=1e-12)


@pytest.mark.parametrize("scheme", ["angle", "fd"])
def test_Eeps_arc_cap(scheme):
    r = eps = 0.1
    scene = free_scene(-0.5 * r, 0.5 * r, FlatObstacle(0.0))
    xs = scene.grid(1001)
    br = eval_Eeps(scene, GridProfile(xs, np.sqrt(r**2 - xs**2)), eps, scheme)
    arc = 2 * r * np.arcsin(0.5)
    assert eps**2 * br.bending == pytest.approx(arc, rel=1e-4)


@pytest.mark.parametrize("scheme", ["angle", "fd"])
def test_Eeps_adhered_ripple_matches_quadrature(scheme):
    base = sine_ripple()
    scene = Scene(0.0, 1.0, base.obstacle, base.adhesion)
    eps = 0.05
    xs = scene.grid(20001)
    br = eval_Eeps(scene, GridProfile(xs, scene.psi(xs)), eps, scheme)

    def bend(x):
        p, q = scene.dpsi(x), scene.ddpsi(x)
        return q**2 / (1 + p**2) ** 2.5

    B, _ = quad(bend, 0, 1, epsabs=1e-13, limit=400)
    T, _ = quad(lambda x: scene.alpha(x) * np.sqrt(1 + scene.dpsi(x) ** 2), 0, 1,
                epsabs=1e-14, limit=400)
    assert br.bending == pytest.approx(B, rel=1e-6)
    assert br.total - br.bending * eps**2 == pytest.approx(T, abs=1e-12)
    assert br.total == pytest.approx(eps**2 * B + T, rel=1e-6)


def test_angle_scheme_penalizes_one_cell_step():
    # a single steep cell: nodal differences see half the turning
    xs = np.linspace(0, 1, 101)
    us = np.where(xs > 0.5, 0.05, 0.0)
    p = GridProfile(xs, us)
    assert bending_integral(p, "angle") > 2 * bending_integral(p, "fd")


def test_unknown_scheme():
    xs = np.linspace(0, 1, 5)
    with pytest.raises(ValueError, match="scheme"):
        bending_integral(GridProfile(xs, xs), "spline")


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_energy_ordering_and_eps_zero(seed):
    rng = np.random.default_rng(seed)
    scene = sine_ripple()
    xs = scene.grid(int(rng.integers(8, 200)))
    us = scene.psi(xs) + np.maximum(0.0, rng.normal(0, 0.05, xs.size))
    us[0], us[-1] = 0.1, 0.1
    prof = GridProfile(xs, us)
    e0 = eval_E0(scene, prof)
    eps = float(10 ** rng.uniform(-3, 0))
    assert eval_Eeps(scene, prof, eps).total >= e0
    assert e0 >= scene.alpha_min * scene.length - 1e-12
    assert eval_Eeps(scene, prof, 0.0).total == e0


def test_lower_semicontinuity_probe():
    # bumps of vanishing height converge to the adhered profile
    scene = fully_adhered()
    xs = scene.grid(2001)
    limit = eval_E0(scene, GridProfile(xs, np.zeros_like(xs)))
    for k in range(1, 6):
        amp = 10.0**-k
        us = amp * np.maximum(0, np.sin(20 * np.pi * xs))
        us[0] = us[-1] = 0.0
        assert eval_E0(scene, GridProfile(xs, us)) >= limit - 1e-12


def test_coincidence_mask_tolerance():
    scene = flat_tent()
    xs = scene.grid(5)
    us = np.array([0.1, 5e-10, 2e-9, 0.0, 0.1])
    br = eval_Eeps(scene, GridProfile(xs, us), 0.1)
    assert br.coincidence_mask.tolist() == [False, True, False, True, False]


# ---------------------------------------------------------------------------
# F and F_eps


def _tent_pm(alpha):
    xb = 0.1 / np.sqrt(3)
    states = (State(CHORD, 0.1, 0.0), State(ADHERED), State(CHORD, 0.0, 0.1))
    return PiecewiseMinimizer((0.0, xb, 1 - xb, 1.0), states, (np.pi / 3,) * 2, E0_FLAT)


def test_F_values():
    adhered = PiecewiseMinimizer((0.0, 1.0), (State(ADHERED),), (), 0.5)
    assert eval_F(fully_adhered(), adhered) == 0.0
    assert eval_F(flat_tent(), _tent_pm(0.5)) == pytest.approx(1.5157495, abs=1e-6)
    assert eval_F(flat_tent(alpha=0.6), _tent_pm(0.6)) == pytest.approx(1.1944200, abs=1e-6)
    assert young_warp(0.5) * 2 == pytest.approx(F_HALF, abs=1e-15)


def test_Feps_detached_straight():
    scene = flat_tent()
    xs = scene.grid(1001)
    u = GridProfile(xs, np.full_like(xs, 0.1))
    assert eval_Feps(scene, u, 1e-2, E0_FLAT) == pytest.approx(32.679, abs=1e-2)


def test_Feps_zero_on_flat_adhered():
    scene = fully_adhered()
    xs = scene.grid(101)
    assert eval_Feps(scene, GridProfile(xs, np.zeros_like(xs)), 1e-2, 0.5) == 0.0


def test_Feps_rejects_bad_lower_bound():
    scene = fully_adhered()
    xs = scene.grid(101)
    with pytest.raises(ValueError, match="lower bound"):
        eval_Feps(scene, GridProfile(xs, np.zeros_like(xs)), 1e-2, 0.6)


def test_energy_record_fields():
    scene = flat_tent()
    xs = scene.grid(101)
    rec = eval_Eeps(scene, GridProfile(xs, tent(xs)), 0.01).to_record()
    assert set(rec) == {"bending_integral", "tension_adhesion", "total", "epsilon"}
