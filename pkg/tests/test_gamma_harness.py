import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adhesim.curves import circular_arc, random_spline_curve, rigid_transform, segment
from adhesim.gamma_harness import (GammaReport, SweepOptions, check_mm_inequality, fit_expansion,
                                   loglog_slope, run_mm_suite, run_sweep, w11_distance,
                                   worker_count)
from adhesim.energy import GridProfile
from adhesim.scene import fully_adhered

E0_FLAT = 0.5 + np.sqrt(3) * 0.1
F_FLAT = 8 * (np.sqrt(2) - np.sqrt(1.5))


def test_segment_margin_zero():
    for eps in (1e-3, 0.1, 10.0):
        assert check_mm_inequality(segment().sample(11), eps) == pytest.approx(0, abs=1e-12)


def test_arc_margin_at_optimal_eps():
    arc = circular_arc(1.0, np.pi / 3).sample(10001)
    L, chord, B = 2 * np.pi / 3, np.sqrt(3), 2 * np.pi / 3
    eps = np.sqrt((L - chord) / B)
    assert eps == pytest.approx(0.415942, abs=2e-6)  # quoted value is rounded
    assert check_mm_inequality(arc, eps) == pytest.approx(0.226543, abs=1e-4)
    assert check_mm_inequality(arc, eps) == pytest.approx(2 * np.sqrt(B * (L - chord)) - F_FLAT,
                                                          abs=1e-9)


def test_margin_rejects_large_warp_and_bad_eps():
    wide = circular_arc(1.0, 2.0).sample(2001)
    with pytest.raises(ValueError, match="below pi/2"):
        check_mm_inequality(wide, 0.1)
    with pytest.raises(ValueError):
        check_mm_inequality(segment().sample(11), 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1), st.floats(min_value=-np.pi, max_value=np.pi),
       st.floats(min_value=1e-3, max_value=10.0), st.booleans())
def test_margin_rigid_invariance(seed, rot, eps, reflect):
    curve = random_spline_curve(np.random.default_rng(seed)).sample(2001)
    a = check_mm_inequality(curve, eps)
    b = check_mm_inequality(rigid_transform(curve, rot, (1.5, -2.0), reflect), eps)
    assert b == pytest.approx(a, rel=1e-9, abs=1e-9)


def test_mm_suite_small():
    res = run_mm_suite(seed=3, trials=100)
    assert res.evaluations == 500
    assert res.passed and res.min_margin >= -1e-9
    assert run_mm_suite(seed=3, trials=100).to_dict() == res.to_dict()
    assert run_mm_suite(seed=3, trials=50, reparameterize=True).passed


def test_fit_exact_affine():
    eps = [1e-1, 10**-1.5, 1e-2, 10**-2.5, 1e-3]
    fit = fit_expansion(eps, [E0_FLAT + F_FLAT * e for e in eps])
    assert fit["intercept"] == pytest.approx(E0_FLAT, abs=1e-12)
    assert fit["slope"] == pytest.approx(F_FLAT, abs=1e-12)
    assert fit["eps_used"] == sorted(eps)[:3]


def test_fit_biased_by_higher_order_term():
    def fit_at(scale):
        eps = scale * np.array([1.0, 10**-0.5, 0.1])
        return fit_expansion(eps, 0.6 + 1.5 * eps + eps ** (4 / 3))

    coarse, fine = fit_at(1e-1), fit_at(1e-3)
    assert coarse["slope"] > 1.5 and fine["slope"] > 1.5
    assert fine["slope"] - 1.5 < coarse["slope"] - 1.5
    assert 0 < fine["max_residual"] < coarse["max_residual"]


def test_fit_needs_three_points():
    with pytest.raises(ValueError, match="at least 3"):
        fit_expansion([0.1, 0.01], [1.0, 0.9])


def test_loglog_slope():
    eps = np.array([1e-1, 1e-2, 1e-3])
    assert loglog_slope(eps, 3 * eps ** (1 / 3)) == pytest.approx(1 / 3, abs=1e-12)


def test_w11_distance():
    xs = np.linspace(0, 1, 11)
    u = GridProfile(xs, np.zeros(11))
    v = GridProfile(xs, np.where(xs == 0.5, 1.0, 0.0))
    assert w11_distance(u, v) == pytest.approx(0.1 + 2.0)
    assert w11_distance(u, u) == 0.0


def test_worker_count(monkeypatch):
    monkeypatch.delenv("ADHESIM_THREADS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("ADHESIM_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2
    monkeypatch.setenv("ADHESIM_THREADS", "many")
    with pytest.raises(ValueError, match="ADHESIM_THREADS"):
        worker_count()


@pytest.fixture(scope="module")
def adhered_report():
    return run_sweep(fully_adhered(), [0.1, 0.05, 0.02], SweepOptions(h=1e-3))


def test_adhered_sweep(adhered_report):
    rep = adhered_report
    assert rep.e0_min == pytest.approx(0.5, abs=1e-12)
    assert rep.F_value == 0.0
    for r in rep.per_eps:
        assert r.E_eps_min == pytest.approx(0.5, abs=1e-12)
        assert r.F_eps_best == pytest.approx(0.0, abs=1e-10)
        assert r.F_eps_best <= r.F_eps_recovery + 1e-12
    assert rep.fit["slope"] == pytest.approx(0.0, abs=1e-8)


def test_report_serialization(adhered_report):
    data = json.loads(adhered_report.to_json())
    assert data["eps_values"] == [0.1, 0.05, 0.02]
    assert len(data["per_eps"]) == 3
    rows = list(csv.reader(io.StringIO(adhered_report.to_csv())))
    assert rows[0] == ["eps", "E_eps_min", "F_eps_recovery", "F_eps_best", "expansion_ratio"]
    assert float(rows[1][0]) == 0.1
    assert isinstance(adhered_report, GammaReport)


def test_sweep_rejects_unsorted_eps():
    with pytest.raises(ValueError, match="decreasing"):
        run_sweep(fully_adhered(), [0.01, 0.1])
