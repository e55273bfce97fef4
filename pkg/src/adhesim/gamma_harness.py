"""Numerical evidence for the eps -> 0 limit.

check_mm_inequality measures the margin in
eps B + (L - L_chord)/eps >= W for a single curve; run_sweep solves E_0,
builds recovery profiles, minimizes E_eps from several seeds for a list of
eps and fits E_eps_min ~ e0_min + slope * eps.
"""

from __future__ import annotations

import csv
import io
import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .curves import ParametricCurve, curve_energies, random_reparameterization, random_spline_curve
from .e0_solver import enumerate_e0_minimizers
from .energy import GridProfile, eval_F, eval_Feps
from .eps_solver import SolveOptions, minimize_eps
from .layers import RecoveryError, RecoveryOptions, build_recovery
from .scene import Scene


# ---------------------------------------------------------------------------
# the lower-bound inequality for single curves


def check_mm_inequality(curve: ParametricCurve, eps: float) -> float:
    """eps B + (L - chord)/eps - W; rejects warp angles >= pi/2."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    en = curve_energies(curve)
    if en.theta0 >= np.pi / 2 or en.theta1 >= np.pi / 2:
        raise ValueError(
            f"warp angles ({en.theta0:.6g}, {en.theta1:.6g}) must be below pi/2"
        )
    chord = float(np.linalg.norm(curve.points[-1] - curve.points[0]))
    return eps * en.B + (en.L - chord) / eps - en.W


@dataclass
class MMSuiteResult:
    seed: int
    trials: int
    evaluations: int
    min_margin: float
    worst: dict

    @property
    def passed(self) -> bool:
        return self.min_margin >= -1e-9

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def run_mm_suite(seed: int = 0, trials: int = 1000, eps_per_curve: int = 5,
                 eps_range=(1e-3, 10.0), n_samples: int = 2001,
                 reparameterize: bool = False) -> MMSuiteResult:
    """Random spline curves with warp angles below pi/2, eps log-uniform."""
    rng = np.random.default_rng(seed)
    lo, hi = np.log(eps_range[0]), np.log(eps_range[1])
    worst = {"margin": np.inf}
    count = 0
    for k in range(trials):
        smooth = random_spline_curve(rng)
        if reparameterize:
            smooth = smooth.reparameterize(*random_reparameterization(rng))
        curve = smooth.sample(n_samples)
        for eps in np.exp(rng.uniform(lo, hi, eps_per_curve)):
            m = check_mm_inequality(curve, float(eps))
            count += 1
            if m < worst["margin"]:
                worst = {"margin": float(m), "trial": k, "eps": float(eps)}
    return MMSuiteResult(seed, trials, count, float(worst["margin"]), worst)


# ---------------------------------------------------------------------------
# affine fit of the expansion


def fit_expansion(data, energies=None, n_points: int = 3) -> dict:
    """Least-squares E = intercept + slope * eps over the n smallest eps.

    data is a GammaReport, or the eps values with energies given separately.
    """
    if isinstance(data, GammaReport):
        energies = [r.E_eps_min if r.E_eps_min is not None else np.nan for r in data.per_eps]
        data = data.eps_values
    eps_values = np.asarray(data, dtype=float)
    energies = np.asarray(energies, dtype=float)
    ok = np.isfinite(energies)
    eps_values, energies = eps_values[ok], energies[ok]
    if eps_values.size < 3 or n_points < 3:
        raise ValueError("the expansion fit needs at least 3 points")
    order = np.argsort(eps_values)[:n_points]
    x, y = eps_values[order], energies[order]
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    return {"intercept": float(intercept), "slope": float(slope),
            "max_residual": float(np.max(np.abs(resid))),
            "eps_used": [float(v) for v in x]}


def loglog_slope(eps_values, errors) -> float:
    """Slope of log|error| against log eps."""
    x = np.log(np.asarray(eps_values, dtype=float))
    y = np.log(np.abs(np.asarray(errors, dtype=float)))
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# recovery convergence


@dataclass
class RecoveryPoint:
    eps: float
    F_eps: Optional[float]
    error: Optional[float]
    message: str = ""


def recovery_study(scene: Scene, pm, eps_values, F_value: float,
                   opts: RecoveryOptions = RecoveryOptions()) -> list:
    """F_eps of the recovery profile for each eps; failures are recorded."""
    out = []
    for eps in eps_values:
        try:
            u = build_recovery(scene, pm, float(eps), opts=opts)
            fe = eval_Feps(scene, u, float(eps), pm.energy)
            out.append(RecoveryPoint(float(eps), float(fe), float(fe - F_value)))
        except RecoveryError as exc:
            out.append(RecoveryPoint(float(eps), None, None, str(exc)))
    return out


# ---------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SweepOptions:
    grid_size: int = 800  # E_0 dynamic program
    gap: float = 1e-6  # energy window for enumerating E_0 minimizers
    h: float = 2.5e-5  # spacing of the E_eps grid
    min_resolution: float = 10.0  # h <= eps / min_resolution is enforced
    seeds: tuple = ("recovery", "tent", "adhered")
    solve: SolveOptions = SolveOptions()
    recovery: RecoveryOptions = RecoveryOptions()
    workers: Optional[int] = None


@dataclass
class EpsRecord:
    eps: float
    n_nodes: int
    E_eps_min: Optional[float] = None
    F_eps_recovery: Optional[float] = None
    F_eps_best: Optional[float] = None
    expansion_ratio: Optional[float] = None
    best_seed: Optional[str] = None
    seed_energies: dict = field(default_factory=dict)
    distances: list = field(default_factory=list)  # to each enumerated minimizer
    nearest_minimizer: Optional[int] = None
    errors: list = field(default_factory=list)


@dataclass
class GammaReport:
    scene: str
    eps_values: list
    e0_min: float
    F_value: float
    minimizers: list  # summaries of the enumerated E_0 minimizers
    selected: int  # index of the F-minimizing E_0 minimizer
    per_eps: list
    fit: Optional[dict] = None
    profiles: dict = field(default_factory=dict, repr=False)  # eps -> best GridProfile

    def to_dict(self) -> dict:
        return {
            "scene": self.scene,
            "eps_values": self.eps_values,
            "e0_min": self.e0_min,
            "F_value": self.F_value,
            "minimizers": self.minimizers,
            "selected": self.selected,
            "per_eps": [asdict(r) for r in self.per_eps],
            "fit": self.fit,
        }

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "E_eps_min", "F_eps_recovery", "F_eps_best", "expansion_ratio"])
        for r in self.per_eps:
            w.writerow([_fmt(v) for v in (r.eps, r.E_eps_min, r.F_eps_recovery,
                                           r.F_eps_best, r.expansion_ratio)])
        return buf.getvalue()


def _fmt(v):
    return "" if v is None else repr(float(v))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def w11_distance(u: GridProfile, v: GridProfile) -> float:
    """h sum |u - v| + sum |(u - v)_i+1 - (u - v)_i| on a common grid."""
    d = u.us - v.us
    return float(u.h * np.sum(np.abs(d)) + np.sum(np.abs(np.diff(d))))


def adhered_seed(scene: Scene, n: int, ramp: float = 0.05) -> GridProfile:
    """u = psi with linear ramps at elevated Dirichlet ends."""
    xs = scene.grid(n)
    us = scene.psi(xs).copy()
    for side in ("left", "right"):
        g = scene.boundary_height(side)
        if g is None:
            continue
        x0 = scene.a if side == "left" else scene.b
        dist = np.abs(xs - x0)
        line = g + (scene.psi(x0 + (ramp if side == "left" else -ramp)) - g) * dist / ramp
        sel = dist <= ramp
        us[sel] = np.maximum(us[sel], line[sel])
        us[0 if side == "left" else -1] = g
    return GridProfile(xs, us)


def _grid_nodes(scene: Scene, eps: float, opts: SweepOptions) -> int:
    h = min(opts.h, eps / opts.min_resolution)
    return int(np.ceil(scene.length / h)) + 1


def _solve_one(args):
    scene, eps, minimizers, selected, e0_min, opts = args
    n = _grid_nodes(scene, eps, opts)
    rec = EpsRecord(eps=float(eps), n_nodes=n)
    seeds = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k, pm in enumerate(minimizers):
            tag = "" if len(minimizers) == 1 else f"[{k}]"
            if "recovery" in opts.seeds:
                try:
                    u = build_recovery(scene, pm, eps, n=n, opts=opts.recovery)
                    seeds["recovery" + tag] = u
                    if k == selected:
                        rec.F_eps_recovery = float(eval_Feps(scene, u, eps, e0_min,
                                                             opts.solve.bending))
                except RecoveryError as exc:
                    rec.errors.append(f"recovery{tag}: {exc}")
            if "tent" in opts.seeds:
                seeds["tent" + tag] = pm.to_profile(scene, n)
        if "adhered" in opts.seeds:
            seeds["adhered"] = adhered_seed(scene, n)
        best = None
        for name, init in seeds.items():
            try:
                res = minimize_eps(scene, eps, init, opts.solve)
            except (ValueError, RuntimeError) as exc:
                rec.errors.append(f"{name}: {exc}")
                continue
            rec.seed_energies[name] = float(res.energy.total)
            if best is None or res.energy.total < best[1].energy.total:
                best = (name, res)
    if best is None:
        return rec, None
    name, res = best
    rec.best_seed = name
    rec.E_eps_min = float(res.energy.total)
    rec.expansion_ratio = (rec.E_eps_min - e0_min) / eps
    rec.F_eps_best = float(eval_Feps(scene, res.profile, eps, e0_min, opts.solve.bending))
    targets = [pm.to_profile(scene, n) for pm in minimizers]
    rec.distances = [w11_distance(res.profile, t) for t in targets]
    rec.nearest_minimizer = int(np.argmin(rec.distances))
    return rec, res.profile


def worker_count(requested: Optional[int] = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("ADHESIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"ADHESIM_THREADS must be an integer, got {env!r}") from None
    return 1


def run_sweep(scene: Scene, eps_values, opts: SweepOptions = SweepOptions()) -> GammaReport:
    eps_values = [float(e) for e in eps_values]
    if any(e <= 0 for e in eps_values):
        raise ValueError("eps values must be positive")
    if any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise ValueError("eps values must be strictly decreasing")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        minimizers = enumerate_e0_minimizers(scene, opts.grid_size, opts.gap)
    e0_min = min(pm.energy for pm in minimizers)
    F_values = [eval_F(scene, pm) for pm in minimizers]
    selected = int(min(range(len(minimizers)), key=lambda k: (F_values[k], minimizers[k].n_free)))
    summaries = [{"n_free": pm.n_free, "energy": pm.energy, "F": F_values[k],
                  "partition": list(pm.partition)} for k, pm in enumerate(minimizers)]
    jobs = [(scene, e, minimizers, selected, e0_min, opts) for e in eps_values]
    workers = min(worker_count(opts.workers), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_one, jobs))
    else:
        results = [_solve_one(j) for j in jobs]
    per_eps = [r for r, _ in results]
    profiles = {r.eps: p for r, p in results if p is not None}
    report = GammaReport(scene.name, eps_values, e0_min, F_values[selected], summaries,
                         selected, per_eps, profiles=profiles)
    try:
        report.fit = fit_expansion(report)
    except ValueError as exc:
        report.fit = {"error": str(exc)}
    return report
