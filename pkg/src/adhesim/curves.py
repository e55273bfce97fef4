"""Length, bending and boundary warp energies of regular planar curves."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import make_interp_spline


class DegenerateCurve(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ParametricCurve:
    t: np.ndarray
    points: np.ndarray  # (n, 2)
    d1: np.ndarray
    d2: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        arrays = [np.asarray(a, dtype=float) for a in (self.points, self.d1, self.d2)]
        for arr in arrays:
            if arr.shape != (t.size, 2):
                raise ValueError("points/derivatives must have shape (len(t), 2)")
        if t.size < 3 or np.any(np.diff(t) <= 0):
            raise ValueError("t must be strictly increasing with at least 3 samples")
        if not (np.isclose(t[0], 0.0) and np.isclose(t[-1], 1.0)):
            raise ValueError("t must cover [0, 1]")
        speed = np.hypot(arrays[1][:, 0], arrays[1][:, 1])
        if np.any(speed <= 0):
            raise DegenerateCurve("curve is not regular (|gamma'| vanishes)")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "points", arrays[0])
        object.__setattr__(self, "d1", arrays[1])
        object.__setattr__(self, "d2", arrays[2])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "dx", "dy", "ddx", "ddy"])
            for row in np.column_stack([self.t, self.points, self.d1, self.d2]):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "ParametricCurve":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1:3], data[:, 3:5], data[:, 5:7])


@dataclass(frozen=True)
class CurveEnergies:
    L: float
    B: float
    theta0: float
    theta1: float
    W: float

    def as_tuple(self):
        return (self.L, self.B, self.theta0, self.theta1, self.W)


def _angle_between(u, v) -> float:
    c = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def warp_energy(theta0, theta1) -> float:
    return float(4 * (2 * np.sqrt(2) - np.sqrt(1 + np.cos(theta0)) - np.sqrt(1 + np.cos(theta1))))


def _integrate(y, t) -> float:
    s1 = simpson(y, x=t)
    dt = np.diff(t)
    if (t.size - 1) % 4 == 0 and np.ptp(dt) <= 1e-9 * dt[0]:
        s2 = simpson(y[::2], x=t[::2])
        return float((16 * s1 - s2) / 15)
    return float(s1)


def curve_energies(curve: ParametricCurve) -> CurveEnergies:
    """L, B, warp angles and W, integrated in t with Boole's rule (one Richardson
    step on Simpson) on uniform samples, plain Simpson otherwise."""
    chord = curve.points[-1] - curve.points[0]
    if np.linalg.norm(chord) <= 1e-14 * max(1.0, np.abs(curve.points).max()):
        raise DegenerateCurve("endpoints coincide; chord undefined")
    d1, d2 = curve.d1, curve.d2
    speed = np.hypot(d1[:, 0], d1[:, 1])
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    kappa = np.abs(cross) / speed**3
    L = _integrate(speed, curve.t)
    B = _integrate(kappa**2 * speed, curve.t)
    theta0 = _angle_between(d1[0], chord)
    theta1 = _angle_between(d1[-1], chord)
    return CurveEnergies(L, B, theta0, theta1, warp_energy(theta0, theta1))


def _rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def rigid_transform(curve: ParametricCurve, rotation: float = 0.0,
                    translation=(0.0, 0.0), reflect: bool = False) -> ParametricCurve:
    """Reflect across the x-axis (optional), rotate, then translate."""
    m = _rotation(rotation)
    if reflect:
        m = m @ np.diag([1.0, -1.0])
    shift = np.asarray(translation, dtype=float)
    return ParametricCurve(curve.t, curve.points @ m.T + shift, curve.d1 @ m.T, curve.d2 @ m.T)


# ---------------------------------------------------------------------------
# curves given by callables, for exact reparameterization


@dataclass(frozen=True)
class SmoothCurve:
    """gamma and its first two derivatives as vectorised callables on [0, 1]."""

    f: Callable
    df: Callable
    ddf: Callable

    def sample(self, n: int = 4001, t=None) -> ParametricCurve:
        t = np.linspace(0.0, 1.0, n) if t is None else np.asarray(t, dtype=float)
        return ParametricCurve(t, self.f(t), self.df(t), self.ddf(t))

    def reparameterize(self, phi, dphi, ddphi) -> "SmoothCurve":
        """gamma o phi, with phi a C^2 increasing bijection of [0, 1]."""
        f, df, ddf = self.f, self.df, self.ddf
        return SmoothCurve(
            lambda t: f(phi(t)),
            lambda t: df(phi(t)) * dphi(t)[:, None],
            lambda t: ddf(phi(t)) * dphi(t)[:, None] ** 2 + df(phi(t)) * ddphi(t)[:, None],
        )


def circular_arc(radius: float = 1.0, half_angle: float = np.pi / 3) -> SmoothCurve:
    """Arc over a horizontal chord, bulging upwards, traversed left to right."""
    a0 = np.pi / 2 + half_angle
    span = -2 * half_angle

    def f(t):
        a = a0 + span * t
        return radius * np.column_stack([np.cos(a), np.sin(a)])

    def df(t):
        a = a0 + span * t
        return radius * span * np.column_stack([-np.sin(a), np.cos(a)])

    def ddf(t):
        a = a0 + span * t
        return -radius * span**2 * np.column_stack([np.cos(a), np.sin(a)])

    return SmoothCurve(f, df, ddf)


def segment(p0=(0.0, 0.0), p1=(1.0, 0.0)) -> SmoothCurve:
    p0 = np.asarray(p0, dtype=float)
    d = np.asarray(p1, dtype=float) - p0
    return SmoothCurve(
        lambda t: p0 + np.outer(t, d),
        lambda t: np.tile(d, (np.size(t), 1)),
        lambda t: np.zeros((np.size(t), 2)),
    )


def spline_curve(control_points, degree: int = 3) -> SmoothCurve:
    """Interpolating spline through control points at uniform parameters."""
    pts = np.asarray(control_points, dtype=float)
    knots_t = np.linspace(0.0, 1.0, len(pts))
    spl = make_interp_spline(knots_t, pts, k=degree)
    d1, d2 = spl.derivative(1), spl.derivative(2)
    return SmoothCurve(lambda t: spl(t), lambda t: d1(t), lambda t: d2(t))


def random_spline_curve(rng: np.random.Generator, k_range=(4, 10), degree: int = 3,
                        max_warp: float | None = np.pi / 2, n_check: int = 2001,
                        min_speed_ratio: float = 1e-3,
                        max_tries: int = 1000) -> SmoothCurve:
    """Spline through k random control points, rejection-sampled for
    regularity and (optionally) warp angles strictly below max_warp."""
    for _ in range(max_tries):
        k = int(rng.integers(k_range[0], k_range[1] + 1))
        k = max(k, degree + 1)
        # march roughly left to right so that curves stay tame
        x = np.sort(rng.uniform(0, 1, k))
        x[0], x[-1] = 0.0, 1.0
        y = rng.normal(0, 0.3, k)
        curve = spline_curve(np.column_stack([x, y]), degree)
        t = np.linspace(0, 1, n_check)
        d1 = curve.df(t)
        speed = np.hypot(d1[:, 0], d1[:, 1])
        if speed.min() < min_speed_ratio * speed.max():
            continue
        if max_warp is not None:
            chord = curve.f(np.array([1.0]))[0] - curve.f(np.array([0.0]))[0]
            if _angle_between(d1[0], chord) >= max_warp - 1e-3:
                continue
            if _angle_between(d1[-1], chord) >= max_warp - 1e-3:
                continue
        return curve
    raise RuntimeError("could not sample an admissible random curve")


def random_regular_curve(rng: np.random.Generator, k_range=(6, 10), degree: int = 5,
                         min_speed_ratio: float = 0.1, max_curvature: float = 30.0,
                         n_check: int = 2001,
                         max_tries: int = 1000) -> SmoothCurve:
    """Well-conditioned random spline: spread-out abscissae, moderate heights and
    speed bounded away from zero and bounded curvature, so quadrature errors
    stay far below 1e-8."""
    t = np.linspace(0, 1, n_check)
    for _ in range(max_tries):
        k = int(rng.integers(k_range[0], k_range[1] + 1))
        k = max(k, degree + 1)
        x = np.concatenate([[0.0], np.cumsum(rng.uniform(0.5, 1.5, k - 1))])
        x /= x[-1]
        y = rng.normal(0, 0.15, k)
        curve = spline_curve(np.column_stack([x, y]), degree)
        d1 = curve.df(t)
        speed = np.hypot(d1[:, 0], d1[:, 1])
        if speed.min() < min_speed_ratio * speed.max():
            continue
        d2 = curve.ddf(t)
        kappa = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed**3
        if kappa.max() <= max_curvature:
            return curve
    raise RuntimeError("could not sample a well-conditioned random curve")


@dataclass(frozen=True)
class InvarianceReport:
    cases: int
    n_samples: int
    max_rigid_error: float
    max_reparam_error: float
    worst_case: int
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.max_rigid_error, self.max_reparam_error) <= self.tol


def _rel_error(a: CurveEnergies, b: CurveEnergies) -> float:
    x, y = np.array(a.as_tuple()), np.array(b.as_tuple())
    return float(np.max(np.abs(x - y) / np.maximum(1.0, np.abs(x))))


def invariance_suite(seed: int = 0, cases: int = 200, n_samples: int = 8001,
                     tol: float = 1e-8) -> InvarianceReport:
    """Compare curve_energies of random curves against a random rigid motion and
    a random monotone reparameterization of the same curve."""
    rng = np.random.default_rng(seed)
    worst_rigid = worst_rep = 0.0
    worst_case, worst = -1, -1.0
    for i in range(cases):
        smooth = random_regular_curve(rng)
        base = smooth.sample(n_samples)
        e0 = curve_energies(base)
        moved = rigid_transform(base, rng.uniform(-np.pi, np.pi), rng.uniform(-10, 10, 2),
                                bool(rng.integers(2)))
        r1 = _rel_error(e0, curve_energies(moved))
        rep = smooth.reparameterize(*random_reparameterization(rng)).sample(n_samples)
        r2 = _rel_error(e0, curve_energies(rep))
        worst_rigid, worst_rep = max(worst_rigid, r1), max(worst_rep, r2)
        if max(r1, r2) > worst:
            worst, worst_case = max(r1, r2), i
    return InvarianceReport(cases, n_samples, worst_rigid, worst_rep, worst_case, tol)


def random_reparameterization(rng: np.random.Generator):
    """Random C^infinity increasing bijection of [0, 1] with phi' > 0.

    phi(t) = t + sum_k c_k sin(k pi t) / (k pi), with sum |c_k| < 1.
    """
    m = int(rng.integers(1, 4))
    c = rng.uniform(-1, 1, m)
    c *= rng.uniform(0.2, 0.9) / np.sum(np.abs(c))
    k = np.arange(1, m + 1) * np.pi

    def phi(t):
        t = np.asarray(t, dtype=float)
        return t + np.sin(np.outer(t, k)) @ (c / k)

    def dphi(t):
        t = np.asarray(t, dtype=float)
        return 1 + np.cos(np.outer(t, k)) @ c

    def ddphi(t):
        t = np.asarray(t, dtype=float)
        return -np.sin(np.outer(t, k)) @ (c * k)

    return phi, dphi, ddphi
