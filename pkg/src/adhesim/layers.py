"""Boundary layers and the recovery construction.

The layer U solves U'' = (1/eps) (1+U'^2)^(5/4) sqrt(sqrt(1+U'^2) - 1) with
U(0) = 0, U'(0) = tan(theta), integrated backwards in x.  Writing the slope
as p = tan(phi) and substituting s = ln tan(phi/4), the phase-plane
quadrature x(p) = -eps int_p^tan(theta) dq / g(q) has the closed form

    x(phi) = -(eps/sqrt 2) [2 ln(tan(theta/4)/tan(phi/4)) + 4 (cos(theta/2) - cos(phi/2))]
    U(phi) = -2 sqrt(2) eps (sin(theta/2) - sin(phi/2))
    kappa(phi) = sqrt(1 - cos(phi)) / eps,

with dx/ds = sqrt(2) eps cos(phi).  The same quadrature can be evaluated
numerically (method="quadrature") as an independent route.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad, simpson
from scipy.interpolate import CubicHermiteSpline

from .energy import GridProfile
from .scene import Scene

SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# the odd function f


def _f_integrand(z):
    w = np.sqrt(1.0 + z * z)
    # sqrt(w - 1) written as |z| / sqrt(w + 1) to avoid cancellation near 0
    return 2.0 * abs(z) / np.sqrt(w + 1.0) / (1.0 + z * z) ** 1.25


def eval_f(y: float) -> float:
    """int_0^y 2 sqrt(sqrt(1+z^2) - 1) / (1+z^2)^(5/4) dz by adaptive quadrature."""
    y = float(y)
    if y == 0.0:
        return 0.0
    val, _ = quad(_f_integrand, 0.0, abs(y), epsabs=0.0, epsrel=1e-13, limit=200)
    return float(np.copysign(val, y))


def f_closed_form(y):
    """4 (sqrt 2 - sqrt(1 + cos(arctan y))), extended oddly to y < 0."""
    y = np.asarray(y, dtype=float)
    c = 1.0 / np.sqrt(1.0 + y * y)
    return np.sign(y) * 4.0 * (SQRT2 - np.sqrt(1.0 + c))


# ---------------------------------------------------------------------------
# layer profile


def _x_of_phi(phi, theta, eps):
    return -(eps / SQRT2) * (2.0 * np.log(np.tan(theta / 4) / np.tan(phi / 4))
                             + 4.0 * (np.cos(theta / 2) - np.cos(phi / 2)))


def _u_of_phi(phi, theta, eps):
    return -2.0 * SQRT2 * eps * (np.sin(theta / 2) - np.sin(phi / 2))


def _slope_rhs(p):
    w = np.sqrt(1.0 + p * p)
    return w**2.5 * np.abs(p) / np.sqrt(w + 1.0)


def _x_gap_quadrature(phi_lo, phi_hi, eps):
    """eps int dq / g(q) over q = tan(phi) in [phi_lo, phi_hi]."""

    def integrand(phi):
        q = np.tan(phi)
        return (1.0 + q * q) / _slope_rhs(q)

    val, _ = quad(integrand, phi_lo, phi_hi, epsabs=0.0, epsrel=1e-13, limit=200)
    return eps * val


def phi_at(x, theta: float, eps: float, tol: float = 1e-15) -> np.ndarray:
    """Tangent angle of the layer at abscissae x <= 0 (Newton in s = ln tan(phi/4))."""
    x = np.asarray(x, dtype=float)
    s_theta = np.log(np.tan(theta / 4))
    s = s_theta + x / (SQRT2 * eps)
    for _ in range(100):
        phi = 4.0 * np.arctan(np.exp(s))
        resid = _x_of_phi(phi, theta, eps) - x
        step = resid / (SQRT2 * eps * np.cos(phi))
        s = np.minimum(s - step, s_theta)
        if np.max(np.abs(resid), initial=0.0) <= tol * max(eps, np.max(np.abs(x), initial=0.0)):
            break
    return 4.0 * np.arctan(np.exp(s))


@dataclass(frozen=True, eq=False)
class LayerProfile:
    theta: float
    eps: float
    xs: np.ndarray
    us: np.ndarray
    slopes: np.ndarray
    curvature: np.ndarray
    second_derivative: np.ndarray

    @property
    def x_min(self) -> float:
        return float(self.xs[0])

    @property
    def slope_min(self) -> float:
        return float(self.slopes[0])

    def equipartition_residual(self) -> np.ndarray:
        """eps kappa^2 sqrt(1+p^2) - (1/eps)(sqrt(1+p^2) - 1) at every node."""
        w = np.sqrt(1.0 + self.slopes**2)
        return self.eps * self.curvature**2 * w - (w - 1.0) / self.eps

    def energy(self) -> float:
        """Truncated layer energy f(tan theta) - f(slope at x_min)."""
        return truncated_layer_energy(self.theta, self.slope_min)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "u", "du", "kappa"])
            for row in zip(self.xs, self.us, self.slopes, self.curvature):
                w.writerow([repr(float(v)) for v in row])


def default_slope_floor(theta: float, eps: float) -> float:
    """Slope of U_{theta,eps} at -eps^(2/3), i.e. U'_{theta,1}(-eps^(-1/3))."""
    return float(np.tan(phi_at(np.array([-eps ** (2.0 / 3.0)]), theta, eps)[0]))


def layer_profile(theta: float, eps: float, p_min: Optional[float] = None, n: int = 2001,
                  method: str = "closed") -> LayerProfile:
    """Layer on [x_min, 0] truncated where the slope drops to p_min.

    Nodes are uniform in x.  method="quadrature" instead places nodes
    uniformly in the tangent angle and computes their abscissae by numerical
    phase-plane quadrature, without the closed form.
    """
    if not 0.0 < theta < np.pi / 2:
        raise ValueError("theta must lie in (0, pi/2)")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if p_min is None:
        p_min = default_slope_floor(theta, eps)
    if not 0.0 < p_min < np.tan(theta):
        raise ValueError(f"empty layer: slope floor {p_min} not in (0, tan(theta))")
    phi_min = float(np.arctan(p_min))
    if method == "closed":
        x_min = float(_x_of_phi(phi_min, theta, eps))
        xs = np.linspace(x_min, 0.0, n)
        phi = phi_at(xs, theta, eps)
        phi[0], phi[-1] = phi_min, theta
    elif method == "quadrature":
        # nodes uniform in phi; abscissae accumulated by quadrature from x(theta) = 0
        phi = np.linspace(phi_min, theta, n)
        gaps = np.array([_x_gap_quadrature(lo, hi, eps) for lo, hi in zip(phi[:-1], phi[1:])])
        xs = -np.concatenate([np.cumsum(gaps[::-1])[::-1], [0.0]])
    else:
        raise ValueError(f"unknown method {method!r}")
    p = np.tan(phi)
    us = _u_of_phi(phi, theta, eps)
    us[-1] = 0.0
    kappa = np.sqrt(1.0 - np.cos(phi)) / eps
    upp = _slope_rhs(p) / eps
    return LayerProfile(float(theta), float(eps), xs, us, p, kappa, upp)


def truncated_layer_energy(theta: float, slope_end: float) -> float:
    """f(tan theta) - f(slope_end) in closed form, 4 (sqrt(1+cos phi_end) - sqrt(1+cos theta))."""
    phi_end = np.arctan(slope_end)
    return float(4.0 * (np.sqrt(1.0 + np.cos(phi_end)) - np.sqrt(1.0 + np.cos(theta))))


def layer_energy_numeric(layer: LayerProfile) -> float:
    """eps int kappa^2 sqrt(1+p^2) + (1/eps) int (sqrt(1+p^2) - 1) on the layer
    nodes, by Simpson's rule (for cross-checking the closed form)."""
    w = np.sqrt(1.0 + layer.slopes**2)
    density = layer.eps * layer.curvature**2 * w + (w - 1.0) / layer.eps
    return float(simpson(density, x=layer.xs))


# ---------------------------------------------------------------------------
# recovery construction


class RecoveryError(ValueError):
    pass


def _normal(a):
    return np.array([-np.sin(a), np.cos(a)])


def _arc(center, orient, a0, turn, eps, n):
    """Points and direction angles along a radius-eps arc starting with heading a0."""
    ang = a0 + orient * turn * np.linspace(0.0, 1.0, n)
    pts = center[None, :] - orient * eps * np.column_stack([-np.sin(ang), np.cos(ang)])
    return pts, ang


def _wrap(turn):
    return np.mod(turn, 2 * np.pi)


def _arc_then_line(E, a0, D, eps):
    """Arc of radius eps leaving E with heading a0, then a straight line to D.

    Returns (orient, turn, heading) with the smallest turn.
    """
    best = None
    for orient in (1, -1):
        c = E + orient * eps * _normal(a0)
        r = D - c
        dist = np.hypot(*r)
        if dist <= eps:
            continue
        heading = np.arctan2(r[1], r[0]) + orient * np.arcsin(eps / dist)
        turn = _wrap(orient * (heading - a0))
        if best is None or turn < best[1]:
            best = (orient, turn, heading)
    if best is None:
        raise RecoveryError("endpoint lies inside the bridging circle")
    return best


def _csc(E0, a0, E1, a1, eps):
    """Arc-segment-arc path from (E0, a0) to (E1, a1) with minimal total turning."""
    best = None
    for o1 in (1, -1):
        for o2 in (1, -1):
            c0 = E0 + o1 * eps * _normal(a0)
            c1 = E1 + o2 * eps * _normal(a1)
            d = c1 - c0
            dist = np.hypot(*d)
            k = (o1 - o2) * eps / dist if dist > 0 else np.inf
            if abs(k) > 1:
                continue
            heading = np.arctan2(d[1], d[0]) + np.arcsin(k)
            t0 = _wrap(o1 * (heading - a0))
            t1 = _wrap(o2 * (a1 - heading))
            if best is None or t0 + t1 < best[1] + best[3]:
                best = (o1, t0, o2, t1, heading, c0, c1)
    if best is None:
        raise RecoveryError("layer ends too close for an arc-segment-arc bridge")
    return best


def _layer_points(theta, eps, width, n):
    """Layer V(xi) = U(-xi) for xi in [0, width] as points with headings."""
    xi = np.linspace(0.0, width, n)
    phi = phi_at(-xi, theta, eps)
    phi[0] = theta
    eta = _u_of_phi(phi, theta, eps)
    eta[0] = 0.0
    return np.column_stack([xi, eta]), -phi


def _one_sided_bridge(theta, eps, width, D, n_layer, n_arc):
    """Layer at the chord origin followed by arc and segment to the point D
    (in chord coordinates).  Returns points and headings."""
    pts, heads = _layer_points(theta, eps, width, n_layer)
    E, a0 = pts[-1], heads[-1]
    orient, turn, heading = _arc_then_line(E, a0, D, eps)
    c = E + orient * eps * _normal(a0)
    arc_pts, arc_heads = _arc(c, orient, a0, turn, eps, n_arc)
    tail = np.array([D])
    return (np.vstack([pts, arc_pts[1:], tail]),
            np.concatenate([heads, arc_heads[1:], [heading]]))


def _two_sided_bridge(theta_p, theta_q, eps, width, length, n_layer, n_arc):
    pts_p, heads_p = _layer_points(theta_p, eps, width, n_layer)
    pts_q, heads_q = _layer_points(theta_q, eps, width, n_layer)
    # mirror the right layer: xi -> length - xi, traversed towards the chord end
    pts_q = np.column_stack([length - pts_q[::-1, 0], pts_q[::-1, 1]])
    heads_q = -heads_q[::-1]
    E0, a0 = pts_p[-1], heads_p[-1]
    E1, a1 = pts_q[0], heads_q[0]
    o1, t0, o2, t1, heading, c0, c1 = _csc(E0, a0, E1, a1, eps)
    arc0, h0 = _arc(c0, o1, a0, t0, eps, n_arc)
    arc1, h1 = _arc(c1, o2, heading, t1, eps, n_arc)
    return (np.vstack([pts_p, arc0[1:], arc1, pts_q[1:]]),
            np.concatenate([heads_p, h0[1:], h1, heads_q[1:]]))


@dataclass(frozen=True)
class RecoveryOptions:
    width_exponent: float = 2.0 / 3.0
    width_cap: float = 0.4  # fraction of the chord length
    points_per_eps: int = 400
    n_layer: int = 4001
    n_arc: int = 201
    min_nodes: int = 2001


def recovery_curve(scene: Scene, pm, eps: float, opts: RecoveryOptions = RecoveryOptions()):
    """Glued curves, one per chord, as (x, y, slope) samples in global coordinates."""
    from .e0_solver import CHORD

    pieces = []
    partition = pm.partition
    for i, st in enumerate(pm.states):
        if st.kind != CHORD:
            continue
        x0, x1 = partition[i], partition[i + 1]
        P = np.array([x0, st.left_height])
        Q = np.array([x1, st.right_height])
        chord = Q - P
        length = float(np.hypot(*chord))
        rot = float(np.arctan2(chord[1], chord[0]))
        layer_p = 0 < i and pm.states[i - 1].kind != CHORD
        layer_q = i < len(pm.states) - 1 and pm.states[i + 1].kind != CHORD
        if not (layer_p or layer_q):
            xi = np.array([[0.0, 0.0], [length, 0.0]])
            heads = np.zeros(2)
        else:
            angle_index = {x: k for k, x in enumerate(pm.free_boundary_points)}
            width = min(eps**opts.width_exponent, opts.width_cap * length)
            th_p = pm.angles[angle_index[x0]] if layer_p else None
            th_q = pm.angles[angle_index[x1]] if layer_q else None
            for side, th, x in (("left", th_p, x0), ("right", th_q, x1)):
                if th is not None and not 0.0 < th < np.pi / 2:
                    raise RecoveryError(f"contact angle {th:.6g} at x={x:.6g} outside (0, pi/2)")
            try:
                if layer_p and layer_q:
                    xi, heads = _two_sided_bridge(th_p, th_q, eps, width, length,
                                                  opts.n_layer, opts.n_arc)
                elif layer_p:
                    xi, heads = _one_sided_bridge(th_p, eps, width, np.array([length, 0.0]),
                                                  opts.n_layer, opts.n_arc)
                else:
                    xi, heads = _one_sided_bridge(th_q, eps, width, np.array([length, 0.0]),
                                                  opts.n_layer, opts.n_arc)
                    xi = np.column_stack([length - xi[::-1, 0], xi[::-1, 1]])
                    heads = -heads[::-1]
            except RecoveryError as exc:
                raise RecoveryError(f"chord [{x0:.6g}, {x1:.6g}]: {exc}; decrease eps") from exc
        c, s = np.cos(rot), np.sin(rot)
        X = P[0] + c * xi[:, 0] - s * xi[:, 1]
        Y = P[1] + s * xi[:, 0] + c * xi[:, 1]
        X[0], Y[0], X[-1], Y[-1] = P[0], P[1], Q[0], Q[1]
        g_heads = heads + rot
        if np.any(np.cos(g_heads) <= 1e-12) or np.any(np.diff(X) <= 0):
            corner = x0 if layer_p else x1
            raise RecoveryError(
                f"glued curve near the corner at x={corner:.6g} is not a graph at eps={eps:.3g}; "
                f"admissible eps must keep the layer width {eps ** opts.width_exponent:.3g} "
                f"and radius eps well below the chord length {length:.3g}"
            )
        pieces.append((X, Y, np.tan(g_heads)))
    return pieces


def build_recovery(scene: Scene, pm, eps: float, n: Optional[int] = None,
                   opts: RecoveryOptions = RecoveryOptions()) -> GridProfile:
    """Sample the recovery profile for pm on a uniform grid (default spacing
    eps / points_per_eps)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if n is None:
        n = max(opts.min_nodes, int(np.ceil(scene.length * opts.points_per_eps / eps)) + 1)
    xs = scene.grid(n)
    us = pm.sample(scene, xs)
    for X, Y, S in recovery_curve(scene, pm, eps, opts):
        sel = (xs >= X[0]) & (xs <= X[-1])
        if not np.any(sel):
            continue
        # drop samples closer than round-off so the interpolant stays well posed
        keep = np.concatenate([[True], np.diff(X) > 1e-14 * scene.length])
        us[sel] = CubicHermiteSpline(X[keep], Y[keep], S[keep])(xs[sel])
    psi = scene.psi(xs)
    gap = us - psi
    scale = max(1.0, float(np.max(np.abs(us))))
    worst = int(np.argmin(gap))
    if gap[worst] < -1e-9 * scale:
        raise RecoveryError(
            f"recovery profile penetrates the obstacle at x={xs[worst]:.6g} "
            f"by {-gap[worst]:.3g}; decrease eps"
        )
    us = np.maximum(us, psi)
    for side, idx in (("left", 0), ("right", -1)):
        g = scene.boundary_height(side)
        if g is not None:
            us[idx] = g
    return GridProfile(xs, us)
