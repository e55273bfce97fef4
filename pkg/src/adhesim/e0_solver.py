"""Global minimizers of E_0 with adhered intervals alternating with chords.

The search is a shortest path over the obstacle nodes of a uniform grid:
consecutive nodes are joined by an "adhered" edge (cost: the adhesion
integral over the cell) and any pair of nodes by a chord edge when the
chord clears the obstacle at every grid node it spans.  The path is then
polished by Newton's method on the free-boundary coordinates so that the
Young condition cos(theta) = alpha holds at every interior contact point.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .energy import (GridProfile, adhered_cell_energy, coincidence_mask,
                     eval_E0)
from .scene import Scene, coupling_margin_width

ADHERED = "adhered"
CHORD = "chord"


@dataclass(frozen=True)
class State:
    kind: str
    left_height: Optional[float] = None
    right_height: Optional[float] = None

    def to_dict(self):
        if self.kind == ADHERED:
            return {"kind": ADHERED}
        return {"kind": CHORD, "left_height": self.left_height,
                "right_height": self.right_height}


@dataclass(frozen=True)
class PiecewiseMinimizer:
    partition: tuple
    states: tuple
    angles: tuple
    energy: float
    refined: bool = False
    note: str = ""

    @property
    def n_free(self) -> int:
        return len(self.partition) - 2

    @property
    def free_boundary_points(self) -> tuple:
        return tuple(self.partition[1:-1])

    def pieces(self):
        for i, st in enumerate(self.states):
            yield self.partition[i], self.partition[i + 1], st

    def sample(self, scene: Scene, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        us = np.array(scene.psi(xs), dtype=float)
        for x0, x1, st in self.pieces():
            if st.kind != CHORD:
                continue
            sel = (xs >= x0) & (xs <= x1)
            slope = (st.right_height - st.left_height) / (x1 - x0)
            us[sel] = st.left_height + slope * (xs[sel] - x0)
        for side, idx in (("left", 0), ("right", -1)):
            g = scene.boundary_height(side)
            if g is not None and np.isclose(xs[idx], scene.a if idx == 0 else scene.b):
                us[idx] = g
        return np.maximum(us, scene.psi(xs))

    def to_profile(self, scene: Scene, n: int) -> GridProfile:
        xs = scene.grid(n)
        return GridProfile(xs, self.sample(scene, xs))

    def to_dict(self) -> dict:
        return {
            "partition": [float(x) for x in self.partition],
            "states": [s.to_dict() for s in self.states],
            "angles": [float(a) for a in self.angles],
            "energy": float(self.energy),
            "n_free": self.n_free,
            "refined": self.refined,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseMinimizer":
        states = tuple(State(s["kind"], s.get("left_height"), s.get("right_height"))
                       for s in d["states"])
        return cls(tuple(d["partition"]), states, tuple(d["angles"]), d["energy"],
                   d.get("refined", False))


# ---------------------------------------------------------------------------
# helpers on partitions


def _adhesion_integral(scene: Scene, x0: float, x1: float) -> float:
    if x1 <= x0:
        return 0.0
    val, _ = quad(lambda x: float(scene.alpha(x) * np.sqrt(1 + scene.dpsi(x) ** 2)),
                  x0, x1, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def partition_energy(scene: Scene, partition, states) -> float:
    total = 0.0
    for i, st in enumerate(states):
        x0, x1 = partition[i], partition[i + 1]
        if st.kind == ADHERED:
            total += _adhesion_integral(scene, x0, x1)
        else:
            total += float(np.hypot(x1 - x0, st.right_height - st.left_height))
    return total


def contact_angles(scene: Scene, partition, states) -> tuple:
    """Contact angle at every interior partition point.

    Detached to the right: theta_u(x+) - theta_psi(x); otherwise
    theta_psi(x) - theta_u(x-).
    """
    angles = []
    for i in range(1, len(partition) - 1):
        x = partition[i]
        tpsi = float(np.arctan(scene.dpsi(x)))
        right = states[i]
        if right.kind == CHORD:
            s = (right.right_height - right.left_height) / (partition[i + 1] - x)
            angles.append(float(np.arctan(s)) - tpsi)
        else:
            left = states[i - 1]
            s = (left.right_height - left.left_height) / (x - partition[i - 1])
            angles.append(tpsi - float(np.arctan(s)))
    return tuple(angles)


def _build(scene, partition, states, energy=None, **kw) -> PiecewiseMinimizer:
    partition = tuple(float(x) for x in partition)
    if energy is None:
        energy = partition_energy(scene, partition, states)
    return PiecewiseMinimizer(partition, tuple(states),
                              contact_angles(scene, partition, states), float(energy), **kw)


# ---------------------------------------------------------------------------
# dynamic program


@dataclass
class _Graph:
    xs: np.ndarray
    ys: np.ndarray  # node heights (obstacle, plus elevated ends)
    obs: slice  # node indices of obstacle points
    offset: int
    has_left: bool
    has_right: bool
    cell: np.ndarray
    M: int

    @property
    def n_nodes(self):
        return self.xs.size


def _graph(scene: Scene, M: int) -> _Graph:
    xo = scene.grid(M + 1)
    yo = scene.psi(xo)
    has_left, has_right = scene.elevated("left"), scene.elevated("right")
    xs, ys = [xo], [yo]
    if has_left:
        xs.insert(0, [scene.a])
        ys.insert(0, [scene.boundary_height("left")])
    if has_right:
        xs.append([scene.b])
        ys.append([scene.boundary_height("right")])
    off = 1 if has_left else 0
    return _Graph(np.concatenate(xs), np.concatenate(ys), slice(off, off + M + 1), off,
                  has_left, has_right, adhered_cell_energy(scene, xo), M)


def _visible_chords(scene: Scene, g: _Graph, src: int, first: int):
    """Obstacle targets first..M visible from node src, with chord lengths.

    A chord must clear psi at every grid node it spans and lie strictly above
    psi at its midpoint, so that segments hugging the obstacle are adhered
    edges rather than spurious detachments.
    """
    x0, y0 = g.xs[src], g.ys[src]
    tx = g.xs[g.offset + first: g.offset + g.M + 1]
    ty = g.ys[g.offset + first: g.offset + g.M + 1]
    slopes = (ty - y0) / (tx - x0)
    prev_max = np.concatenate([[-np.inf], np.maximum.accumulate(slopes)[:-1]])
    visible = slopes >= prev_max - 1e-12 * (1 + np.abs(slopes))
    mid_gap = 0.5 * (y0 + ty) - scene.psi(0.5 * (x0 + tx))
    visible &= mid_gap > scene.contact_tol
    lengths = np.hypot(tx - x0, ty - y0)
    return visible, lengths, slopes


def _dp(scene: Scene, M: int, n_max: Optional[int] = None):
    g = _graph(scene, M)
    K = 1 if n_max is None else n_max + 1
    n = g.n_nodes
    cost = np.full((K, n), np.inf)
    pred = np.full((K, n, 2), -1, dtype=np.int64)  # (node, layer)
    kind = np.zeros((K, n), dtype=np.int8)  # 0 adhered edge, 1 chord
    start = 0 if g.has_left else g.offset
    end = n - 1 if g.has_right else g.offset + M
    cost[0, start] = 0.0
    right_node = n - 1 if g.has_right else None

    def interior(node):
        k = node - g.offset
        return 0 < k < M and node != right_node and not (g.has_left and node == 0)

    def relax(layers, targets, cand, src, k):
        better = cand < cost[layers, targets] - 1e-14
        if not np.any(better):
            return
        t, lay = targets[better], layers[better]
        cost[lay, t] = cand[better]
        pred[lay, t, 0] = src
        pred[lay, t, 1] = k
        kind[lay, t] = chord_flag

    for src in range(n):
        if src == right_node:
            continue
        obs_index = src - g.offset if not (g.has_left and src == 0) else -1
        for k in range(K):
            c0 = cost[k, src]
            if not np.isfinite(c0):
                continue
            # adhered edge
            if 0 <= obs_index < M:
                chord_flag = 0
                relax(np.array([k]), np.array([src + 1]),
                      np.array([c0 + g.cell[obs_index]]), src, k)
            first = obs_index + 1 if obs_index >= 0 else 1
            chord_flag = 1
            if first <= M:
                visible, lengths, slopes = _visible_chords(scene, g, src, first)
                targets = np.arange(g.offset + first, g.offset + M + 1)
                if K == 1:
                    layers = np.zeros(targets.size, dtype=np.int64)
                else:
                    inc = (1 if interior(src) else 0) + (targets - g.offset < M).astype(np.int64)
                    layers = k + inc
                ok = visible & (layers < K)
                relax(layers[ok], targets[ok], c0 + lengths[ok], src, k)
            else:
                slopes = np.array([])
            if g.has_right and g.xs[src] < scene.b:
                xr, yr = g.xs[-1], g.ys[-1]
                s_r = (yr - g.ys[src]) / (xr - g.xs[src])
                inter = slopes[:-1] if slopes.size else slopes
                if inter.size == 0 or s_r >= inter.max() - 1e-12 * (1 + abs(s_r)):
                    lay = k if K == 1 else k + (1 if interior(src) else 0)
                    if lay < K:
                        relax(np.array([lay]), np.array([n - 1]),
                              np.array([c0 + np.hypot(xr - g.xs[src], yr - g.ys[src])]), src, k)
    return g, cost, pred, kind, start, end


def _decode(scene: Scene, g: _Graph, pred, kind, start, end, layer) -> PiecewiseMinimizer:
    edges = []
    node, k = end, layer
    while node != start or k != 0:
        p, pk = pred[k, node]
        if p < 0:
            raise RuntimeError("broken predecessor chain")
        edges.append((p, node, kind[k, node]))
        node, k = p, pk
    edges.reverse()
    partition = [scene.a]
    states = []
    for p, q, knd in edges:
        x1 = g.xs[q]
        if knd == 0:
            if states and states[-1].kind == ADHERED:
                partition[-1] = x1
                continue
            states.append(State(ADHERED))
        else:
            states.append(State(CHORD, float(g.ys[p]), float(g.ys[q])))
        partition.append(x1)
    partition[-1] = scene.b
    return partition, states


def solve_e0_dp(scene: Scene, grid_size: int = 800) -> PiecewiseMinimizer:
    """Shortest-path minimizer of E_0 over chord/adhered structures on a grid
    of grid_size cells."""
    if grid_size < 8:
        raise ValueError("grid_size must be at least 8")
    g, cost, pred, kind, start, end = _dp(scene, grid_size)
    if not np.isfinite(cost[0, end]):
        raise RuntimeError("no admissible path: grid too coarse for chord visibility")
    partition, states = _decode(scene, g, pred, kind, start, end, 0)
    return _build(scene, partition, states, energy=float(cost[0, end]))


def enumerate_e0_minimizers(scene: Scene, grid_size: int = 800, gap: float = 1e-6,
                            n_max: int = 8) -> list:
    """Refined minimizers, one per free-boundary count, within `gap` of the best.

    Sorted by number of free-boundary points, then energy.
    """
    g, cost, pred, kind, start, end = _dp(scene, grid_size, n_max=n_max)
    candidates = []
    for layer in range(n_max + 1):
        if not np.isfinite(cost[layer, end]):
            continue
        partition, states = _decode(scene, g, pred, kind, start, end, layer)
        pm = _build(scene, partition, states, energy=float(cost[layer, end]))
        candidates.append(refine_young(scene, pm))
    best = min(pm.energy for pm in candidates)
    keep = [pm for pm in candidates if pm.energy <= best + gap]
    return sorted(keep, key=lambda pm: (pm.n_free, pm.energy))


# ---------------------------------------------------------------------------
# Young-law refinement


def _weight(scene, x):
    return float(scene.alpha(x) * np.sqrt(1 + scene.dpsi(x) ** 2))


def _young_residuals(scene, xl, yl, xr, yr, free_l, free_r):
    """Gradient of the local E_0 with respect to the free chord ends."""
    if free_l:
        yl = float(scene.psi(xl))
    if free_r:
        yr = float(scene.psi(xr))
    s = (yr - yl) / (xr - xl)
    res = []
    if free_l:
        p = float(scene.dpsi(xl))
        res.append(_weight(scene, xl) - (1 + p * s) / np.hypot(1, s))
    if free_r:
        p = float(scene.dpsi(xr))
        res.append((1 + p * s) / np.hypot(1, s) - _weight(scene, xr))
    return np.array(res)


def _local_energy(scene, xl, yl, xr, yr, free_l, free_r, ref_l, ref_r):
    if free_l:
        yl = float(scene.psi(xl))
    if free_r:
        yr = float(scene.psi(xr))
    e = float(np.hypot(xr - xl, yr - yl))
    if free_l:
        e += _adhesion_integral(scene, ref_l, xl) if xl >= ref_l else -_adhesion_integral(scene, xl, ref_l)
    if free_r:
        e -= _adhesion_integral(scene, ref_r, xr) if xr >= ref_r else -_adhesion_integral(scene, xr, ref_r)
    return e


def _chord_clear(scene, x0, y0, x1, y1, n=None):
    n = n or max(64, int(4 * scene.validation_points * (x1 - x0) / scene.length))
    xs = np.linspace(x0, x1, n + 2)[1:-1]
    line = y0 + (y1 - y0) * (xs - x0) / (x1 - x0)
    return bool(np.all(line - scene.psi(xs) >= -1e-10 * max(1.0, abs(y0), abs(y1))))


def refine_young(scene: Scene, pm: PiecewiseMinimizer, tol: float = 1e-13,
                 max_iter: int = 50) -> PiecewiseMinimizer:
    """Newton polish of free-boundary points so that cos(theta_i) = alpha(x_i)."""
    if pm.n_free == 0:
        return replace(pm, refined=True)
    partition = list(pm.partition)
    states = list(pm.states)
    scale = scene.length
    for i, st in enumerate(states):
        if st.kind != CHORD:
            continue
        free_l = i > 0 and states[i - 1].kind == ADHERED
        free_r = i < len(states) - 1 and states[i + 1].kind == ADHERED
        if not (free_l or free_r):
            continue
        xl, xr = partition[i], partition[i + 1]
        yl, yr = st.left_height, st.right_height
        lo = partition[i - 1] if free_l else xl
        hi = partition[i + 2] if free_r else xr
        ref_l, ref_r = xl, xr
        z = np.array([v for v, f in ((xl, free_l), (xr, free_r)) if f])

        def unpack(zz):
            it = iter(zz)
            return (next(it) if free_l else xl), (next(it) if free_r else xr)

        def energy(zz):
            a, b = unpack(zz)
            return _local_energy(scene, a, yl, b, yr, free_l, free_r, ref_l, ref_r)

        def resid(zz):
            a, b = unpack(zz)
            return _young_residuals(scene, a, yl, b, yr, free_l, free_r)

        def inside(zz):
            a, b = unpack(zz)
            return lo < a < b < hi if (free_l and free_r) else (lo <= a < b <= hi)

        e_cur = energy(z)
        converged = False
        for _ in range(max_iter):
            r = resid(z)
            if np.max(np.abs(r)) < tol:
                converged = True
                break
            step_fd = 1e-7 * scale
            jac = np.empty((z.size, z.size))
            for j in range(z.size):
                dz = np.zeros_like(z)
                dz[j] = step_fd
                jac[:, j] = (resid(z + dz) - resid(z - dz)) / (2 * step_fd)
            try:
                step = -np.linalg.solve(jac, r)
            except np.linalg.LinAlgError:
                break
            t = 1.0
            accepted = False
            for _ in range(60):
                trial = z + t * step
                if inside(trial):
                    e_try = energy(trial)
                    if e_try <= e_cur + 1e-15 * max(1.0, abs(e_cur)):
                        z, e_cur, accepted = trial, e_try, True
                        break
                t *= 0.5
            if not accepted:
                converged = np.max(np.abs(resid(z))) < 1e-10
                break
        else:
            converged = np.max(np.abs(resid(z))) < 1e-10
        if not converged:
            warnings.warn(f"Young refinement did not converge on chord {i}; "
                          "returning the grid solution unchanged")
            return replace(pm, note=f"refinement failed on chord {i}")
        a, b = unpack(z)
        ya = float(scene.psi(a)) if free_l else yl
        yb = float(scene.psi(b)) if free_r else yr
        partition[i], partition[i + 1] = a, b
        states[i] = State(CHORD, ya, yb)
    for i, st in enumerate(states):
        if st.kind == CHORD and not _chord_clear(scene, partition[i], st.left_height,
                                                  partition[i + 1], st.right_height):
            warnings.warn(f"refined chord {i} penetrates the obstacle on the fine grid")
            return replace(pm, note=f"refined chord {i} penetrates obstacle")
    # adhered neighbours of refined chords share endpoints through the partition
    new = _build(scene, partition, states, refined=True)
    if new.energy > pm.energy + 1e-12:
        warnings.warn("refinement increased the energy; keeping the grid solution")
        return replace(pm, note="refinement increased energy")
    return new


# ---------------------------------------------------------------------------
# certificates


@dataclass
class CertificateReport:
    alternating: bool
    chords_clear: bool
    young_residuals: list = field(default_factory=list)  # (x, theta, alpha, residual)
    endpoint_flags: list = field(default_factory=list)
    tol: float = 1e-8

    @property
    def max_residual(self) -> float:
        return max((r[3] for r in self.young_residuals), default=0.0)

    @property
    def passed(self) -> bool:
        return self.alternating and self.chords_clear and self.max_residual <= self.tol

    def to_dict(self) -> dict:
        return {
            "alternating": self.alternating,
            "chords_clear": self.chords_clear,
            "young_residuals": [
                {"x": x, "theta": t, "alpha": a, "residual": r}
                for x, t, a, r in self.young_residuals
            ],
            "endpoint_flags": self.endpoint_flags,
            "max_residual": self.max_residual,
            "passed": self.passed,
        }


def certify_partitional(scene: Scene, pm: PiecewiseMinimizer, tol: float = 1e-8) -> CertificateReport:
    kinds = [s.kind for s in pm.states]
    alternating = all(k1 != k2 for k1, k2 in zip(kinds, kinds[1:]))
    clear = all(
        _chord_clear(scene, x0, st.left_height, x1, st.right_height)
        for x0, x1, st in pm.pieces() if st.kind == CHORD
    )
    residuals = []
    for x, theta in zip(pm.free_boundary_points, pm.angles):
        a = float(scene.alpha(x))
        residuals.append((float(x), float(theta), a, abs(float(np.cos(theta)) - a)))
    flags = []
    first, last = pm.states[0], pm.states[-1]
    x0, x1 = pm.partition[0], pm.partition[1]
    if first.kind == CHORD and abs(first.left_height - float(scene.psi(x0))) <= scene.contact_tol:
        s = (first.right_height - first.left_height) / (x1 - x0)
        diff = float(np.arctan(s) - np.arctan(scene.dpsi(x0)))
        flags.append({"side": "left", "angle_difference": diff, "cos": float(np.cos(diff)),
                      "alpha": float(scene.alpha(x0))})
    x0, x1 = pm.partition[-2], pm.partition[-1]
    if last.kind == CHORD and abs(last.right_height - float(scene.psi(x1))) <= scene.contact_tol:
        s = (last.right_height - last.left_height) / (x1 - x0)
        diff = float(np.arctan(scene.dpsi(x1)) - np.arctan(s))
        flags.append({"side": "right", "angle_difference": diff, "cos": float(np.cos(diff)),
                      "alpha": float(scene.alpha(x1))})
    return CertificateReport(alternating, clear, residuals, flags, tol)


# ---------------------------------------------------------------------------
# adhering short detached spans


def merge_flat_span(scene: Scene, profile: GridProfile, interval) -> GridProfile:
    """Replace u by psi on [y0, y1]; the E_0 decrease is checked against
    (1 - alpha_max)/2 times the width of every detached run inside."""
    y0, y1 = interval
    xs = profile.xs
    i0 = int(np.argmin(np.abs(xs - y0)))
    i1 = int(np.argmin(np.abs(xs - y1)))
    if not i0 < i1:
        raise ValueError("interval must contain at least one cell")
    contact = coincidence_mask(scene, profile)
    if not (contact[i0] and contact[i1]):
        raise ValueError("merge_flat_span requires u = psi at both interval ends")
    width = xs[i1] - xs[i0]
    delta = coupling_margin_width(scene)
    if width > delta * (1 + 1e-12):
        raise ValueError(f"interval width {width:.6g} exceeds the margin width {delta:.6g}")
    inside = ~contact[i0:i1 + 1]
    if not inside.any():
        return profile
    us = profile.us.copy()
    us[i0:i1 + 1] = scene.psi(xs[i0:i1 + 1])
    merged = profile.with_values(us)
    decrease = eval_E0(scene, profile) - eval_E0(scene, merged)
    # detached runs are bounded by contact nodes; the bound applies to each
    runs = np.flatnonzero(np.diff(np.concatenate([[0], inside.astype(int), [0]])))
    bound = sum(xs[i0 + e] - xs[i0 + s - 1] for s, e in zip(runs[::2], runs[1::2]))
    bound *= 0.5 * (1 - scene.alpha_max)
    if decrease < bound - 1e-12 * scene.length:
        raise RuntimeError(f"E_0 decrease {decrease:.6g} below the guaranteed {bound:.6g}")
    return merged
