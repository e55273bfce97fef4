"""Approximate minimizers of the discrete E_eps.

The adhesion switch is discontinuous in u, so it is replaced by a C^1
surrogate: node i counts as detached to the degree a_i = S((u_i - psi_i)/eta)
with the clamped cubic step S, and a cell has detachment
c = 1 - (1 - a_i)(1 - a_{i+1}).  The smoothed cell energy is A + (L - A) c,
where A is the adhered cell integral and L the chord length.  The width eta
is annealed geometrically down to the contact tolerance and the energy
reported at the end is always the unsmoothed one.

The default inner solver is a projected Newton method with the exact banded
Hessian of the discrete energy (Levenberg shifts where it is indefinite);
plain projected gradient descent with backtracking is available as
method="gd".
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from .energy import (EnergyBreakdown, GridProfile, adhered_cell_energy, check_admissible,
                     coincidence_mask, eval_Eeps, fd_derivatives,
                     trapezoid_weights)
from .scene import Scene

BAND = 3  # half bandwidth of the Hessian (one-sided end stencils span 4 nodes)


def smooth_step(t):
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def smooth_step_derivs(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tc = np.clip(t, 0.0, 1.0)
    s = tc * tc * (3.0 - 2.0 * tc)
    ds = np.where(inside, 6.0 * tc * (1.0 - tc), 0.0)
    dds = np.where(inside, 6.0 - 12.0 * tc, 0.0)
    return s, ds, dds


def smoothed_adhesion(y, eta: float, alpha_x):
    """alpha + (1 - alpha) S(y / eta)."""
    return alpha_x + (1.0 - alpha_x) * smooth_step(np.asarray(y, dtype=float) / eta)


@dataclass(frozen=True)
class SolveOptions:
    eta0_factor: float = 10.0  # eta_0 = eta0_factor * eps
    rho: float = 0.5
    max_rounds: int = 80
    inner_max: int = 60
    gd_inner_max: int = 5000
    grad_tol: float = 1e-8  # on max |projected gradient| / h, relative to (b - a)
    armijo: float = 1e-4
    method: str = "newton"
    bending: str = "angle"
    min_resolution: float = 10.0  # require h <= eps / min_resolution near free boundaries

    def __post_init__(self):
        if not self.eta0_factor > 0:
            raise ValueError("eta0_factor must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.grad_tol <= 0 or self.armijo <= 0:
            raise ValueError("tolerances must be positive")
        if self.method not in ("newton", "gd"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.bending not in ("angle", "fd"):
            raise ValueError(f"unknown bending scheme {self.bending!r}")


# ---------------------------------------------------------------------------
# stencils


@dataclass(frozen=True, eq=False)
class _Stencils:
    n: int
    h: float
    starts: np.ndarray  # first node of each row's stencil
    k1: np.ndarray  # (n, 4) first-derivative coefficients
    k2: np.ndarray  # (n, 4) second-derivative coefficients
    weights: np.ndarray
    idx: np.ndarray  # (n, 4) node indices of each row's stencil

    @classmethod
    def build(cls, n: int, h: float) -> "_Stencils":
        if n < 4:
            raise ValueError("the smoothed solver needs at least 4 nodes")
        starts = np.arange(n) - 1
        k1 = np.zeros((n, 4))
        k2 = np.zeros((n, 4))
        k1[:, :3] = np.array([-0.5, 0.0, 0.5]) / h
        k2[:, :3] = np.array([1.0, -2.0, 1.0]) / h**2
        starts[0] = 0
        k1[0] = np.array([-1.5, 2.0, -0.5, 0.0]) / h
        k2[0] = np.array([2.0, -5.0, 4.0, -1.0]) / h**2
        starts[-1] = n - 4
        k1[-1] = np.array([0.0, 0.5, -2.0, 1.5]) / h
        k2[-1] = np.array([-1.0, 4.0, -5.0, 2.0]) / h**2
        # interior rows carry a zero fourth coefficient; clip keeps it in range
        idx = np.minimum(starts[:, None] + np.arange(4)[None, :], n - 1)
        return cls(n, h, starts, k1, k2, trapezoid_weights(n, h), idx)

    def apply(self, u):
        return fd_derivatives(u, self.h)


# ---------------------------------------------------------------------------
# smoothed energy, gradient, Hessian


def _fd_bending(st: _Stencils, u, weight, hessian):
    n = u.size
    idx = st.idx
    d1, d2 = st.apply(u)
    w = st.weights * weight
    q = (1.0 + d1**2) ** -2.5
    dq = -5.0 * d1 * (1.0 + d1**2) ** -3.5
    ddq = -5.0 * (1.0 + d1**2) ** -3.5 + 35.0 * d1**2 * (1.0 + d1**2) ** -4.5
    value = float(np.dot(w, d2**2 * q))
    g2 = w * 2.0 * d2 * q  # dG/d(d2)
    g1 = w * d2**2 * dq  # dG/d(d1)
    grad = np.bincount(idx.ravel(), (st.k2 * g2[:, None] + st.k1 * g1[:, None]).ravel(),
                       minlength=n)
    if not hessian:
        return value, grad, None
    ab = np.zeros((BAND + 1, n))  # upper banded storage, ab[BAND + i - j, j] = H[i, j]
    h22 = w * 2.0 * q
    h21 = w * 2.0 * d2 * dq
    h11 = w * d2**2 * ddq
    for r in range(4):
        for s in range(r, 4):
            val = (h22 * st.k2[:, r] * st.k2[:, s]
                   + h21 * (st.k2[:, r] * st.k1[:, s] + st.k1[:, r] * st.k2[:, s])
                   + h11 * st.k1[:, r] * st.k1[:, s])
            ab[BAND - (s - r)] += np.bincount(idx[:, s], val, minlength=n)
    return value, grad, ab


def _angle_value(u, h):
    d = np.diff(u)
    L = np.hypot(h, d)
    turn = np.diff(np.arctan2(d, h))
    dual = 0.5 * (L[:-1] + L[1:])
    w = dual.copy()
    w[0] += 0.5 * L[0]
    w[-1] += 0.5 * L[-1]
    return float(np.sum(w * (turn / dual) ** 2))


def _angle_bending(u, h, weight, hessian):
    """Turning-angle bending G_j = w_j T_j^2 / dual_j^2 and its derivatives.

    Node j sees the increments d_a = u_j - u_{j-1} and d_b = u_{j+1} - u_j.
    """
    n = u.size
    d = np.diff(u)
    L2 = h * h + d * d
    L = np.sqrt(L2)
    phi = np.arctan2(d, h)
    p1, p2 = h / L2, -2.0 * h * d / L2**2
    l1, l2 = d / L, h * h / L**3
    a, b = slice(0, n - 2), slice(1, n - 1)
    T = phi[b] - phi[a]
    lb = 0.5 * (L[a] + L[b])
    ea = np.zeros(n - 2)
    eb = np.zeros(n - 2)
    ea[0] = eb[-1] = 1.0
    w = lb + 0.5 * ea * L[a] + 0.5 * eb * L[b]
    P, Q = T * T, lb**-2
    value = weight * float(np.sum(w * P * Q))

    Ta, Tb = -p1[a], p1[b]
    Pa, Pb = 2 * T * Ta, 2 * T * Tb
    lba, lbb = 0.5 * l1[a], 0.5 * l1[b]
    Qa, Qb = -2 * lb**-3 * lba, -2 * lb**-3 * lbb
    wa, wb = (1 + ea) * 0.5 * l1[a], (1 + eb) * 0.5 * l1[b]
    Ga = weight * (wa * P * Q + w * Pa * Q + w * P * Qa)
    Gb = weight * (wb * P * Q + w * Pb * Q + w * P * Qb)
    grad = np.zeros(n)
    grad[:-2] -= Ga
    grad[1:-1] += Ga - Gb
    grad[2:] += Gb
    if not hessian:
        return value, grad, None

    Taa, Tbb = -p2[a], p2[b]
    Paa, Pbb, Pab = 2 * Ta**2 + 2 * T * Taa, 2 * Tb**2 + 2 * T * Tbb, 2 * Ta * Tb
    Qaa = 6 * lb**-4 * lba**2 - 2 * lb**-3 * 0.5 * l2[a]
    Qbb = 6 * lb**-4 * lbb**2 - 2 * lb**-3 * 0.5 * l2[b]
    Qab = 6 * lb**-4 * lba * lbb
    waa, wbb = (1 + ea) * 0.5 * l2[a], (1 + eb) * 0.5 * l2[b]
    Gaa = weight * (waa * P * Q + 2 * wa * Pa * Q + 2 * wa * P * Qa
                    + w * Paa * Q + 2 * w * Pa * Qa + w * P * Qaa)
    Gbb = weight * (wbb * P * Q + 2 * wb * Pb * Q + 2 * wb * P * Qb
                    + w * Pbb * Q + 2 * w * Pb * Qb + w * P * Qbb)
    Gab = weight * (wa * Pb * Q + wa * P * Qb + wb * Pa * Q + w * Pab * Q
                    + w * Pa * Qb + wb * P * Qa + w * Pb * Qa + w * P * Qab)
    ab = np.zeros((BAND + 1, n))
    ab[BAND, :-2] += Gaa
    ab[BAND, 1:-1] += Gaa - 2 * Gab + Gbb
    ab[BAND, 2:] += Gbb
    ab[BAND - 1, 1:-1] += Gab - Gaa  # (j-1, j)
    ab[BAND - 1, 2:] += Gab - Gbb  # (j, j+1)
    ab[BAND - 2, 2:] += -Gab  # (j-1, j+1)
    return value, grad, ab


class SmoothedEnergy:
    """Discrete E_eps with the C^1 adhesion surrogate at width eta."""

    def __init__(self, scene: Scene, xs: np.ndarray, eps: float, eta: float,
                 bending: str = "angle"):
        self.scene = scene
        self.xs = xs
        self.eps = float(eps)
        self.eta = float(eta)
        self.bending = bending
        self.h = float(xs[1] - xs[0])
        self.psi = scene.psi(xs)
        self.cell_adhered = adhered_cell_energy(scene, xs)
        self.st = _Stencils.build(xs.size, self.h)

    def with_eta(self, eta: float) -> "SmoothedEnergy":
        other = object.__new__(SmoothedEnergy)
        other.__dict__.update(self.__dict__)
        other.eta = float(eta)
        return other

    def _detach(self, u):
        s, ds, dds = smooth_step_derivs((u - self.psi) / self.eta)
        return s, ds / self.eta, dds / self.eta**2

    def _bending_value(self, u) -> float:
        if self.bending == "angle":
            return _angle_value(u, self.h)
        d1, d2 = self.st.apply(u)
        return float(np.dot(self.st.weights, d2**2 * (1.0 + d1**2) ** -2.5))

    def value(self, u) -> float:
        a = smooth_step((u - self.psi) / self.eta)
        c = 1.0 - (1.0 - a[:-1]) * (1.0 - a[1:])
        L = np.hypot(self.h, np.diff(u))
        A = self.cell_adhered
        return self.eps**2 * self._bending_value(u) + float(np.sum(A + (L - A) * c))

    def gradient(self, u) -> np.ndarray:
        return self._derivatives(u, hessian=False)[1]

    def value_grad_hess(self, u):
        return self._derivatives(u, hessian=True)

    def _derivatives(self, u, hessian: bool):
        if self.bending == "angle":
            value, grad, ab = _angle_bending(u, self.h, self.eps**2, hessian)
        else:
            value, grad, ab = _fd_bending(self.st, u, self.eps**2, hessian)

        a, da, dda = self._detach(u)
        ai, aj = a[:-1], a[1:]
        c = 1.0 - (1.0 - ai) * (1.0 - aj)
        delta = np.diff(u)
        L = np.hypot(self.h, delta)
        A = self.cell_adhered
        value += float(np.sum(A + (L - A) * c))
        LD = delta / L
        ci, cj = 1.0 - aj, 1.0 - ai
        grad[:-1] += -LD * c + (L - A) * ci * da[:-1]
        grad[1:] += LD * c + (L - A) * cj * da[1:]
        if not hessian:
            return value, grad, None
        LDD = self.h**2 / L**3
        hii = LDD * c - 2.0 * LD * ci * da[:-1] + (L - A) * ci * dda[:-1]
        hjj = LDD * c + 2.0 * LD * cj * da[1:] + (L - A) * cj * dda[1:]
        hij = -LDD * c - LD * cj * da[1:] + LD * ci * da[:-1] - (L - A) * da[:-1] * da[1:]
        ab[BAND, :-1] += hii
        ab[BAND, 1:] += hjj
        ab[BAND - 1, 1:] += hij
        return value, grad, ab


# ---------------------------------------------------------------------------
# driver


@dataclass
class SolveResult:
    profile: GridProfile
    energy: EnergyBreakdown
    initial_energy: float
    trace: list = field(default_factory=list)
    converged: bool = True

    def trace_records(self) -> list:
        return [dict(r) for r in self.trace]


def _fixed_nodes(scene: Scene, n: int) -> np.ndarray:
    fixed = np.zeros(n, dtype=bool)
    fixed[0] = scene.left.is_dirichlet
    fixed[-1] = scene.right.is_dirichlet
    return fixed


def _solve_banded(ab, rhs):
    diag_scale = max(1.0, float(np.max(np.abs(ab[BAND]))))
    mu = 0.0
    for _ in range(40):
        shifted = ab.copy()
        shifted[BAND] += mu
        try:
            chol = cholesky_banded(shifted, lower=False, check_finite=False)
            return cho_solve_banded((chol, False), rhs, check_finite=False)
        except LinAlgError:
            mu = max(4.0 * mu, 1e-10 * diag_scale)
    return None


def _restrict(ab, fixed):
    """Identity rows/columns for nodes held fixed in this step."""
    ab = ab.copy()
    n = ab.shape[1]
    cols = np.arange(n)
    for k in range(1, BAND + 1):
        rows = cols - k
        mask = fixed[cols] | (rows >= 0) & fixed[np.clip(rows, 0, n - 1)]
        ab[BAND - k, mask] = 0.0
    ab[BAND, fixed] = 1.0
    return ab


def _inner(fn: SmoothedEnergy, u, fixed, opts: SolveOptions, tol_abs: float):
    psi = fn.psi
    value, grad, ab = fn.value_grad_hess(u) if opts.method == "newton" else (*fn._derivatives(u, False)[:2], None)
    cap = opts.inner_max if opts.method == "newton" else opts.gd_inner_max
    step_gd = 1.0
    it = 0
    pg_norm = np.inf
    for it in range(1, cap + 1):
        at_bound = (u - psi <= 0.0) & (grad > 0.0)
        hold = fixed | at_bound
        pg = np.where(hold, 0.0, grad)
        pg_norm = float(np.max(np.abs(pg)))
        if pg_norm <= tol_abs:
            break
        direction = None
        if opts.method == "newton":
            d = _solve_banded(_restrict(ab, hold), -pg)
            if d is not None and np.dot(d, pg) < 0:
                direction = d
        if direction is None:
            direction = -pg * step_gd
        t = 1.0
        accepted = False
        for _ in range(60):
            trial = np.maximum(u + t * direction, psi)
            trial[fixed] = u[fixed]
            v = fn.value(trial)
            if v <= value + opts.armijo * np.dot(grad, trial - u):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        if opts.method == "gd":
            step_gd = step_gd * t * 2.0
        change = float(np.max(np.abs(trial - u)))
        u = trial
        prev = value
        if opts.method == "newton":
            value, grad, ab = fn.value_grad_hess(u)
        else:
            value, grad, _ = fn._derivatives(u, False)
        if change <= 1e-15 * max(1.0, float(np.max(np.abs(u)))) or abs(prev - value) <= 1e-16 * abs(value):
            break
    return u, value, pg_norm, it


def _seed_has_free_boundary(scene, profile):
    contact = coincidence_mask(scene, profile)
    return bool(np.any(np.diff(contact.astype(int)) != 0))


def minimize_eps(scene: Scene, eps: float, init: GridProfile,
                 opts: SolveOptions = SolveOptions()) -> SolveResult:
    """Annealed smoothed-adhesion descent on E_eps starting from init."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    check_admissible(scene, init)
    h = init.h
    if h > eps / opts.min_resolution and _seed_has_free_boundary(scene, init):
        raise ValueError(
            f"grid spacing {h:.3g} does not resolve the layer scale eps={eps:.3g}; "
            f"need h <= eps/{opts.min_resolution:g}"
        )
    tau = scene.contact_tol
    fixed = _fixed_nodes(scene, init.n)
    init_br = eval_Eeps(scene, init, eps, opts.bending)
    best_u, best_e = init.us.copy(), init_br.total
    u = init.us.copy()
    fn = SmoothedEnergy(scene, init.xs, eps, opts.eta0_factor * eps, opts.bending)
    tol_abs = opts.grad_tol * scene.length * h
    trace = []
    eta = opts.eta0_factor * eps
    for rnd in range(opts.max_rounds):
        fn = fn.with_eta(max(eta, tau))
        u, smoothed, pg_norm, iters = _inner(fn, u, fixed, opts, tol_abs)
        prof = GridProfile(init.xs, u)
        true = eval_Eeps(scene, prof, eps, opts.bending).total
        gap = abs(smoothed - true)
        band = (u - fn.psi > 0) & (u - fn.psi < fn.eta)
        touched = np.zeros(u.size - 1, dtype=bool)
        touched |= band[:-1] | band[1:]
        L = np.hypot(h, np.diff(u))
        bound = float(np.sum(np.abs(L - fn.cell_adhered)[touched]))
        if gap > bound + 1e-12 * max(1.0, abs(true)):
            warnings.warn(f"smoothing gap {gap:.3g} exceeds its bound {bound:.3g} in round {rnd}")
        trace.append({"round": rnd, "eta": fn.eta, "smoothed_energy": smoothed,
                      "energy": true, "grad_norm": pg_norm, "iterations": iters,
                      "smoothing_gap": gap, "smoothing_bound": bound})
        if true < best_e:
            best_u, best_e = u.copy(), true
        if eta <= tau:
            break
        eta *= opts.rho
    profile = GridProfile(init.xs, best_u)
    br = eval_Eeps(scene, profile, eps, opts.bending)
    converged = bool(trace and trace[-1]["grad_norm"] <= tol_abs)
    return SolveResult(profile, br, init_br.total, trace, converged)
