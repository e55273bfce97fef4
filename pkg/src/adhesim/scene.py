"""Problem instances: domain, obstacle, adhesion coefficient and boundary data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline


class ConfigError(ValueError):
    """Raised when an obstacle or adhesion definition cannot be evaluated."""


# ---------------------------------------------------------------------------
# obstacles


@dataclass(frozen=True)
class FlatObstacle:
    value: float = 0.0

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)

    def d1(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def d2(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SineObstacle:
    """psi(x) = amplitude * sin(k x + phase) + offset."""

    amplitude: float
    k: float
    offset: float = 0.0
    phase: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.sin(self.k * x + self.phase) + self.offset

    def d1(self, x):
        x = np.asarray(x, dtype=float)
        return self.amplitude * self.k * np.cos(self.k * x + self.phase)

    def d2(self, x):
        x = np.asarray(x, dtype=float)
        return -self.amplitude * self.k**2 * np.sin(self.k * x + self.phase)


@dataclass(frozen=True)
class PolynomialObstacle:
    """Coefficients in increasing degree."""

    coeffs: tuple

    def _poly(self, order=0):
        p = Polynomial(self.coeffs)
        return p.deriv(order) if order else p

    def __call__(self, x):
        return self._poly()(np.asarray(x, dtype=float))

    def d1(self, x):
        return self._poly(1)(np.asarray(x, dtype=float))

    def d2(self, x):
        return self._poly(2)(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class TabulatedObstacle:
    """C^2 cubic spline through tabulated (x, psi) values."""

    xs: tuple
    values: tuple

    def __post_init__(self):
        if len(self.xs) < 4 or len(self.xs) != len(self.values):
            raise ConfigError("tabulated obstacle needs >= 4 matching (x, value) pairs")
        if np.any(np.diff(self.xs) <= 0):
            raise ConfigError("tabulated obstacle abscissae must be strictly increasing")
        object.__setattr__(self, "_spline", CubicSpline(self.xs, self.values))

    def __call__(self, x):
        return self._spline(np.asarray(x, dtype=float))

    def d1(self, x):
        return self._spline(np.asarray(x, dtype=float), 1)

    def d2(self, x):
        return self._spline(np.asarray(x, dtype=float), 2)


# ---------------------------------------------------------------------------
# adhesion coefficients


@dataclass(frozen=True)
class ConstantAdhesion:
    value: float

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)


@dataclass(frozen=True)
class SineAdhesion:
    """alpha(x) = mean + amplitude * sin(k x)."""

    mean: float
    amplitude: float
    k: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.mean + self.amplitude * np.sin(self.k * x)


@dataclass(frozen=True)
class TabulatedAdhesion:
    """Piecewise-linear interpolation of tabulated values."""

    xs: tuple
    values: tuple

    def __post_init__(self):
        if len(self.xs) < 2 or len(self.xs) != len(self.values):
            raise ConfigError("tabulated adhesion needs >= 2 matching (x, value) pairs")
        if np.any(np.diff(self.xs) <= 0):
            raise ConfigError("tabulated adhesion abscissae must be strictly increasing")

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.xs, self.values)


# ---------------------------------------------------------------------------
# boundary conditions


@dataclass(frozen=True)
class Boundary:
    kind: str = "free"  # "dirichlet" or "free"
    value: Optional[float] = None

    @classmethod
    def dirichlet(cls, value: float) -> "Boundary":
        return cls("dirichlet", float(value))

    @classmethod
    def free(cls) -> "Boundary":
        return cls("free", None)

    @property
    def is_dirichlet(self) -> bool:
        return self.kind == "dirichlet"


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scene:
    a: float
    b: float
    obstacle: object
    adhesion: object
    left: Boundary = field(default_factory=Boundary.free)
    right: Boundary = field(default_factory=Boundary.free)
    validation_points: int = 4096
    name: str = "scene"

    def psi(self, x):
        return self.obstacle(x)

    def dpsi(self, x):
        return self.obstacle.d1(x)

    def ddpsi(self, x):
        return self.obstacle.d2(x)

    def alpha(self, x):
        return self.adhesion(x)

    @property
    def length(self) -> float:
        return self.b - self.a

    def validation_grid(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.validation_points)

    def grid(self, n: int) -> np.ndarray:
        """Uniform grid with n nodes."""
        return np.linspace(self.a, self.b, n)

    @property
    def alpha_max(self) -> float:
        return float(np.max(self.alpha(self.validation_grid())))

    @property
    def alpha_min(self) -> float:
        return float(np.min(self.alpha(self.validation_grid())))

    @property
    def contact_tol(self) -> float:
        """Gap below which a node counts as adhered."""
        scale = float(np.max(np.abs(self.psi(self.validation_grid()))))
        return 1e-9 * max(1.0, scale)

    def boundary_height(self, side: str) -> Optional[float]:
        bc = self.left if side == "left" else self.right
        return bc.value if bc.is_dirichlet else None

    def elevated(self, side: str) -> bool:
        """True when a Dirichlet end sits strictly above the obstacle."""
        g = self.boundary_height(side)
        if g is None:
            return False
        x = self.a if side == "left" else self.b
        return g - float(self.psi(x)) > self.contact_tol


def validate_scene(scene: Scene) -> list[str]:
    """Return the list of violated scene invariants (empty when valid)."""
    problems = []
    if not scene.a < scene.b:
        problems.append(f"domain: a < b violated (a={scene.a}, b={scene.b})")
        return problems
    xs = scene.validation_grid()
    try:
        psi = np.asarray(scene.psi(xs), dtype=float)
        dpsi = np.asarray(scene.dpsi(xs), dtype=float)
        ddpsi = np.asarray(scene.ddpsi(xs), dtype=float)
    except Exception as exc:  # noqa: BLE001 - any failure means a broken definition
        raise ConfigError(f"obstacle is not evaluable: {exc}") from exc
    try:
        alpha = np.asarray(scene.alpha(xs), dtype=float)
    except Exception as exc:  # noqa: BLE001
        raise ConfigError(f"adhesion is not evaluable: {exc}") from exc
    for name, arr in (("obstacle", psi), ("obstacle derivative", dpsi),
                      ("obstacle second derivative", ddpsi), ("adhesion", alpha)):
        if arr.shape != xs.shape:
            raise ConfigError(f"{name} returned shape {arr.shape}, expected {xs.shape}")
        if not np.all(np.isfinite(arr)):
            i = int(np.argmin(np.isfinite(arr)))
            problems.append(f"{name} not finite at x={xs[i]:.6g}")
    bad = np.flatnonzero((alpha <= 0.0) | (alpha >= 1.0))
    if bad.size:
        problems.append(
            f"adhesion out of (0,1) at x={xs[bad[0]]:.6g} (alpha={alpha[bad[0]]:.6g})"
        )
    for side, x in (("left", scene.a), ("right", scene.b)):
        bc = scene.left if side == "left" else scene.right
        if bc.kind not in ("dirichlet", "free"):
            problems.append(f"{side} boundary kind {bc.kind!r} unknown")
        elif bc.is_dirichlet:
            if bc.value is None or not np.isfinite(bc.value):
                problems.append(f"{side} boundary value missing")
            elif bc.value < float(scene.psi(x)) - 1e-12 * max(1.0, abs(bc.value)):
                problems.append(
                    f"boundary value below obstacle at {side} endpoint "
                    f"(g={bc.value:.6g}, psi={float(scene.psi(x)):.6g})"
                )
    return problems


def _sliding_extrema(values: np.ndarray, window: int):
    from numpy.lib.stride_tricks import sliding_window_view

    view = sliding_window_view(values, window)
    return view.min(axis=1), view.max(axis=1)


def coupling_margin_width(scene: Scene, max_halvings: int = 40) -> float:
    """Largest dyadic width delta such that every window of that width has
    inf sqrt(1+psi'^2) - alpha_max * sup sqrt(1+psi'^2) >= (1 - alpha_max)/2.

    Extrema over a window are taken over the validation grid.
    """
    xs = scene.validation_grid()
    dx = xs[1] - xs[0]
    stretch = np.sqrt(1.0 + scene.dpsi(xs) ** 2)
    amax = scene.alpha_max
    target = 0.5 * (1.0 - amax)
    for k in range(max_halvings + 1):
        delta = scene.length / 2**k
        window = int(np.floor(delta / dx + 1e-9)) + 1
        window = max(2, min(window, xs.size))
        lo, hi = _sliding_extrema(stretch, window)
        if np.all(lo - amax * hi >= target):
            return delta
    raise RuntimeError("no admissible margin width found; obstacle derivative too rough")


# ---------------------------------------------------------------------------
# preset scenes


def flat_tent(height: float = 0.1, alpha: float = 0.5) -> Scene:
    """Flat obstacle on (0, 1) with equal elevated Dirichlet ends."""
    return Scene(0.0, 1.0, FlatObstacle(0.0), ConstantAdhesion(alpha),
                 Boundary.dirichlet(height), Boundary.dirichlet(height), name="flat")


def sine_ripple(amplitude: float = 0.05, k: float = 8 * np.pi, alpha: float = 0.6,
                height: float = 0.1) -> Scene:
    return Scene(0.0, 1.0, SineObstacle(amplitude, k), ConstantAdhesion(alpha),
                 Boundary.dirichlet(height), Boundary.dirichlet(height), name="ripple")


def twin_minimizer(alpha: float = 0.5) -> Scene:
    """Flat obstacle whose Dirichlet height makes the tent and the straight
    chord tie in E_0: alpha + 2 g sin(theta) = 1 with cos(theta) = alpha."""
    theta = np.arccos(alpha)
    height = (1.0 - alpha) / (2.0 * np.sin(theta))
    return Scene(0.0, 1.0, FlatObstacle(0.0), ConstantAdhesion(alpha),
                 Boundary.dirichlet(height), Boundary.dirichlet(height), name="twin")


def fully_adhered(alpha: float = 0.5) -> Scene:
    return Scene(0.0, 1.0, FlatObstacle(0.0), ConstantAdhesion(alpha),
                 Boundary.dirichlet(0.0), Boundary.dirichlet(0.0), name="adhered")


PRESETS = {
    "flat": flat_tent,
    "ripple": sine_ripple,
    "twin": twin_minimizer,
    "adhered": fully_adhered,
}
