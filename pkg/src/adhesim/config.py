"""Scene files and run configuration.

Scene files are INI-style::

    [domain]
    a = 0
    b = 1
    name = flat

    [obstacle]
    kind = flat          ; flat | sine | polynomial | tabulated
    value = 0

    [adhesion]
    kind = constant      ; constant | sine | tabulated
    value = 0.5

    [boundary]
    left = dirichlet 0.1 ; or: free
    right = dirichlet 0.1
"""

from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import dataclass, field
from typing import Optional

from .scene import (PRESETS, Boundary, ConfigError, ConstantAdhesion, FlatObstacle,
                    PolynomialObstacle, Scene, SineAdhesion, SineObstacle, TabulatedAdhesion,
                    TabulatedObstacle, validate_scene)

COMMANDS = ("solve-e0", "solve-eps", "layer", "recovery", "sweep", "check")
SUITES = ("mm", "mm-reparam", "invariance")
FORMATS = ("csv", "json", "svg")


class _Reader:
    def __init__(self, parser, text: str, source: str):
        self.parser = parser
        self.lines = text.splitlines()
        self.source = source

    def _line(self, section, key=None) -> Optional[int]:
        in_section = False
        for no, line in enumerate(self.lines, start=1):
            stripped = line.strip()
            if stripped.startswith("["):
                in_section = stripped.lower() == f"[{section}]"
                if in_section and key is None:
                    return no
                continue
            if in_section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", stripped):
                return no
        return None

    def where(self, section, key=None) -> str:
        name = f"{section}.{key}" if key else f"[{section}]"
        no = self._line(section, key)
        return f"{self.source}:{no}: {name}" if no else f"{self.source}: {name}"

    def get(self, section, key, default=None, required=True) -> Optional[str]:
        if not self.parser.has_section(section):
            if required and default is None:
                raise ConfigError(f"{self.source}: missing section [{section}]")
            return default
        if not self.parser.has_option(section, key):
            if required and default is None:
                raise ConfigError(f"{self.where(section)}: missing key {section}.{key}")
            return default
        return self.parser.get(section, key)

    def number(self, section, key, default=None) -> float:
        raw = self.get(section, key, None if default is None else str(default))
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: expected a number, got {raw!r}") from None

    def numbers(self, section, key) -> tuple:
        raw = self.get(section, key)
        try:
            return tuple(float(v) for v in re.split(r"[,\s]+", raw.strip()) if v)
        except ValueError:
            raise ConfigError(f"{self.where(section, key)}: expected a list of numbers") from None


def _obstacle(r: _Reader):
    kind = r.get("obstacle", "kind").strip().lower()
    if kind == "flat":
        return FlatObstacle(r.number("obstacle", "value", 0.0))
    if kind == "sine":
        return SineObstacle(r.number("obstacle", "amplitude"), r.number("obstacle", "k"),
                            r.number("obstacle", "offset", 0.0), r.number("obstacle", "phase", 0.0))
    if kind == "polynomial":
        return PolynomialObstacle(r.numbers("obstacle", "coeffs"))
    if kind == "tabulated":
        return TabulatedObstacle(r.numbers("obstacle", "xs"), r.numbers("obstacle", "values"))
    raise ConfigError(f"{r.where('obstacle', 'kind')}: unknown obstacle kind {kind!r}")


def _adhesion(r: _Reader):
    kind = r.get("adhesion", "kind").strip().lower()
    if kind == "constant":
        return ConstantAdhesion(r.number("adhesion", "value"))
    if kind == "sine":
        return SineAdhesion(r.number("adhesion", "mean"), r.number("adhesion", "amplitude"),
                            r.number("adhesion", "k"))
    if kind == "tabulated":
        return TabulatedAdhesion(r.numbers("adhesion", "xs"), r.numbers("adhesion", "values"))
    raise ConfigError(f"{r.where('adhesion', 'kind')}: unknown adhesion kind {kind!r}")


def _boundary(r: _Reader, side: str) -> Boundary:
    raw = r.get("boundary", side).strip().lower().split()
    if raw == ["free"]:
        return Boundary.free()
    if len(raw) == 2 and raw[0] == "dirichlet":
        try:
            return Boundary.dirichlet(float(raw[1]))
        except ValueError:
            pass
    raise ConfigError(f"{r.where('boundary', side)}: expected 'free' or 'dirichlet <value>'")


def parse_scene(text: str, source: str = "<string>") -> Scene:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    r = _Reader(parser, text, source)
    a, b = r.number("domain", "a"), r.number("domain", "b")
    name = r.get("domain", "name", "scene")
    scene = Scene(a, b, _obstacle(r), _adhesion(r), _boundary(r, "left"),
                  _boundary(r, "right"), name=name)
    problems = validate_scene(scene)
    if problems:
        raise ConfigError(f"{source}: invalid scene: " + "; ".join(problems))
    return scene


def load_scene(name: str) -> Scene:
    """A scene file path, or the name of a bundled preset."""
    if os.path.isfile(name):
        with open(name) as fh:
            return parse_scene(fh.read(), name)
    stem = os.path.splitext(os.path.basename(name))[0]
    if stem in PRESETS and os.path.sep not in name:
        return PRESETS[stem]()
    raise ConfigError(f"scene file {name!r} not found (presets: {', '.join(sorted(PRESETS))})")


def _fmt(v: float) -> str:
    return repr(float(v))


def dump_scene(scene: Scene) -> str:
    """Scene file text for the supported obstacle and adhesion types."""
    ob, ad = scene.obstacle, scene.adhesion
    lines = ["[domain]", f"a = {_fmt(scene.a)}", f"b = {_fmt(scene.b)}", f"name = {scene.name}", "",
             "[obstacle]"]
    if isinstance(ob, FlatObstacle):
        lines += ["kind = flat", f"value = {_fmt(ob.value)}"]
    elif isinstance(ob, SineObstacle):
        lines += ["kind = sine", f"amplitude = {_fmt(ob.amplitude)}", f"k = {_fmt(ob.k)}",
                  f"offset = {_fmt(ob.offset)}", f"phase = {_fmt(ob.phase)}"]
    elif isinstance(ob, PolynomialObstacle):
        lines += ["kind = polynomial", "coeffs = " + ", ".join(map(_fmt, ob.coeffs))]
    elif isinstance(ob, TabulatedObstacle):
        lines += ["kind = tabulated", "xs = " + ", ".join(map(_fmt, ob.xs)),
                  "values = " + ", ".join(map(_fmt, ob.values))]
    else:
        raise ConfigError(f"cannot serialize obstacle {type(ob).__name__}")
    lines += ["", "[adhesion]"]
    if isinstance(ad, ConstantAdhesion):
        lines += ["kind = constant", f"value = {_fmt(ad.value)}"]
    elif isinstance(ad, SineAdhesion):
        lines += ["kind = sine", f"mean = {_fmt(ad.mean)}", f"amplitude = {_fmt(ad.amplitude)}",
                  f"k = {_fmt(ad.k)}"]
    elif isinstance(ad, TabulatedAdhesion):
        lines += ["kind = tabulated", "xs = " + ", ".join(map(_fmt, ad.xs)),
                  "values = " + ", ".join(map(_fmt, ad.values))]
    else:
        raise ConfigError(f"cannot serialize adhesion {type(ad).__name__}")
    lines += ["", "[boundary]"]
    for side, bc in (("left", scene.left), ("right", scene.right)):
        lines.append(f"{side} = dirichlet {_fmt(bc.value)}" if bc.is_dirichlet else f"{side} = free")
    return "\n".join(lines) + "\n"


@dataclass
class RunConfig:
    command: str
    scene_path: Optional[str] = None
    scene: Optional[Scene] = None
    grid: int = 800
    eps: Optional[float] = None
    eps_list: list = field(default_factory=list)
    seed: int = 0
    out: str = "."
    formats: tuple = ("json", "csv")
    theta: Optional[float] = None
    p_min: Optional[float] = None
    suite: str = "mm"
    trials: int = 1000
    nodes: Optional[int] = None
    init: str = "recovery"

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.grid < 8:
            raise ConfigError(f"--grid must be at least 8, got {self.grid}")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ConfigError(f"unknown output format(s): {', '.join(bad)}")
        if self.eps is not None and not self.eps > 0:
            raise ConfigError("--eps must be positive")
        if any(e <= 0 for e in self.eps_list):
            raise ConfigError("--eps-list values must be positive")
        if any(b >= a for a, b in zip(self.eps_list, self.eps_list[1:])):
            raise ConfigError("--eps-list must be strictly decreasing")
        needs_scene = self.command in ("solve-e0", "solve-eps", "recovery", "sweep")
        if needs_scene and self.scene is None:
            raise ConfigError(f"{self.command} requires --scene")
        if self.command in ("solve-eps", "recovery") and self.eps is None:
            raise ConfigError(f"{self.command} requires --eps")
        if self.command == "sweep" and len(self.eps_list) < 3:
            raise ConfigError("sweep requires --eps-list with at least 3 values")
        if self.command == "layer" and (self.theta is None or self.eps is None):
            raise ConfigError("layer requires --theta and --eps")
        if self.trials < 1:
            raise ConfigError(f"--trials must be positive, got {self.trials}")
        if self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}")
        if self.theta is not None and not 0.0 < self.theta < math.pi / 2:
            raise ConfigError(f"--theta must lie in (0, pi/2), got {self.theta}")


def load_config(path: str, command: str = "solve-e0", **params) -> RunConfig:
    """RunConfig for a scene file (validated) and command parameters."""
    cfg = RunConfig(command=command, scene_path=path, scene=load_scene(path), **params)
    cfg.validate()
    return cfg
