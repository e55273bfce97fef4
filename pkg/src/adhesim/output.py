"""Deterministic CSV, JSON and SVG output."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .energy import GridProfile


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> str:
    with open(path, "w") as fh:
        fh.write(dumps(obj))
    return str(path)


def write_profile_csv(path, profile: GridProfile, extra: dict | None = None) -> str:
    """Columns x, u (and any extra per-node arrays) with round-trip floats."""
    extra = extra or {}
    cols = [profile.xs, profile.us] + [np.asarray(v, dtype=float) for v in extra.values()]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "u"] + list(extra))
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
    return str(path)


def read_profile_csv(path) -> GridProfile:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    ix, iu = header.index("x"), header.index("u")
    xs = np.array([float(r[ix]) for r in body])
    us = np.array([float(r[iu]) for r in body])
    return GridProfile(xs, us)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "adhesim"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    return str(path)


def plot_profiles(path, scene, curves: dict, title: str = "") -> str:
    """Obstacle plus named (xs, us) curves."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    xs = scene.grid(2001)
    ax.fill_between(xs, scene.psi(xs), np.min(scene.psi(xs)) - 0.02, color="0.85", lw=0)
    ax.plot(xs, scene.psi(xs), color="0.3", lw=1, label="obstacle")
    for name, (cx, cu) in curves.items():
        ax.plot(cx, cu, lw=1.2, label=name)
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_sweep(path, report) -> str:
    """(E_eps_min - e0_min)/eps and recovery F_eps against eps, with F."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    eps = np.array([r.eps for r in report.per_eps])
    ratio = np.array([np.nan if r.expansion_ratio is None else r.expansion_ratio
                      for r in report.per_eps])
    rec = np.array([np.nan if r.F_eps_recovery is None else r.F_eps_recovery
                    for r in report.per_eps])
    ax.semilogx(eps, ratio, "o-", label="(min E_eps - min E_0)/eps")
    ax.semilogx(eps, rec, "s--", label="F_eps of recovery profile")
    ax.axhline(report.F_value, color="k", lw=0.8, label="F")
    ax.set_xlabel("eps")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(report.scene)
    fig.tight_layout()
    out = _save(fig, path)
    plt.close(fig)
    return out


def plot_layer(path, layer) -> str:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(layer.xs, layer.us, lw=1.2)
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.set_title(f"layer theta={layer.theta:.4g} eps={layer.eps:.4g}")
    fig.tight_layout()
    out = _save(fig, path)
    plt.close(fig)
    return out


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
