"""Command-line interface: adhesim <command> [options].

Every command writes its results into --out (JSON, CSV and/or SVG, chosen
with repeatable --format) and prints a one-line JSON summary.  Failures
print {"error": ..., "message": ...} and exit nonzero: 2 for bad input,
1 for solver failures.
"""

from __future__ import annotations

import argparse
from dataclasses import asdict
import json
import os
import sys

import numpy as np

from . import __version__
from .config import COMMANDS, FORMATS, RunConfig, load_scene
from .e0_solver import certify_partitional, enumerate_e0_minimizers
from .energy import eval_E0, eval_Eeps, eval_F, eval_Feps
from .curves import invariance_suite
from .gamma_harness import SweepOptions, _solve_one, run_mm_suite, run_sweep
from .layers import (RecoveryError, build_recovery, eval_f, layer_energy_numeric,
                     layer_profile)
from .output import (clean, ensure_dir, plot_layer, plot_profiles, plot_sweep, write_json,
                     write_profile_csv)
from .scene import ConfigError


def _eps_list(text: str) -> list:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adhesim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"adhesim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scene=True):
        if scene:
            sp.add_argument("--scene", required=True,
                            help="scene file (.cfg) or preset name: flat, ripple, twin, adhered")
        sp.add_argument("--out", default=".", help="output directory (default: .)")
        sp.add_argument("--format", dest="formats", action="append", choices=FORMATS,
                        help="output format, repeatable (default: json and csv)")

    sp = sub.add_parser("solve-e0", help="global minimizers of the limit energy")
    common(sp)
    sp.add_argument("--grid", type=int, default=800, help="cells of the search grid")

    sp = sub.add_parser("solve-eps", help="minimize the regularized energy for one eps")
    common(sp)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--grid", type=int, default=800)
    sp.add_argument("--nodes", type=int,
                    help="nodes of the profile grid (default: h = min(2.5e-5, eps/10))")
    sp.add_argument("--init", default="all", choices=("all", "recovery", "tent", "adhered"),
                    help="starting profile(s); 'all' keeps the best")

    sp = sub.add_parser("layer", help="boundary-layer profile for a contact angle")
    common(sp, scene=False)
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--pmin", type=float, help="slope at which the layer is truncated")

    sp = sub.add_parser("recovery", help="recovery profile and its rescaled energy")
    common(sp)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--grid", type=int, default=800)

    sp = sub.add_parser("sweep", help="eps sweep and expansion fit")
    common(sp)
    sp.add_argument("--eps-list", type=_eps_list, required=True,
                    help="strictly decreasing comma-separated eps values")
    sp.add_argument("--grid", type=int, default=800)

    sp = sub.add_parser("check", help="randomized inequality and invariance checks")
    common(sp, scene=False)
    sp.add_argument("--suite", default="mm", choices=("mm", "mm-reparam", "invariance"))
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=None,
                    help="random cases (default 1000 for mm suites, 200 for invariance)")
    return p


def _default(value, fallback):
    return fallback if value is None else value


def _run_config(args) -> RunConfig:
    scene = load_scene(args.scene) if getattr(args, "scene", None) else None
    cfg = RunConfig(
        command=args.command,
        scene_path=getattr(args, "scene", None),
        scene=scene,
        grid=getattr(args, "grid", 800),
        eps=getattr(args, "eps", None),
        eps_list=getattr(args, "eps_list", None) or [],
        seed=getattr(args, "seed", 0),
        out=args.out,
        formats=tuple(args.formats or ("json", "csv")),
        theta=getattr(args, "theta", None),
        p_min=getattr(args, "pmin", None),
        suite=getattr(args, "suite", "mm"),
        trials=_default(getattr(args, "trials", None),
                        200 if getattr(args, "suite", "mm") == "invariance" else 1000),
        nodes=getattr(args, "nodes", None),
        init=getattr(args, "init", "all"),
    )
    cfg.validate()
    return cfg


def _path(cfg, name):
    return os.path.join(cfg.out, name)


def _minimizers(cfg):
    pms = enumerate_e0_minimizers(cfg.scene, cfg.grid)
    F = [eval_F(cfg.scene, pm) for pm in pms]
    sel = int(min(range(len(pms)), key=lambda k: (F[k], pms[k].n_free)))
    return pms, F, sel


def cmd_solve_e0(cfg) -> dict:
    scene = cfg.scene
    pms, F, sel = _minimizers(cfg)
    profile = pms[sel].to_profile(scene, cfg.grid + 1)
    entries = []
    for pm, f in zip(pms, F):
        d = pm.to_dict()
        d["F"] = f
        d["certificate"] = certify_partitional(scene, pm).to_dict()
        entries.append(d)
    result = {"command": "solve-e0", "scene": scene.name, "grid": cfg.grid,
              "e0_min": min(pm.energy for pm in pms), "selected": sel, "minimizers": entries,
              "profile_energy": eval_E0(scene, profile)}
    files = []
    if "json" in cfg.formats:
        files.append(write_json(_path(cfg, "e0.json"), result))
    if "csv" in cfg.formats:
        files.append(write_profile_csv(_path(cfg, "e0_profile.csv"), profile))
    if "svg" in cfg.formats:
        curves = {f"minimizer {k} (N={pm.n_free})": (profile.xs, pm.sample(scene, profile.xs))
                  for k, pm in enumerate(pms)}
        files.append(plot_profiles(_path(cfg, "e0.svg"), scene, curves, f"{scene.name}: E_0"))
    return {"e0_min": result["e0_min"], "F": F[sel], "n_free": pms[sel].n_free, "files": files}


def _sweep_options(cfg, seeds=("recovery", "tent", "adhered")) -> SweepOptions:
    return SweepOptions(grid_size=cfg.grid, seeds=seeds)


def cmd_solve_eps(cfg) -> dict:
    scene, eps = cfg.scene, cfg.eps
    pms, F, sel = _minimizers(cfg)
    seeds = ("recovery", "tent", "adhered") if cfg.init == "all" else (cfg.init,)
    opts = _sweep_options(cfg, seeds)
    if cfg.nodes is not None:
        # refined further when needed so that h <= eps / 10
        opts = SweepOptions(grid_size=cfg.grid, seeds=seeds, h=scene.length / (cfg.nodes - 1))
    e0_min = min(pm.energy for pm in pms)
    rec, profile = _solve_one((scene, eps, pms, sel, e0_min, opts))
    if profile is None:
        raise RuntimeError("no starting profile could be minimized: " + "; ".join(rec.errors))
    br = eval_Eeps(scene, profile, eps)
    result = {"command": "solve-eps", "scene": scene.name, "eps": eps, "e0_min": e0_min,
              "F": F[sel], "energy": br.to_record(), "record": rec.__dict__}
    files = []
    if "json" in cfg.formats:
        files.append(write_json(_path(cfg, "eps.json"), result))
    if "csv" in cfg.formats:
        files.append(write_profile_csv(_path(cfg, "eps_profile.csv"), profile))
    if "svg" in cfg.formats:
        files.append(plot_profiles(_path(cfg, "eps.svg"), scene,
                                   {f"eps={eps:g}": (profile.xs, profile.us)},
                                   f"{scene.name}: E_eps minimizer"))
    return {"energy": br.total, "expansion_ratio": rec.expansion_ratio, "files": files}


def cmd_layer(cfg) -> dict:
    layer = layer_profile(cfg.theta, cfg.eps, cfg.p_min)
    result = {"command": "layer", "theta": layer.theta, "eps": layer.eps,
              "x_min": layer.x_min, "slope_min": layer.slope_min,
              "energy": layer.energy(), "energy_numeric": layer_energy_numeric(layer),
              "f_tan_theta": eval_f(float(np.tan(cfg.theta))),
              "max_equipartition_residual": float(np.max(np.abs(layer.equipartition_residual())))}
    files = []
    if "json" in cfg.formats:
        files.append(write_json(_path(cfg, "layer.json"), result))
    if "csv" in cfg.formats:
        path = _path(cfg, "layer.csv")
        layer.to_csv(path)
        files.append(path)
    if "svg" in cfg.formats:
        files.append(plot_layer(_path(cfg, "layer.svg"), layer))
    return {"energy": result["energy"], "x_min": layer.x_min, "files": files}


def cmd_recovery(cfg) -> dict:
    scene, eps = cfg.scene, cfg.eps
    pms, F, sel = _minimizers(cfg)
    pm = pms[sel]
    profile = build_recovery(scene, pm, eps)
    e0_min = min(p.energy for p in pms)
    fe = eval_Feps(scene, profile, eps, e0_min)
    result = {"command": "recovery", "scene": scene.name, "eps": eps, "e0_min": e0_min,
              "F": F[sel], "F_eps": fe, "error": fe - F[sel],
              "energy": eval_Eeps(scene, profile, eps).to_record()}
    files = []
    if "json" in cfg.formats:
        files.append(write_json(_path(cfg, "recovery.json"), result))
    if "csv" in cfg.formats:
        files.append(write_profile_csv(_path(cfg, "recovery_profile.csv"), profile))
    if "svg" in cfg.formats:
        files.append(plot_profiles(_path(cfg, "recovery.svg"), scene,
                                   {"E_0 minimizer": (profile.xs, pm.sample(scene, profile.xs)),
                                    f"recovery eps={eps:g}": (profile.xs, profile.us)},
                                   f"{scene.name}: recovery"))
    return {"F_eps": fe, "F": F[sel], "files": files}


def cmd_sweep(cfg) -> dict:
    report = run_sweep(cfg.scene, cfg.eps_list, _sweep_options(cfg))
    files = []
    if "json" in cfg.formats:
        path = _path(cfg, "sweep.json")
        with open(path, "w") as fh:
            fh.write(report.to_json() + "\n")
        files.append(path)
    if "csv" in cfg.formats:
        path = _path(cfg, "sweep.csv")
        with open(path, "w") as fh:
            fh.write(report.to_csv())
        files.append(path)
        for k, (eps, prof) in enumerate(sorted(report.profiles.items(), reverse=True)):
            files.append(write_profile_csv(_path(cfg, f"sweep_profile_{k}.csv"), prof))
    if "svg" in cfg.formats:
        files.append(plot_sweep(_path(cfg, "sweep.svg"), report))
    return {"e0_min": report.e0_min, "F": report.F_value, "fit": report.fit, "files": files}


def cmd_check(cfg) -> dict:
    if cfg.suite == "invariance":
        rep = invariance_suite(cfg.seed, cfg.trials)
        result = {"command": "check", "suite": cfg.suite, "passed": rep.passed, **asdict(rep)}
        worst = max(rep.max_rigid_error, rep.max_reparam_error)
        report = f"max relative error {worst:.3g} <= {rep.tol:g} over {rep.cases} cases"
        summary = {"passed": rep.passed, "max_error": worst}
    else:
        res = run_mm_suite(cfg.seed, cfg.trials, reparameterize=cfg.suite == "mm-reparam")
        result = {"command": "check", "suite": cfg.suite, **res.to_dict()}
        report = f"min margin {res.min_margin:.6g} >= -1e-09 over {res.evaluations} evaluations"
        summary = {"passed": res.passed, "min_margin": res.min_margin}
    if not summary["passed"]:
        report = report.replace("<=", "exceeds").replace(">=", "below")
    result["report"] = report
    files = []
    if "json" in cfg.formats:
        files.append(write_json(_path(cfg, "check.json"), result))
    return {**summary, "report": report, "files": files}


HANDLERS = {"solve-e0": cmd_solve_e0, "solve-eps": cmd_solve_eps, "layer": cmd_layer,
            "recovery": cmd_recovery, "sweep": cmd_sweep, "check": cmd_check}
assert set(HANDLERS) == set(COMMANDS)


def _fail(kind: str, exc: Exception, code: int) -> int:
    sys.stdout.write(json.dumps({"error": kind, "message": str(exc)}, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _run_config(args)
        ensure_dir(cfg.out)
    except (ConfigError, OSError) as exc:
        return _fail("ConfigError", exc, 2)
    try:
        summary = HANDLERS[cfg.command](cfg)
    except RecoveryError as exc:
        return _fail("RecoveryError", exc, 1)
    except (ValueError, RuntimeError) as exc:
        return _fail(type(exc).__name__, exc, 1)
    sys.stdout.write(json.dumps(clean({"command": cfg.command, **summary}), sort_keys=True) + "\n")
    if cfg.command == "check" and not summary["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
