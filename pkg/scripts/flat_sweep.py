"""Multi-start eps sweep on the flat tent scene and the affine fit of the minima.

Usage: python scripts/flat_sweep.py [--out DIR] [--eps-list 1e-1,...]
Takes about six minutes on one core at the default grid spacing.
"""
import argparse
import time
from pathlib import Path

from adhesim.gamma_harness import run_sweep
from adhesim.output import plot_sweep
from adhesim.scene import flat_tent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/flat_sweep")
    ap.add_argument("--eps-list", default="1e-1,0.0316227766016838,1e-2,0.00316227766016838,1e-3")
    args = ap.parse_args()
    eps = [float(v) for v in args.eps_list.split(",")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rep = run_sweep(flat_tent(), eps)
    print(f"sweep finished in {time.perf_counter() - t0:.1f} s")
    for r in rep.per_eps:
        print(f"eps {r.eps:.4g}: E_eps_min {r.E_eps_min:.9f}  ratio {r.expansion_ratio:.5f}  "
              f"best seed {r.best_seed}")
    fit = rep.fit
    print(f"fit: intercept {fit['intercept']:.7f} (e0_min {rep.e0_min:.7f}), "
          f"slope {fit['slope']:.5f} (F {rep.F_value:.7f})")
    (out / "sweep.json").write_text(rep.to_json())
    (out / "sweep.csv").write_text(rep.to_csv())
    plot_sweep(str(out / "sweep.svg"), rep)


if __name__ == "__main__":
    main()
