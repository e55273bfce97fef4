"""Convergence of F_eps along the recovery construction on the flat tent scene.

Prints |F_eps[recovery] - F| and the observed log-log rate.
Usage: python scripts/recovery_convergence.py [--n 9]
"""
import argparse

import numpy as np

from adhesim.e0_solver import refine_young, solve_e0_dp
from adhesim.energy import eval_F
from adhesim.gamma_harness import loglog_slope, recovery_study
from adhesim.scene import flat_tent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=9, help="number of eps values in [1e-3, 1e-1]")
    args = ap.parse_args()
    scene = flat_tent()
    pm = refine_young(scene, solve_e0_dp(scene, 800))
    F = eval_F(scene, pm)
    pts = recovery_study(scene, pm, np.logspace(-1, -3, args.n), F)
    for p in pts:
        if p.error is None:
            print(f"eps {p.eps:.4g}: no recovery ({p.message})")
        else:
            print(f"eps {p.eps:.4g}: F_eps {p.F_eps:.7f}  error {p.error:.4g}  "
                  f"error/eps {p.error / p.eps:.2f}")
    ok = [p for p in pts if p.error is not None]
    if len(ok) >= 2:
        print(f"log-log slope {loglog_slope([p.eps for p in ok], [p.error for p in ok]):.3f}")


if __name__ == "__main__":
    main()
