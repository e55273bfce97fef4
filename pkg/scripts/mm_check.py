"""Random-curve check of eps B + (L - chord)/eps >= W and of the invariance suite.

Usage: python scripts/mm_check.py [--seed 0] [--trials 1000]
"""
import argparse
import time

from adhesim.curves import invariance_suite
from adhesim.gamma_harness import run_mm_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=1000)
    args = ap.parse_args()
    for reparam in (False, True):
        t0 = time.perf_counter()
        res = run_mm_suite(args.seed, args.trials, reparameterize=reparam)
        print(f"{'reparameterized' if reparam else 'plain'} curves: min margin "
              f"{res.min_margin:.6g} over {res.evaluations} evaluations "
              f"(worst {res.worst}); {time.perf_counter() - t0:.1f} s")
    t0 = time.perf_counter()
    rep = invariance_suite(args.seed, 200)
    print(f"invariance: rigid {rep.max_rigid_error:.2e}, reparameterization "
          f"{rep.max_reparam_error:.2e}; {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
