"""Timing and agreement of the two solve methods on growing trees."""
import argparse
import time

from drotree.gen import gen_random
from drotree.solver import solve_benders, solve_extensive


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=3,
                    help="instances per shape (default 3)")
    ap.add_argument("--tol", type=float, default=1e-8)
    args = ap.parse_args()

    shapes = [(2, 3), (3, 2), (3, 3), (3, 4), (4, 2), (4, 3)]
    print(f"{'T':>2} {'branch':>6} {'nodes':>6} {'ext_s':>8} {'ben_s':>8} "
          f"{'passes':>6} {'gap':>9} {'rel_diff':>9}")
    for T, b in shapes:
        for s in range(args.seeds):
            tree = gen_random(6000 + 10 * T + b + s, T=T, branching=b,
                              gamma=0.4)
            t0 = time.perf_counter()
            ext = solve_extensive(tree)
            te = time.perf_counter() - t0
            t0 = time.perf_counter()
            ben = solve_benders(tree, tol=args.tol)
            tb = time.perf_counter() - t0
            rel = abs(ext.objective - ben.objective) / max(
                1.0, abs(ext.objective))
            print(f"{T:2d} {b:6d} {len(tree.nodes):6d} {te:8.3f} {tb:8.3f} "
                  f"{ben.passes:6d} {ben.gap:9.2e} {rel:9.2e}")


if __name__ == "__main__":
    main()
