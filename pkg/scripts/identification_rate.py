"""How much does the cheap classifier identify, and how fast, compared
with brute-force re-solving?

For a batch of random instances per radius: classify every realization
and path, verify each identified label against the assessment oracle,
and time both passes. Disagreements should always print as 0; the point
of the table is the identified fraction and the speedup.
"""
import argparse
import time

from drotree.effectiveness import UNIDENTIFIED, classify_paths, classify_tree
from drotree.gen import gen_random
from drotree.oracle import (PATHS, REALIZATIONS, RemovalSet, assess_paths,
                            assess_realizations)
from drotree.solver import solve_extensive


def run_batch(gamma, n_instances, branching, seed0):
    identified = total = disagreements = 0
    t_classify = t_oracle = 0.0
    for i in range(n_instances):
        tree = gen_random(seed0 + i, T=3, branching=branching, gamma=gamma)
        out = solve_extensive(tree)

        t0 = time.perf_counter()
        cond = classify_tree(tree, out)
        paths = classify_paths(tree, out, cond=cond)
        t_classify += time.perf_counter() - t0

        t0 = time.perf_counter()
        for nid, cl in cond.items():
            total += 1
            if cl.label == UNIDENTIFIED:
                continue
            identified += 1
            res = assess_realizations(
                tree, RemovalSet(REALIZATIONS, frozenset([nid])), out)
            if res[tree.parent(nid)].verdict != cl.label:
                disagreements += 1
        for pl in paths:
            total += 1
            if pl.label == UNIDENTIFIED:
                continue
            identified += 1
            res = assess_paths(tree, RemovalSet(PATHS, frozenset([pl.leaf])),
                               out)
            if res.verdict != pl.label:
                disagreements += 1
        t_oracle += time.perf_counter() - t0
    return identified, total, disagreements, t_classify, t_oracle


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--branching", type=int, default=3)
    ap.add_argument("--seed0", type=int, default=9000)
    ap.add_argument("--gammas", default="0.1,0.3,0.5,0.7,0.9")
    args = ap.parse_args()

    print(f"{'gamma':>6} {'identified':>11} {'fraction':>9} "
          f"{'disagree':>9} {'classify_s':>11} {'oracle_s':>9} {'speedup':>8}")
    for tok in args.gammas.split(","):
        g = float(tok)
        ident, total, dis, tc, to = run_batch(
            g, args.instances, args.branching, args.seed0)
        speed = to / tc if tc > 0 else float("inf")
        print(f"{g:6.2f} {ident:6d}/{total:<4d} {ident / total:9.3f} "
              f"{dis:9d} {tc:11.3f} {to:9.3f} {speed:7.0f}x")


if __name__ == "__main__":
    main()
