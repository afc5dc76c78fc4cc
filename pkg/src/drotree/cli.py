"""Command-line front end: solve, classify, assess, sweep, gen.

All file outputs are deterministic: dict keys are emitted in a fixed
order and floats are printed with 17 significant digits, so identical
inputs and flags give byte-identical artifacts. Values that are +inf in
Python (infeasible assessments) are written as null next to an
"infeasible": true flag, since JSON has no Infinity.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .effectiveness import (
    EFFECTIVE,
    INEFFECTIVE,
    UNIDENTIFIED,
    ClassifierSettings,
    classification_report,
    classify_paths,
    classify_tree,
    to_dot,
)
from .errors import DrotreeError, InstanceInfeasible, InstanceUnbounded, ParseError
from .gen import gen_random, gen_water_analog
from .lp import write_cplex_lp
from .oracle import (
    PATHS,
    REALIZATIONS,
    RemovalSet,
    assess_paths,
    assess_realizations,
    assessment_json,
)
from .solver import build_extensive, solve_benders, solve_extensive
from .tree import load_instance, to_dict, with_uniform_gamma

USAGE_ERROR = 2
INSTANCE_ERROR = 3
DISAGREEMENT_ERROR = 4


# ---------------------------------------------------------------- output

def format_float(x: float) -> str:
    if isinstance(x, float) and not math.isfinite(x):
        raise ValueError("non-finite float reached the writer; map to null first")
    s = format(float(x), ".17g")
    return s


def dump_json(obj, indent: int = 0) -> str:
    """Minimal JSON writer with a fixed float format and insertion-order
    keys, so outputs are reproducible byte for byte."""
    pad = "  " * indent
    if obj is None:
        return "null"
    if obj is True or obj is False:
        return "true" if obj else "false"
    if isinstance(obj, int):
        return repr(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        import json as _json
        return _json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = ",\n".join(
            f'{pad}  {dump_json(str(k))}: {dump_json(v, indent + 1)}'
            for k, v in obj.items())
        return "{\n" + inner + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not len(obj):
            return "[]"
        inner = ",\n".join(f"{pad}  {dump_json(v, indent + 1)}" for v in obj)
        return "[\n" + inner + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(text: str, out_path: str | None):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _floats(seq) -> list[float]:
    return [float(v) for v in seq]


# ---------------------------------------------------------------- solve

def _outcome_json(tree, out) -> dict:
    order = [n.id for n in tree.nodes]
    return {
        "instance": tree.name,
        "solver": out.solver,
        "objective": out.objective,
        "gap": out.gap,
        "passes": out.passes,
        "gamma": _floats(tree.gamma),
        "policy": {nid: _floats(out.policy[nid]) for nid in order},
        "q_values": {nid: out.q_values[nid] for nid in order},
        "worst_case": {nid: _floats(out.worst_case[nid])
                       for nid in order if nid in out.worst_case},
    }


def _cmd_solve(args) -> int:
    tree = load_instance(args.instance)
    if args.dump_lp:
        lp, _ = build_extensive(tree)
        with open(args.dump_lp, "w") as fh:
            fh.write(write_cplex_lp(lp))
    if args.solver == "both":
        ext = solve_extensive(tree)
        ben = solve_benders(tree, tol=args.tol)
        rel = abs(ext.objective - ben.objective) / max(1.0, abs(ext.objective))
        blob = _outcome_json(tree, ext)
        blob["cross_check"] = {
            "extensive": ext.objective,
            "benders": ben.objective,
            "rel_diff": rel,
            "benders_gap": ben.gap,
            "benders_passes": ben.passes,
        }
        print(f"extensive {format_float(ext.objective)}  "
              f"benders {format_float(ben.objective)}  "
              f"rel_diff {format_float(rel)}", file=sys.stderr)
    else:
        out = (solve_extensive(tree) if args.solver == "extensive"
               else solve_benders(tree, tol=args.tol))
        blob = _outcome_json(tree, out)
    _emit(dump_json(blob) + "\n", args.out)
    return 0


# ---------------------------------------------------------------- classify

def _oracle_check_items(tree, cond, paths):
    items = []
    for nid, cl in cond.items():
        if cl.label != UNIDENTIFIED:
            items.append(("cond", nid, cl.label))
    for pl in paths:
        if pl.label != UNIDENTIFIED:
            items.append(("path", pl.leaf, pl.label))
    return items


def _run_oracle_checks(tree, out, items):
    """Compare identified labels with re-solve verdicts; returns one
    record per checked item."""
    records = []
    for kind, nid, label in items:
        if kind == "cond":
            got = assess_realizations(
                tree, RemovalSet(REALIZATIONS, frozenset({nid})), out)
            res = got[tree.parent(nid)]
        else:
            res = assess_paths(tree, RemovalSet(PATHS, frozenset({nid})), out)
        records.append({
            "kind": kind,
            "id": nid,
            "label": label,
            "verdict": res.verdict,
            "agree": res.verdict == label,
            "value": None if res.infeasible else res.value,
            "baseline": res.baseline,
            "infeasible": res.infeasible,
        })
    return records


def _oracle_worker(payload):
    path, items = payload
    tree = load_instance(path)
    out = solve_extensive(tree)
    return _run_oracle_checks(tree, out, items)


def _chunks(seq, n):
    k = max(1, math.ceil(len(seq) / n))
    return [seq[i:i + k] for i in range(0, len(seq), k)]


def _cmd_classify(args) -> int:
    tree = load_instance(args.instance)
    out = solve_extensive(tree)
    settings = ClassifierSettings(c2_mass_rule=args.c2_rule)
    rep = classification_report(tree, out, settings)

    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(to_dot(tree, classify_tree(tree, out, settings)))

    disagreements = 0
    if args.oracle:
        cond = classify_tree(tree, out, settings)
        paths = classify_paths(tree, out, settings, cond)
        items = _oracle_check_items(tree, cond, paths)
        jobs = _resolve_jobs(args.jobs)
        if jobs > 1 and len(items) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                parts = pool.map(
                    _oracle_worker,
                    [(args.instance, chunk) for chunk in _chunks(items, jobs)])
                records = [r for part in parts for r in part]
        else:
            records = _run_oracle_checks(tree, out, items)
        disagreements = sum(1 for r in records if not r["agree"])
        rep["oracle"] = {
            "n_checked": len(records),
            "n_disagreements": disagreements,
            "disagreements": [r for r in records if not r["agree"]],
        }

    _emit(dump_json(rep) + "\n", args.out)
    s = rep["summary"]
    print(f"paths: {s['n_effective_paths']} effective, "
          f"{s['n_ineffective']} ineffective, "
          f"{s['n_unidentified']} unidentified", file=sys.stderr)
    if args.oracle:
        print(f"oracle: {rep['oracle']['n_checked']} checked, "
              f"{disagreements} disagreements", file=sys.stderr)
        if args.strict and disagreements:
            return DISAGREEMENT_ERROR
    return 0


# ---------------------------------------------------------------- assess

def _cmd_assess(args) -> int:
    tree = load_instance(args.instance)
    out = solve_extensive(tree)
    results = []
    if args.paths:
        removal = RemovalSet(PATHS, frozenset(args.paths.split(",")))
        res = assess_paths(tree, removal, out)
        results.append(assessment_json(removal, res))
    else:
        removal = RemovalSet(REALIZATIONS,
                             frozenset(args.realizations.split(",")))
        for nid, res in assess_realizations(tree, removal, out).items():
            results.append(assessment_json(removal, res))
    blob = {"instance": tree.name, "baseline": out.objective,
            "results": results}
    _emit(dump_json(blob) + "\n", args.out)
    return 0


# ---------------------------------------------------------------- sweep

def _parse_grid(spec: str) -> list[float]:
    try:
        a, b, step = (float(tok) for tok in spec.split(":"))
    except ValueError:
        raise ParseError(f"bad --gamma grid {spec!r}; expected a:b:step")
    if step <= 0 or b < a:
        raise ParseError(f"bad --gamma grid {spec!r}; need step > 0 and b >= a")
    if a < 0.0 or b > 1.0:
        raise ParseError(f"bad --gamma grid {spec!r}; must stay inside [0, 1]")
    pts, i = [], 0
    while True:
        g = round(a + i * step, 12)
        if g > b + 1e-12:
            break
        pts.append(min(g, 1.0))
        i += 1
    return pts


def _sweep_point(tree, gamma):
    t = with_uniform_gamma(tree, gamma)
    out = solve_extensive(t)
    labels = [p.label for p in classify_paths(t, out)]
    return {
        "gamma": gamma,
        "objective": out.objective,
        "n_effective_paths": labels.count(EFFECTIVE),
        "n_ineffective": labels.count(INEFFECTIVE),
        "n_unidentified": labels.count(UNIDENTIFIED),
    }


def _sweep_worker(payload):
    path, gammas = payload
    tree = load_instance(path)
    return [_sweep_point(tree, g) for g in gammas]


def _cmd_sweep(args) -> int:
    tree = load_instance(args.instance)
    grid = _parse_grid(args.gamma)
    jobs = _resolve_jobs(args.jobs)
    if jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(_sweep_worker,
                             [(args.instance, chunk)
                              for chunk in _chunks(grid, jobs)])
            rows = [r for part in parts for r in part]
    else:
        rows = [_sweep_point(tree, g) for g in grid]
    lines = ["gamma,objective,n_effective_paths,n_ineffective,n_unidentified"]
    for r in rows:
        lines.append(",".join([
            format_float(r["gamma"]),
            format_float(r["objective"]),
            str(r["n_effective_paths"]),
            str(r["n_ineffective"]),
            str(r["n_unidentified"]),
        ]))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


# ---------------------------------------------------------------- gen

def _cmd_gen(args) -> int:
    if args.random:
        try:
            seed, t, branch = (int(tok) for tok in args.random.split(","))
        except ValueError:
            raise ParseError(
                f"bad --random spec {args.random!r}; expected seed,T,branch")
        kwargs = {}
        if args.gamma is not None:
            kwargs["gamma"] = args.gamma
        tree = gen_random(seed=seed, T=t, branching=branch, **kwargs)
    else:
        try:
            seed = int(args.water)
        except ValueError:
            raise ParseError(f"bad --water seed {args.water!r}")
        kwargs = {}
        if args.gamma is not None:
            kwargs["gamma"] = args.gamma
        tree = gen_water_analog(seed=seed, **kwargs)
    _emit(dump_json(to_dict(tree)) + "\n", args.out)
    return 0


# ---------------------------------------------------------------- wiring

def _resolve_jobs(value) -> int:
    if value is not None:
        return max(1, int(value))
    env = os.environ.get("DROTREE_JOBS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParseError(f"bad DROTREE_JOBS value {env!r}")
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="drotree",
        description="Robust scenario-tree solve and scenario effectiveness "
                    "analysis.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="solve one instance")
    sp.add_argument("instance")
    sp.add_argument("--solver", choices=["extensive", "benders", "both"],
                    default="extensive")
    sp.add_argument("--tol", type=float, default=1e-6,
                    help="benders stopping gap")
    sp.add_argument("--out", help="write solution JSON here (default stdout)")
    sp.add_argument("--dump-lp", help="also write the extensive LP in "
                                      "CPLEX LP format")
    sp.set_defaults(func=_cmd_solve)

    cp = sub.add_parser("classify", help="label realizations and paths")
    cp.add_argument("instance")
    cp.add_argument("--oracle", action="store_true",
                    help="re-check every identified label by re-solving")
    cp.add_argument("--strict", action="store_true",
                    help="exit 4 when the oracle disagrees")
    cp.add_argument("--c2-rule", dest="c2_rule",
                    choices=["c1_plus_c2", "c2_only"], default="c1_plus_c2",
                    help="mass rule for children sitting exactly at the "
                         "quantile (default c1_plus_c2)")
    cp.add_argument("--out", help="write report JSON here (default stdout)")
    cp.add_argument("--dot", help="write a graphviz rendering here")
    cp.add_argument("--jobs", type=int, default=None,
                    help="worker processes for oracle checks "
                         "(default: DROTREE_JOBS or cpu count)")
    cp.set_defaults(func=_cmd_classify)

    ap = sub.add_parser("assess", help="re-solve with removals")
    ap.add_argument("instance")
    g = ap.add_mutually_exclusive_group(required=True)
    g.add_argument("--paths", help="comma-separated leaf ids to remove")
    g.add_argument("--realizations",
                   help="comma-separated same-stage node ids to remove")
    ap.add_argument("--out", help="write assessment JSON here (default stdout)")
    ap.set_defaults(func=_cmd_assess)

    wp = sub.add_parser("sweep", help="solve across a gamma grid")
    wp.add_argument("instance")
    wp.add_argument("--gamma", required=True,
                    help="grid a:b:step, applied uniformly to all stages")
    wp.add_argument("--out", help="write CSV here (default stdout)")
    wp.add_argument("--jobs", type=int, default=None,
                    help="worker processes (default: DROTREE_JOBS or cpu count)")
    wp.set_defaults(func=_cmd_sweep)

    gp = sub.add_parser("gen", help="write a generated instance")
    gg = gp.add_mutually_exclusive_group(required=True)
    gg.add_argument("--random", help="seed,T,branch")
    gg.add_argument("--water", help="seed")
    gp.add_argument("--gamma", type=float, default=None,
                    help="uniform radius for the generated instance")
    gp.add_argument("--out", help="write instance JSON here (default stdout)")
    gp.set_defaults(func=_cmd_gen)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InstanceInfeasible, InstanceUnbounded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INSTANCE_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except DrotreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
