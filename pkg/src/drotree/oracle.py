"""Ground-truth effectiveness by re-solving.

The definitions are operational: a set of scenario paths (or of
stage-(t+1) realizations) is effective exactly when forcing it to zero
probability in the relevant ambiguity sets strictly lowers the optimal
value. This module builds those restricted problems and compares optimal
values, with no shortcuts, so it can arbitrate the cheap classifier in
effectiveness.py. All solves go through the extensive-form builder;
Benders never touches verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .effectiveness import EFFECTIVE, INEFFECTIVE, eff_tolerance
from .errors import InstanceInfeasible, InvalidRemoval, NotSolved, NumericalBreakdown
from .solver import SolveOutcome, _evaluate, _solve_or_raise, build_extensive, check_removals, solve_extensive
from .tree import ScenarioTree

# decreases between eff_tolerance and this multiple of it are flagged
BORDERLINE_FACTOR = 10.0

PATHS = "Paths"
REALIZATIONS = "Realizations"


@dataclass(frozen=True)
class RemovalSet:
    """Nodes to force to zero probability: leaves for path assessment,
    one stage's nodes for conditional assessment."""

    kind: str
    ids: frozenset[str]

    def __post_init__(self):
        if self.kind not in (PATHS, REALIZATIONS):
            raise InvalidRemoval(f"unknown removal kind {self.kind!r}")
        ids = frozenset(self.ids)
        object.__setattr__(self, "ids", ids)
        if not ids:
            raise InvalidRemoval("empty removal set")


@dataclass(frozen=True)
class AssessmentResult:
    """Outcome of one assessment solve. `node` is the conditioning node
    for conditional assessments and None for whole-problem path
    assessments. An infeasible restriction gets value +inf and counts as
    Effective by convention."""

    node: str | None
    value: float
    baseline: float
    verdict: str
    infeasible: bool = False
    borderline: bool = False


def _verdict(value: float, baseline: float) -> tuple[float, str, bool]:
    eps = eff_tolerance(baseline)
    drop = baseline - value
    if drop < -eps:
        raise NumericalBreakdown(
            f"assessment value {value!r} exceeds baseline {baseline!r}; "
            "restricting the ambiguity sets cannot increase the optimum")
    label = EFFECTIVE if drop > eps else INEFFECTIVE
    borderline = eps < drop <= BORDERLINE_FACTOR * eps
    return value, label, borderline


def _group_by_parent(tree: ScenarioTree, ids) -> dict[str, frozenset]:
    parents = tree.ancestor_set(ids)
    grouped = {p: frozenset(i for i in ids if tree.parent(i) == p)
               for p in parents}
    return grouped


def _validate_paths(tree: ScenarioTree, removal: RemovalSet):
    if removal.kind != PATHS:
        raise InvalidRemoval(f"expected a {PATHS} removal, got {removal.kind}")
    not_leaves = [i for i in sorted(removal.ids)
                  if tree.node(i).stage != tree.T]
    if not_leaves:
        raise InvalidRemoval(f"not scenario paths: {not_leaves}")


def assess_paths(tree: ScenarioTree, removal: RemovalSet,
                 outcome: SolveOutcome | None = None) -> AssessmentResult:
    """Solve the path assessment problem: the same nested problem except
    that each affected last-stage ambiguity set has the removed leaves
    pinned to zero probability. Compares against the unrestricted
    optimum (solved here unless passed in)."""
    _validate_paths(tree, removal)
    if outcome is None:
        outcome = solve_extensive(tree)
    baseline = outcome.objective
    grouped = _group_by_parent(tree, removal.ids)
    try:
        restricted = solve_extensive(tree, removals=grouped)
    except InstanceInfeasible:
        return AssessmentResult(None, math.inf, baseline, EFFECTIVE,
                                infeasible=True)
    value, label, borderline = _verdict(restricted.objective, baseline)
    return AssessmentResult(None, value, baseline, label,
                            borderline=borderline)


def assess_realizations(tree: ScenarioTree, removal: RemovalSet,
                        outcome: SolveOutcome) -> dict[str, AssessmentResult]:
    """Conditional assessment: for each parent of a removed node, fix the
    incoming decision at the solved policy, re-solve that subtree with
    only the parent's own ambiguity set restricted, and compare against
    the recorded node value. Keyed by parent id in file order."""
    if removal.kind != REALIZATIONS:
        raise InvalidRemoval(
            f"expected a {REALIZATIONS} removal, got {removal.kind}")
    stages = {tree.node(i).stage for i in removal.ids}
    if len(stages) > 1:
        raise InvalidRemoval(f"removal spans stages {sorted(stages)}")
    if stages == {1}:
        raise InvalidRemoval("the root is not a realization of any parent")

    results: dict[str, AssessmentResult] = {}
    for parent, gone in _group_by_parent(tree, removal.ids).items():
        if parent not in outcome.q_values:
            raise NotSolved(f"no recorded value for node {parent!r}")
        baseline = outcome.q_values[parent]
        grand = tree.parent(parent)
        if grand is not None and grand not in outcome.policy:
            raise NotSolved(f"no recorded decision for node {grand!r}")
        incoming = outcome.policy[grand] if grand is not None else None
        try:
            removals = check_removals(tree, {parent: gone})
            lp, _ = build_extensive(tree, removals=removals, root=parent,
                                    fixed_incoming=incoming)
            sol = _solve_or_raise(lp, f"assessment at {parent!r}")
        except InstanceInfeasible:
            results[parent] = AssessmentResult(parent, math.inf, baseline,
                                               EFFECTIVE, infeasible=True)
            continue
        value, label, borderline = _verdict(sol.objective_value, baseline)
        results[parent] = AssessmentResult(parent, value, baseline, label,
                                           borderline=borderline)
    return results


def policy_value_under_removal(tree: ScenarioTree, policy,
                               removals) -> float:
    """Value of a fixed policy with the removed children pinned to zero,
    for sandwich checks: restricted optimum <= this <= baseline."""
    q_values, _ = _evaluate(tree, policy, removals=removals,
                            check_feasibility=False)
    return q_values[tree.root()]


def verify_monotonicity(tree: ScenarioTree, small: RemovalSet,
                        large: RemovalSet,
                        outcome: SolveOutcome | None = None):
    """Check that removing more paths cannot raise the assessment value.
    Returns (holds, small result, large result); pairs whose larger set
    is infeasible are vacuously fine by the +inf convention."""
    if not small.ids <= large.ids:
        raise InvalidRemoval("sets are not nested")
    if outcome is None:
        outcome = solve_extensive(tree)
    r_small = assess_paths(tree, small, outcome)
    r_large = assess_paths(tree, large, outcome)
    if r_large.infeasible:
        return True, r_small, r_large
    tol = 1e-8 * max(1.0, abs(r_small.value))
    return r_large.value <= r_small.value + tol, r_small, r_large


def verify_union_intersection(tree: ScenarioTree, s_eff: RemovalSet,
                              s_ineff: RemovalSet, s_any: RemovalSet,
                              outcome: SolveOutcome | None = None) -> dict:
    """Check the closure facts on a triple: effective sets absorb unions,
    ineffective sets pass to intersections and subsets. The first two
    arguments must already carry the stated verdicts (re-checked here)."""
    if outcome is None:
        outcome = solve_extensive(tree)
    r_eff = assess_paths(tree, s_eff, outcome)
    r_ineff = assess_paths(tree, s_ineff, outcome)
    if r_eff.verdict != EFFECTIVE:
        raise InvalidRemoval("s_eff is not effective on this instance")
    if r_ineff.verdict != INEFFECTIVE:
        raise InvalidRemoval("s_ineff is not ineffective on this instance")

    union = RemovalSet(PATHS, s_eff.ids | s_any.ids)
    r_union = assess_paths(tree, union, outcome)
    union_ok = r_union.verdict == EFFECTIVE

    inter_ids = s_ineff.ids & s_any.ids
    if inter_ids:
        r_inter = assess_paths(tree, RemovalSet(PATHS, inter_ids), outcome)
        inter_ok = r_inter.verdict == INEFFECTIVE
        inter_value = r_inter.value
    else:
        # empty removal changes nothing by convention
        inter_ok, inter_value = True, outcome.objective

    sub_ids = frozenset(sorted(s_ineff.ids)[:max(1, len(s_ineff.ids) // 2)])
    r_sub = assess_paths(tree, RemovalSet(PATHS, sub_ids), outcome)
    sub_ok = r_sub.verdict == INEFFECTIVE

    return {
        "union_effective": union_ok,
        "intersection_ineffective": inter_ok,
        "subset_ineffective": sub_ok,
        "ok": union_ok and inter_ok and sub_ok,
        "union_value": r_union.value,
        "intersection_value": inter_value,
        "subset_value": r_sub.value,
        "baseline": outcome.objective,
    }


def assessment_json(removal: RemovalSet, result: AssessmentResult) -> dict:
    """CLI-facing shape; +inf is emitted as null next to the flag."""
    return {
        "removal": {"kind": removal.kind, "ids": sorted(removal.ids)},
        "node": result.node,
        "value": None if result.infeasible else result.value,
        "baseline": result.baseline,
        "verdict": result.verdict,
        "infeasible": result.infeasible,
        "borderline": result.borderline,
    }
