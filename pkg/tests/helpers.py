"""Hand-built instances shared by several test modules."""

import numpy as np

from drotree.tree import ScenarioTree, TreeNode, from_dict


def leaf_value_tree(values, q=None, gamma=0.5, root_cost=0.0, name="toy"):
    """Two-stage tree whose leaf subproblems have fixed optimal values.

    Root: one costless decision (cost root_cost), no rows. Leaf k: one
    variable with unit cost forced above xi['d'] = values[k]. The total
    worst case is then root_cost*0 + worst_case(values) plus nothing else,
    which makes risk arithmetic checkable by hand.
    """
    n = len(values)
    if q is None:
        q = [1.0 / n] * n
    nodes = [{"id": "r", "stage": 1, "parent": None, "q": 1.0, "xi": {}}]
    for k, (v, p) in enumerate(zip(values, q)):
        nodes.append({"id": f"l{k}", "stage": 2, "parent": "r", "q": p,
                      "xi": {"d": float(v)}})
    return from_dict({
        "name": name,
        "stages": 2,
        "gamma": [gamma],
        "nodes": nodes,
        "stage_templates": [
            {"n_vars": 1, "cost": [root_cost], "rows": []},
            {"n_vars": 1, "cost": [1.0],
             "rows": [{"self": {"0": 1.0}, "link": {},
                       "sense": ">=", "rhs": {"xi": "d"}}]},
        ],
    })


def newsvendor_tree(gamma=0.0, shortage=1.5):
    """Order x at unit cost 1, then pay `shortage` per unit of unmet
    demand. Demand is 1 or 3, equally likely. With shortage 1.5 the
    optimal order moves from 1 (risk neutral, value 2.5) to 3 (radius
    at least 1/6, value 3.0); at radius g below 1/6 the value is
    2.5 + 3g with order 1."""
    return from_dict({
        "name": "newsvendor",
        "stages": 2,
        "gamma": [gamma],
        "nodes": [
            {"id": "r", "stage": 1, "parent": None, "q": 1.0, "xi": {}},
            {"id": "lo", "stage": 2, "parent": "r", "q": 0.5, "xi": {"d": 1.0}},
            {"id": "hi", "stage": 2, "parent": "r", "q": 0.5, "xi": {"d": 3.0}},
        ],
        "stage_templates": [
            {"n_vars": 1, "cost": [1.0], "rows": []},
            # shortage variable y >= d - x
            {"n_vars": 1, "cost": [shortage],
             "rows": [{"self": {"0": 1.0}, "link": {"0": 1.0},
                       "sense": ">=", "rhs": {"xi": "d"}}]},
        ],
    })


def chain_tree(depth=3, gamma=0.5):
    """Deterministic tree: one child per stage, so every risk functional
    collapses and the optimum equals a single-path LP."""
    nodes = [{"id": "n1", "stage": 1, "parent": None, "q": 1.0, "xi": {}}]
    for t in range(2, depth + 1):
        nodes.append({"id": f"n{t}", "stage": t, "parent": f"n{t - 1}",
                      "q": 1.0, "xi": {"d": float(t)}})
    templates = [{"n_vars": 1, "cost": [1.0],
                  "rows": [{"self": {"0": 1.0}, "link": {},
                            "sense": ">=", "rhs": 1.0}]}]
    for _ in range(depth - 1):
        templates.append({"n_vars": 1, "cost": [1.0],
                          "rows": [{"self": {"0": 1.0}, "link": {"0": 0.5},
                                    "sense": ">=", "rhs": {"xi": "d"}}]})
    return from_dict({
        "name": "chain",
        "stages": depth,
        "gamma": [gamma] * (depth - 1),
        "nodes": nodes,
        "stage_templates": templates,
    })


def minimal_dict(**overrides):
    base = {
        "name": "mini",
        "stages": 2,
        "gamma": [0.5],
        "nodes": [
            {"id": "a", "stage": 1, "parent": None, "q": 1.0, "xi": {}},
            {"id": "b", "stage": 2, "parent": "a", "q": 0.6, "xi": {"d": 1.0}},
            {"id": "c", "stage": 2, "parent": "a", "q": 0.4, "xi": {"d": 2.0}},
        ],
        "stage_templates": [
            {"n_vars": 1, "cost": [1.0], "rows": []},
            {"n_vars": 1, "cost": [1.0],
             "rows": [{"self": {"0": 1.0}, "link": {},
                       "sense": ">=", "rhs": {"xi": "d"}}]},
        ],
    }
    base.update(overrides)
    return base
