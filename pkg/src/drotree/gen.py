"""Seeded instance generators.

Two families: gen_random builds small feasible multistage LP trees for
stress testing, gen_water_analog builds a fixed 3-stage, 8-branch water
allocation model with known effectiveness structure.

Randomness comes from SplitMix64 below, not the stdlib, so that a port in
any language can regenerate byte-identical instances from the constants.
"""

from __future__ import annotations

from .errors import ParamOutOfRange
from .tree import ScenarioTree, from_dict

_MASK = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 sequence.

    state += 0x9E3779B97F4A7C15
    z = state; z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31

    Floats take the top 53 bits: (z >> 11) * 2**-53, uniform on [0, 1).
    """

    GAMMA = 0x9E3779B97F4A7C15
    MIX1 = 0xBF58476D1CE4E5B9
    MIX2 = 0x94D049BB133111EB

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + self.GAMMA) & _MASK
        z = self.state
        z = (z ^ (z >> 30)) * self.MIX1 & _MASK
        z = (z ^ (z >> 27)) * self.MIX2 & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        return lo + self.next_u64() % (hi - lo + 1)


def _check(cond: bool, msg: str):
    if not cond:
        raise ParamOutOfRange(msg)


def _normalized_probs(rng: SplitMix64, k: int) -> list[float]:
    # raw weights bounded away from zero so no child is negligible
    w = [rng.uniform(0.1, 1.0) for _ in range(k)]
    s = sum(w)
    p = [x / s for x in w]
    p[-1] = 1.0 - sum(p[:-1])  # force exact unit mass
    return p


def gen_random(seed: int, T: int = 3, branching: int = 2, n_vars: int = 2,
               gamma=0.5, dependence: float = 0.0) -> ScenarioTree:
    """Random feasible, bounded multistage instance.

    Every stage has n_vars nonnegative decisions plus one high-cost slack
    per row, so any incoming state admits a feasible completion and all
    costs are positive; hence the instance is feasible and bounded no
    matter what the other draws do. Node fields drive each row's rhs, one
    cost entry, and one constraint coefficient. dependence in [0, 1] pulls
    a child's fields toward its parent's.
    """
    _check(T in (2, 3, 4), f"T must be one of 2, 3, 4, got {T!r}")
    _check(isinstance(branching, int) and 1 <= branching <= 4,
           f"branching must be an integer in [1, 4], got {branching!r}")
    _check(isinstance(n_vars, int) and 1 <= n_vars <= 3,
           f"n_vars must be an integer in [1, 3], got {n_vars!r}")
    if isinstance(gamma, (int, float)):
        gammas = [float(gamma)] * (T - 1)
    else:
        gammas = [float(g) for g in gamma]
        _check(len(gammas) == T - 1,
               f"gamma needs {T - 1} entries, got {len(gammas)}")
    for g in gammas:
        _check(0.0 <= g <= 1.0, f"gamma {g!r} outside [0, 1]")
    _check(0.0 <= dependence <= 1.0,
           f"dependence {dependence!r} outside [0, 1]")

    rng = SplitMix64(seed)
    n_rows_per_stage = [rng.randint(1, 2) for _ in range(T)]

    templates = []
    for t in range(T):
        n_rows = n_rows_per_stage[t]
        total = n_vars + n_rows  # decisions then one slack per row
        cost = []
        for j in range(n_vars):
            if j == 0:
                # xi-driven cost entry, kept positive
                cost.append({"xi": "c", "scale": 0.5,
                             "offset": round(rng.uniform(0.5, 1.5), 6)})
            else:
                cost.append(round(rng.uniform(0.5, 3.0), 6))
        for _ in range(n_rows):
            cost.append(round(rng.uniform(20.0, 30.0), 6))
        rows = []
        for i in range(n_rows):
            self_c = {}
            for j in range(n_vars):
                if t == 0 and i == 0 and j == n_vars - 1 and n_vars > 1:
                    continue  # slot reserved for the xi-driven entry below
                if j == i % n_vars:
                    self_c[str(j)] = round(rng.uniform(0.4, 1.6), 6)
                else:
                    v = rng.uniform(-0.5, 1.5)
                    if abs(v) > 0.2:
                        self_c[str(j)] = round(v, 6)
            if i == 0 and n_vars > 1:
                # xi-driven constraint coefficient, sign-varying
                self_c[str(n_vars - 1)] = {"xi": "m", "scale": 1.0,
                                           "offset": -0.3}
            self_c[str(n_vars + i)] = 1.0  # slack keeps the row satisfiable
            link_c = {}
            if t > 0:
                prev_decisions = n_vars
                for j in range(prev_decisions):
                    v = rng.uniform(-0.8, 0.8)
                    if abs(v) > 0.25:
                        link_c[str(j)] = round(v, 6)
            rows.append({"self": self_c, "link": link_c, "sense": ">=",
                         "rhs": {"xi": f"d{i}"}})
        bounds = [[0.0, None] for _ in range(total)]
        if n_vars > 1:
            bounds[0][1] = round(rng.uniform(8.0, 12.0), 6)
        templates.append({"n_vars": total, "cost": cost, "rows": rows,
                          "var_bounds": bounds})

    def draw_xi(parent_xi, t):
        xi = {}
        for i in range(n_rows_per_stage[t]):
            fresh = rng.uniform(0.5, 2.5)
            base = parent_xi.get(f"d{i}", fresh) if parent_xi else fresh
            xi[f"d{i}"] = round((1 - dependence) * fresh + dependence * base, 9)
        for fld in ("c", "m"):
            fresh = rng.random()
            base = parent_xi.get(fld, fresh) if parent_xi else fresh
            xi[fld] = round((1 - dependence) * fresh + dependence * base, 9)
        return xi

    nodes = [{"id": "n0", "stage": 1, "parent": None, "q": 1.0,
              "xi": draw_xi(None, 0)}]
    frontier = [nodes[0]]
    serial = 1
    for t in range(2, T + 1):
        nxt = []
        for parent in frontier:
            probs = _normalized_probs(rng, branching)
            for b in range(branching):
                node = {"id": f"n{serial}", "stage": t, "parent": parent["id"],
                        "q": probs[b], "xi": draw_xi(parent["xi"], t - 1)}
                serial += 1
                nodes.append(node)
                nxt.append(node)
        frontier = nxt

    return from_dict({
        "name": f"rand-s{seed}-T{T}-b{branching}",
        "stages": T,
        "gamma": gammas,
        "nodes": nodes,
        "stage_templates": templates,
        "meta": {"family": "random", "seed": seed, "zero_feasible": True,
                 "dependence": dependence},
    })


# water analog ---------------------------------------------------------

COMBOS = [s + d + f for s in "LH" for d in "LH" for f in "DN"]

_SUPPLY = {"L": 6.0, "H": 10.0}
_DEMAND = {"L": 5.0, "H": 9.0}
_RECYCLE_RATE = 0.45
_RECYCLE_CAP = 1.0
_DEMAND_JITTER = 0.013
_COSTS = [1.0, 0.4, 8.0]  # allocate, recycle, procure externally


def gen_water_analog(seed: int = 0, gamma: float = 0.5,
                     asymmetric: bool = True) -> ScenarioTree:
    """Three-stage water allocation model, branching 8.

    Each non-root node is one of the combinations supply L/H, demand L/H,
    treatment plant disrupted D / nondisrupted N. Decisions per stage:
    allocate from local supply (cost 1), reuse recycled water (cost 0.4,
    available only when the plant is not disrupted, at most the fixed
    treatment capacity and at most a fraction of the previous allocation),
    or procure externally (cost 8).

    The low-supply high-demand disrupted combination is the unique worst
    child everywhere: supply 6 cannot cover demand 9 and recycling is
    down, which forces external procurement. Demands get a small jitter
    by combination index so child costs are strictly totally ordered; the
    seed wobbles supply and demand levels by up to 1 percent without
    changing that order. With asymmetric=True the cheapest third-stage
    child (L, L, N) carries nominal probability 0.03 instead of a uniform
    share, so small radii already push it below the value-at-risk level.
    """
    rng = SplitMix64(seed)
    w_supply = 1.0 + 0.02 * (rng.random() - 0.5)
    w_demand = 1.0 + 0.02 * (rng.random() - 0.5)

    def combo_xi(combo: str) -> dict:
        k = COMBOS.index(combo)
        return {
            "S": round(_SUPPLY[combo[0]] * w_supply, 9),
            "D": round(_DEMAND[combo[1]] * w_demand + _DEMAND_JITTER * k, 9),
            "R": _RECYCLE_RATE if combo[2] == "N" else 0.0,
            "cap": _RECYCLE_CAP,
        }

    root_xi = {"S": round(9.0 * w_supply, 9), "D": round(7.0 * w_demand, 9)}

    nodes = [{"id": "root", "stage": 1, "parent": None, "q": 1.0,
              "xi": root_xi}]
    for combo in COMBOS:
        nodes.append({"id": combo, "stage": 2, "parent": "root",
                      "q": 1.0 / 8.0, "xi": combo_xi(combo)})
    if asymmetric:
        q3 = {c: (1.0 - 0.03) / 7.0 for c in COMBOS}
        q3["LLN"] = 0.03
        # force exact unit mass under this fixed child order
        tail = sum(q3[c] for c in COMBOS[:-1])
        q3[COMBOS[-1]] = 1.0 - tail
    else:
        q3 = {c: 1.0 / 8.0 for c in COMBOS}
    for parent in COMBOS:
        for combo in COMBOS:
            nodes.append({"id": f"{parent}-{combo}", "stage": 3,
                          "parent": parent, "q": q3[combo],
                          "xi": combo_xi(combo)})

    base_rows = [
        # meet demand from the three sources
        {"self": {"0": 1.0, "1": 1.0, "2": 1.0}, "link": {},
         "sense": ">=", "rhs": {"xi": "D"}},
        # local allocation bounded by supply
        {"self": {"0": 1.0}, "link": {}, "sense": "<=", "rhs": {"xi": "S"}},
    ]
    stage1 = {
        "n_vars": 3, "cost": list(_COSTS),
        "rows": base_rows + [
            # nothing to recycle in the first stage
            {"self": {"1": 1.0}, "link": {}, "sense": "<=", "rhs": 0.0},
        ],
    }
    later = {
        "n_vars": 3, "cost": list(_COSTS),
        "rows": base_rows + [
            # recycled volume limited by a fraction of the prior allocation
            {"self": {"1": 1.0}, "link": {"0": {"xi": "R", "scale": -1.0}},
             "sense": "<=", "rhs": 0.0},
            # and by treatment capacity
            {"self": {"1": 1.0}, "link": {}, "sense": "<=",
             "rhs": {"xi": "cap"}},
        ],
    }

    return from_dict({
        "name": f"water-s{seed}",
        "stages": 3,
        "gamma": [float(gamma), float(gamma)],
        "nodes": nodes,
        "stage_templates": [stage1, later, later],
        "meta": {"family": "water", "seed": seed, "asymmetric": asymmetric,
                 "combos": list(COMBOS), "zero_feasible": False},
    })
