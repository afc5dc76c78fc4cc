import json

import pytest

from drotree.cli import dump_json, format_float, main
from drotree.solver import solve_extensive
from drotree.tree import load_instance, to_dict

from helpers import leaf_value_tree


def run(*argv):
    return main(list(argv))


def write_instance(tmp_path, tree, name="inst.json"):
    path = tmp_path / name
    path.write_text(json.dumps(to_dict(tree)))
    return str(path)


def test_json_writer_basics():
    assert format_float(0.15) == "0.14999999999999999"
    assert dump_json({"b": 1, "a": [1.5, None, True]}) == (
        '{\n  "b": 1,\n  "a": [\n    1.5,\n    null,\n    true\n  ]\n}')
    with pytest.raises(ValueError):
        format_float(float("inf"))


def test_gen_solve_roundtrip(tmp_path):
    inst = str(tmp_path / "r.json")
    out = str(tmp_path / "sol.json")
    assert run("gen", "--random", "7,3,2", "--out", inst) == 0
    assert run("solve", inst, "--out", out) == 0
    blob = json.loads(open(out).read())
    tree = load_instance(inst)
    assert blob["objective"] == pytest.approx(solve_extensive(tree).objective)
    assert blob["solver"] == "extensive"
    assert list(blob["policy"]) == [n.id for n in tree.nodes]


def test_solve_both_cross_checks(tmp_path):
    inst = str(tmp_path / "r.json")
    out = str(tmp_path / "sol.json")
    run("gen", "--random", "3,3,3", "--out", inst)
    assert run("solve", inst, "--solver", "both", "--out", out) == 0
    blob = json.loads(open(out).read())
    assert blob["cross_check"]["rel_diff"] <= 1e-6
    assert blob["cross_check"]["benders_gap"] <= 1e-6


def test_dump_lp_writes_file(tmp_path):
    inst = str(tmp_path / "r.json")
    lp = str(tmp_path / "r.lp")
    run("gen", "--random", "1,2,2", "--out", inst)
    assert run("solve", inst, "--dump-lp", lp, "--out",
               str(tmp_path / "s.json")) == 0
    text = open(lp).read()
    assert text.startswith("\\*") or "Minimize" in text


def test_classify_byte_identical_and_dot(tmp_path):
    inst = str(tmp_path / "r.json")
    run("gen", "--random", "5,3,2", "--out", inst)
    blobs = []
    for k in range(2):
        rep = str(tmp_path / f"rep{k}.json")
        dot = str(tmp_path / f"t{k}.dot")
        assert run("classify", inst, "--out", rep, "--dot", dot) == 0
        blobs.append(open(rep, "rb").read())
    assert blobs[0] == blobs[1]
    dot_text = open(str(tmp_path / "t0.dot")).read()
    assert dot_text.startswith("digraph")
    rep = json.loads(blobs[0])
    assert {"nodes", "leaves", "summary"} <= set(rep)


def test_classify_oracle_agreement(tmp_path):
    inst = str(tmp_path / "r.json")
    run("gen", "--random", "9,3,2", "--out", inst)
    rep = str(tmp_path / "rep.json")
    assert run("classify", inst, "--oracle", "--strict", "--jobs", "1",
               "--out", rep) == 0
    blob = json.loads(open(rep).read())
    assert blob["oracle"]["n_disagreements"] == 0
    assert blob["oracle"]["n_checked"] > 0


def test_strict_oracle_flags_unsound_rule_variant(tmp_path):
    # knife edge for the literal at-quantile mass rule: the group mass
    # equals gamma exactly, so c2_only calls the middle child
    # ineffective, yet removing it drops the value 2.8 -> 2.6; --strict
    # turns the oracle disagreement into exit code 4
    inst = write_instance(
        tmp_path, leaf_value_tree([1.0, 2.0, 3.0], q=[0.2, 0.5, 0.3]))
    rep = str(tmp_path / "rep.json")
    assert run("classify", inst, "--c2-rule", "c2_only", "--oracle",
               "--strict", "--jobs", "1", "--out", rep) == 4
    blob = json.loads(open(rep).read())
    # both the arc label and the path label built on it are wrong
    assert blob["oracle"]["n_disagreements"] == 2
    assert {(r["kind"], r["id"]) for r in blob["oracle"]["disagreements"]} \
        == {("cond", "l1"), ("path", "l1")}
    # without --strict the disagreement is reported but not fatal
    assert run("classify", inst, "--c2-rule", "c2_only", "--oracle",
               "--out", rep) == 0
    # the default rule identifies the same child correctly
    assert run("classify", inst, "--oracle", "--strict", "--out", rep) == 0
    assert json.loads(open(rep).read())["oracle"]["n_disagreements"] == 0


def test_tied_sup_children_stay_unidentified(tmp_path):
    # equal leaf values tie at the sup; removing any one of them leaves
    # the worst case unchanged, so no child may be called effective
    inst = write_instance(tmp_path, leaf_value_tree([2.0, 2.0, 2.0]))
    rep = str(tmp_path / "rep.json")
    assert run("classify", inst, "--oracle", "--strict", "--out", rep) == 0
    blob = json.loads(open(rep).read())
    assert all(n["cond_label"] == "Unidentified" for n in blob["nodes"]
               if n["stage"] == 2)
    assert blob["oracle"]["n_checked"] == 0


def test_assess_paths_and_realizations(tmp_path):
    inst = write_instance(tmp_path, leaf_value_tree([1.0, 2.0, 3.0]))
    out = str(tmp_path / "a.json")
    assert run("assess", inst, "--paths", "l1", "--out", out) == 0
    blob = json.loads(open(out).read())
    assert blob["results"][0]["verdict"] == "Effective"
    assert blob["results"][0]["value"] == pytest.approx(16 / 6)

    assert run("assess", inst, "--paths", "l0,l1,l2", "--out", out) == 0
    blob = json.loads(open(out).read())
    assert blob["results"][0]["infeasible"] is True
    assert blob["results"][0]["value"] is None

    assert run("assess", inst, "--realizations", "l2", "--out", out) == 0
    blob = json.loads(open(out).read())
    assert blob["results"][0]["node"] == "r"


def test_sweep_grid_and_rows(tmp_path, capsys):
    inst = write_instance(tmp_path, leaf_value_tree([1.0, 2.0, 3.0]))
    out = str(tmp_path / "s.csv")
    assert run("sweep", inst, "--gamma", "0:1:0.05", "--jobs", "1",
               "--out", out) == 0
    lines = open(out).read().strip().split("\n")
    assert lines[0] == "gamma,objective,n_effective_paths,n_ineffective,n_unidentified"
    assert len(lines) == 22  # header + 21 grid points
    gammas = [row.split(",")[0] for row in lines[1:]]
    assert gammas[0] == "0" and gammas[-1] == "1" and "0.25" in gammas
    objectives = [float(r.split(",")[1]) for r in lines[1:]]
    for lo, hi in zip(objectives, objectives[1:]):
        assert hi >= lo - 1e-9  # risk grows with the radius


def test_sweep_parallel_matches_serial(tmp_path, monkeypatch):
    inst = write_instance(tmp_path, leaf_value_tree([1.0, 2.0, 3.0]))
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    assert run("sweep", inst, "--gamma", "0:1:0.25", "--jobs", "1",
               "--out", a) == 0
    monkeypatch.setenv("DROTREE_JOBS", "2")
    assert run("sweep", inst, "--gamma", "0:1:0.25", "--out", b) == 0
    assert open(a, "rb").read() == open(b, "rb").read()


def test_exit_codes(tmp_path):
    assert run("solve", str(tmp_path / "missing.json")) == 2

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("solve", str(bad)) == 2

    inst = write_instance(tmp_path, leaf_value_tree([1.0, 2.0]))
    assert run("sweep", inst, "--gamma", "0:2:0.5") == 2
    assert run("sweep", inst, "--gamma", "nope") == 2
    assert run("assess", inst, "--paths", "ghost") == 2
    assert run("gen", "--random", "1,9,2", "--out", str(tmp_path / "x.json")) == 2

    infeasible = {
        "name": "bad", "stages": 2, "gamma": [0.5],
        "nodes": [
            {"id": "r", "stage": 1, "parent": None, "q": 1.0, "xi": {}},
            {"id": "a", "stage": 2, "parent": "r", "q": 1.0, "xi": {}},
        ],
        "stage_templates": [
            {"n_vars": 1, "cost": [0.0], "rows": []},
            {"n_vars": 1, "cost": [1.0],
             "rows": [{"self": {"0": 1.0}, "link": {}, "sense": ">=",
                       "rhs": 2.0}],
             "var_bounds": [[0.0, 1.0]]},
        ],
    }
    path = tmp_path / "inf.json"
    path.write_text(json.dumps(infeasible))
    assert run("solve", str(path)) == 3

    with pytest.raises(SystemExit) as exc:
        run("nonsense")
    assert exc.value.code == 2


def test_gen_water_gamma_flag(tmp_path):
    inst = str(tmp_path / "w.json")
    assert run("gen", "--water", "0", "--gamma", "0.95", "--out", inst) == 0
    tree = load_instance(inst)
    assert tree.gamma == (0.95, 0.95)
    assert len(tree.nodes) == 73
