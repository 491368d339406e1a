import json
import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import SCENARIOS, scenario
from pleak.errors import ModelError, RunExplosionError
from pleak.model import dump_model, enumerate_runs, load_model, model_from_dict, validate_structure


def pool(nodes, flows, pid="p", name="P"):
    return {"id": pid, "name": name, "nodes": nodes, "flows": flows}


def n(id_, kind="task", **kw):
    return {"id": id_, "kind": kind, "label": kw.pop("label", id_), **kw}


def test_aid_model_loads():
    m = scenario("aid/model.json")
    assert [p.name for p in m.pools] == ["Aid requesting country", "Country A"]
    groups = {t.stereotype.group_id for t in m.tasks() if t.stereotype is not None}
    assert len(groups) == 3
    assert sum(1 for t in m.tasks() if t.stereotype is not None) == 6


def test_empty_model():
    assert load_model('{"pools":[]}').pools == ()


def test_dangling_flow_names_missing_id():
    doc = {"pools": [pool([n("s", "startEvent"), n("t1")], [["s", "t1"], ["t1", "t99"]])]}
    with pytest.raises(ModelError) as err:
        model_from_dict(doc)
    assert err.value.missing_id == "t99"
    assert "t99" in str(err.value)


def test_json_error_has_position():
    with pytest.raises(ModelError) as err:
        load_model('{"pools": [\n  {"id": }\n]}')
    assert err.value.line == 2


def test_duplicate_ids_rejected():
    doc = {"pools": [pool([n("s", "startEvent"), n("s")], [])]}
    with pytest.raises(ModelError):
        model_from_dict(doc)


def test_valid_model_has_no_issues():
    assert validate_structure(scenario("aid/model.json")) == []


def test_two_start_events():
    doc = {"pools": [pool([n("s1", "startEvent"), n("s2", "startEvent"), n("t"), n("e", "endEvent")],
                          [["s1", "t"], ["s2", "t"], ["t", "e"]])]}
    codes = [i.code for i in validate_structure(model_from_dict(doc))]
    assert "multiple start events" in codes


def test_degenerate_xor():
    doc = {"pools": [pool([n("s", "startEvent"), n("x", "xorGateway"), n("t"), n("e", "endEvent")],
                          [["s", "x"], ["x", "t"], ["t", "e"]])]}
    codes = [i.code for i in validate_structure(model_from_dict(doc))]
    assert codes == ["degenerate gateway"]


def test_unreachable_node():
    doc = {"pools": [pool([n("s", "startEvent"), n("t"), n("lost"), n("e", "endEvent")],
                          [["s", "t"], ["t", "e"]])]}
    issues = validate_structure(model_from_dict(doc))
    assert [(i.code, i.node_ids) for i in issues] == [("unreachable node", ("lost",))]


def test_cycle_is_reported():
    doc = {"pools": [pool([n("s", "startEvent"), n("a"), n("b")], [["s", "a"], ["a", "b"], ["b", "a"]])]}
    assert "cycle" in [i.code for i in validate_structure(model_from_dict(doc))]


def straight(k):
    nodes = [n("s", "startEvent")] + [n(f"t{i}") for i in range(k)] + [n("e", "endEvent")]
    ids = [x["id"] for x in nodes]
    return {"pools": [pool(nodes, [[a, b] for a, b in zip(ids, ids[1:])])]}


def test_straight_line_has_one_run():
    runs = enumerate_runs(model_from_dict(straight(3)))
    assert [r.tasks for r in runs] == [("t0", "t1", "t2")]


def xor_block(prefix, k):
    nodes = [n(f"{prefix}x", "xorGateway"), n(f"{prefix}j", "xorGateway")]
    flows = []
    for i in range(k):
        nodes.append(n(f"{prefix}{i}"))
        flows += [[f"{prefix}x", f"{prefix}{i}"], [f"{prefix}{i}", f"{prefix}j"]]
    return nodes, flows


def test_one_xor_gives_two_runs():
    nodes, flows = xor_block("a", 2)
    doc = {"pools": [pool([n("s", "startEvent")] + nodes + [n("e", "endEvent")],
                          flows + [["s", "ax"], ["aj", "e"]])]}
    runs = enumerate_runs(model_from_dict(doc))
    assert sorted(r.tasks for r in runs) == [("a0",), ("a1",)]


def test_two_independent_xors_give_four_runs():
    n1, f1 = xor_block("a", 2)
    n2, f2 = xor_block("b", 2)
    doc = {"pools": [pool([n("s", "startEvent")] + n1 + n2 + [n("e", "endEvent")],
                          f1 + f2 + [["s", "ax"], ["aj", "bx"], ["bj", "e"]])]}
    runs = enumerate_runs(model_from_dict(doc))
    assert len(runs) == 4
    assert len({r.tasks for r in runs}) == 4


def test_and_branches_are_merged_into_one_run():
    doc = {"pools": [pool([n("s", "startEvent"), n("f", "andGateway"), n("a"), n("b"), n("j", "andGateway"),
                           n("e", "endEvent")],
                          [["s", "f"], ["f", "a"], ["f", "b"], ["a", "j"], ["b", "j"], ["j", "e"]])]}
    runs = enumerate_runs(model_from_dict(doc))
    assert [sorted(r.tasks) for r in runs] == [["a", "b"]]


def test_runs_multiply_across_pools():
    n1, f1 = xor_block("a", 3)
    n2, f2 = xor_block("b", 2)
    doc = {"pools": [
        pool([n("s1", "startEvent")] + n1, f1 + [["s1", "ax"]], "p1", "P1"),
        pool([n("s2", "startEvent")] + n2, f2 + [["s2", "bx"]], "p2", "P2"),
    ]}
    assert len(enumerate_runs(model_from_dict(doc))) == 6


def test_run_cap(monkeypatch):
    blocks = [xor_block(c, 2) for c in "abcdefghijk"]  # 2^11 runs
    nodes, flows = [n("s", "startEvent")], []
    prev = "s"
    for c, (bn, bf) in zip("abcdefghijk", blocks):
        nodes += bn
        flows += bf + [[prev, f"{c}x"]]
        prev = f"{c}j"
    m = model_from_dict({"pools": [pool(nodes, flows)]})
    with pytest.raises(RunExplosionError):
        enumerate_runs(m)
    monkeypatch.setenv("PLEAK_RUN_CAP", "4096")
    assert len(enumerate_runs(m)) == 2048


# -- random XOR graphs against path enumeration ---------------------------------

def random_xor_graph(rng: random.Random):
    """Nested sequences and XOR blocks; returns the model document."""
    nodes, flows, counter = [], [], iter(range(10_000))

    def block(depth):
        choice = rng.random()
        if depth >= 2 or choice < 0.4:
            tid = f"t{next(counter)}"
            nodes.append(n(tid))
            return tid, tid
        if choice < 0.7:
            a_in, a_out = block(depth + 1)
            b_in, b_out = block(depth + 1)
            flows.append([a_out, b_in])
            return a_in, b_out
        k = next(counter)
        split, join = f"x{k}", f"j{k}"
        nodes.extend([n(split, "xorGateway"), n(join, "xorGateway")])
        for _ in range(rng.randint(2, 3)):
            b_in, b_out = block(depth + 1)
            flows.extend([[split, b_in], [b_out, join]])
        return split, join

    first, last = block(0)
    nodes[:0] = [n("s", "startEvent")]
    nodes.append(n("e", "endEvent"))
    flows += [["s", first], [last, "e"]]
    return {"pools": [pool(nodes, flows)]}


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 10**9))
def test_runs_match_path_enumeration(seed):
    doc = random_xor_graph(random.Random(seed))
    g = nx.DiGraph()
    g.add_edges_from(map(tuple, doc["pools"][0]["flows"]))
    paths = list(nx.all_simple_paths(g, "s", "e"))
    expected = sorted(tuple(x for x in p if x.startswith("t")) for p in paths)
    runs = enumerate_runs(model_from_dict(doc))
    assert sorted(r.tasks for r in runs) == expected


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_serialize_round_trip(seed):
    m = model_from_dict(random_xor_graph(random.Random(seed)))
    assert load_model(dump_model(m)) == m


def test_scenario_round_trip():
    for path in sorted(SCENARIOS.rglob("*.json")):
        m = load_model(path.read_text(), path.parent)
        again = load_model(dump_model(m), path.parent)
        assert again == m, path
        assert json.loads(dump_model(again)) == json.loads(dump_model(m))


def test_runs_are_deterministic_and_reference_tasks():
    m = model_from_dict(random_xor_graph(random.Random(3)))
    first, second = enumerate_runs(m), enumerate_runs(m)
    assert first == second
    ids = {t.id for t in m.tasks()}
    assert all(set(r.tasks) <= ids for r in first)
