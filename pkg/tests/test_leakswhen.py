import json

import pydot
import pytest

from helpers import BASE_SCHEMAS, make_workflow, scenario_workflow
from pleak.errors import PleakError
from pleak.leakswhen import dot_files, leaks_when, render, render_dot
from pleak.symexec import descendants, input_leaves


@pytest.fixture(scope="module")
def ships():
    wf = scenario_workflow("ships/workflow.json")
    return leaks_when(wf, ["reachable_ports", "feasible_ports"])


def test_reachable_ports_columns_share_condition(ships):
    entries = ships.tabs["reachable_ports"]
    assert len(entries) == 2
    assert entries[0].when is entries[1].when


def test_feasible_condition_extends_reachability(ships):
    reach = ships.entry("reachable_ports", 0).when
    feasible = ships.entry("feasible_ports", 0).when
    inside = descendants(feasible)
    assert any(n is reach for n in inside)
    extra = {n.payload[1] for n in input_leaves(feasible)} - {n.payload[1] for n in input_leaves(reach)}
    assert {"draft", "harbordepth", "cargo", "offloadcapacity", "offloadtime"} <= extra


def test_dot_output_parses_and_lists_every_node(ships):
    for entry in ships.entries():
        (graph,) = pydot.graph_from_dot_data(render_dot(entry))
        names = {n.get_name() for n in graph.get_nodes()} - {"node", "edge", "graph"}
        assert len(names) == len(descendants(entry.root))
        edges = sum(len(n.children) for n in descendants(entry.root))
        assert len(graph.get_edges()) == edges


def test_dot_file_names(ships):
    assert set(dot_files(ships)) == {"reachable_ports_0_0.dot", "reachable_ports_1_0.dot",
                                     "feasible_ports_0_0.dot", "feasible_ports_1_0.dot"}


def test_json_nodes_are_closed_under_children(ships):
    doc = json.loads(render(ships, "json"))
    assert doc["schemaVersion"] == 1
    ids = {n["id"] for n in doc["nodes"]}
    assert all(set(n["children"]) <= ids for n in doc["nodes"])
    for tab in doc["tabs"]:
        for col in tab["columns"]:
            assert {col["root"], col["leak"], col["when"]} <= ids


def test_reports_are_deterministic():
    def once():
        wf = scenario_workflow("ships/workflow.json")
        r = leaks_when(wf, ["port_assignment"])
        return render(r, "json"), render(r, "text"), render(r, "dot")
    assert once() == once()


def test_text_report_names_leaves():
    wf = make_workflow(BASE_SCHEMAS, [("t", ["r"], "o", "SELECT r.a + 0 AS v INTO o FROM r WHERE r.b > 1 AND TRUE;")])
    text = render(leaks_when(wf, ["o"]), "text")
    assert "leaks: r.a[0]" in text
    assert "when:  (> r.b[0] 1)" in text


def test_errors():
    wf = make_workflow(BASE_SCHEMAS, [("t", ["r"], "o", "SELECT r.a INTO o FROM r WHERE TRUE;")])
    with pytest.raises(PleakError):
        leaks_when(wf, [])
    with pytest.raises(PleakError):
        render(leaks_when(wf, ["o"]), "yaml")
