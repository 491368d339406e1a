"""Leaks-when reports: what each output column discloses and under which condition."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from pleak.errors import PleakError
from pleak.sql.workflow import SqlWorkflow
from pleak.symexec import DagBuilder, Node, descendants, input_leaves, symbolic_run, workflow_runs

FORMATS = ("dot", "json", "text")
SCHEMA_VERSION = 1


@dataclass
class ColumnReport:
    table: str
    column: int
    name: str
    run: int
    root: Node
    distinct: bool = False

    @property
    def leak(self) -> Node:
        return self.root.children[0]

    @property
    def when(self) -> Node:
        return self.root.children[1]

    @property
    def leak_leaves(self) -> list[str]:
        return [leaf_name(n) for n in input_leaves(self.leak)]

    @property
    def when_leaves(self) -> list[str]:
        return [leaf_name(n) for n in input_leaves(self.when)]

    @property
    def key(self) -> str:
        return f"{self.table}_{self.column}_{self.run}"


@dataclass
class LeaksWhenReport:
    tabs: dict[str, list[ColumnReport]] = field(default_factory=dict)

    def entries(self) -> list[ColumnReport]:
        return [e for tab in self.tabs.values() for e in tab]

    def entry(self, table: str, column: int, run: int = 0) -> ColumnReport:
        for e in self.tabs.get(table, []):
            if e.column == column and e.run == run:
                return e
        raise KeyError((table, column, run))


def leaf_name(node: Node) -> str:
    table, column, row = node.payload
    return f"{table}.{column}[{row}]"


def leaks_when(workflow: SqlWorkflow, targets, builder: DagBuilder | None = None) -> LeaksWhenReport:
    targets = list(dict.fromkeys(targets))
    if not targets:
        raise PleakError("leaks-when needs at least one target output")
    builder = builder or DagBuilder(workflow.funcs)
    report = LeaksWhenReport({t: [] for t in targets})
    for run in workflow_runs(workflow):
        for prov in symbolic_run(workflow, run, targets, builder, simplify=True):
            report.tabs[prov.table].append(
                ColumnReport(prov.table, prov.column, prov.name, prov.run, prov.root, prov.root.payload))
    for tab in report.tabs.values():
        tab.sort(key=lambda e: (e.column, e.run))
    return report


# -- rendering --------------------------------------------------------------

def node_label(node: Node) -> str:
    kind = node.kind
    if kind == "input":
        return leaf_name(node)
    if kind == "const":
        value, type_ = node.payload
        if type_ == "TEXT":
            return "'" + value + "'"
        if type_ == "BOOL":
            return "true" if value else "false"
        return repr(value)
    if kind in ("arith", "cmp"):
        return node.payload
    if kind == "neg":
        return "-"
    if kind in ("and", "or", "not"):
        return kind.upper()
    if kind == "func":
        return node.payload
    if kind == "agg":
        return node.payload[0]
    if kind == "filter":
        return "filter"
    raise ValueError(kind)


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render_dot(entry: ColumnReport) -> str:
    lines = [f"digraph {_dot_quote(entry.key)} {{", "  rankdir=BT;"]
    nodes = sorted(descendants(entry.root), key=lambda n: n.id)
    for n in nodes:
        attrs = [f"label={_dot_quote(node_label(n))}"]
        if n.kind == "input":
            attrs += ["shape=box", "style=dashed"]
        elif n.kind == "const":
            attrs.append("shape=plaintext")
        elif n.kind == "filter":
            attrs.append("shape=doublecircle")
        lines.append(f"  n{n.id} [{', '.join(attrs)}];")
    for n in nodes:
        for i, child in enumerate(n.children, 1):
            label = f" [label=\"{i}\"]" if len(n.children) > 1 else ""
            lines.append(f"  n{child.id} -> n{n.id}{label};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def dot_files(report: LeaksWhenReport) -> dict[str, str]:
    return {f"{e.key}.dot": render_dot(e) for e in report.entries()}


def sexpr(node: Node) -> str:
    label = node_label(node)
    if not node.children:
        return label
    if node.kind == "agg":
        label = f"{label} over {' '.join(f'{t}[{r}]' for t, r in node.payload[1])}"
    return "(" + label + " " + " ".join(sexpr(c) for c in node.children) + ")"


def report_dict(report: LeaksWhenReport) -> dict:
    nodes: dict[int, Node] = {}
    tabs = []
    for table, entries in report.tabs.items():
        cols = []
        for e in entries:
            for n in descendants(e.root):
                nodes[n.id] = n
            cols.append({
                "column": e.column, "name": e.name, "run": e.run, "distinct": e.distinct,
                "root": e.root.id, "leak": e.leak.id, "when": e.when.id,
                "leakLeaves": e.leak_leaves, "whenLeaves": e.when_leaves,
            })
        tabs.append({"table": table, "columns": cols})
    return {
        "schemaVersion": SCHEMA_VERSION,
        "nodes": [{"id": n.id, "kind": n.kind, "label": node_label(n), "type": n.type,
                   "children": [c.id for c in n.children]} for _, n in sorted(nodes.items())],
        "tabs": tabs,
    }


def render(report: LeaksWhenReport, fmt: str) -> str:
    if fmt == "dot":
        return "".join(render_dot(e) for e in report.entries())
    if fmt == "json":
        return json.dumps(report_dict(report), indent=2) + "\n"
    if fmt == "text":
        out = []
        for table, entries in report.tabs.items():
            out.append(f"== {table} ==")
            for e in entries:
                out.append(f"{table}({e.column}) {e.name} run {e.run}{' DISTINCT' if e.distinct else ''}")
                out.append(f"  leaks: {sexpr(e.leak)}")
                out.append(f"  when:  {sexpr(e.when)}")
        return "\n".join(out) + ("\n" if out else "")
    raise PleakError(f"unknown report format {fmt!r}; expected one of {', '.join(FORMATS)}")
