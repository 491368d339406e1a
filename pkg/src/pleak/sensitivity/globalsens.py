"""Instance-independent row sensitivity for COUNT-style workflows.

A cell bounds how much the row count of a task output can change when one
row is added to or removed from an input table. The rule is structural:

* 0 when the derivation never reads the table;
* 1 when the table is the only one read, exactly once, outside aggregations;
* 1 under DISTINCT when the table is read once and every projected
  attribute comes from that single occurrence;
* infinity otherwise, since one row may join with unboundedly many others.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from pleak.errors import UnsupportedAggregation
from pleak.model import Run
from pleak.sql.ast import SelectQuery
from pleak.sql.workflow import SqlWorkflow
from pleak.symexec import DagBuilder, Expansion, descendants, expand_query, input_leaves, run_tasks, workflow_runs

INF = math.inf
NA = "n/a"
WORKFLOW = "workflow"


@dataclass
class GlobalSensitivityMatrix:
    tables: list[str]
    columns: list[str]
    cells: dict[tuple[str, str], float | str]

    def cell(self, table: str, column: str):
        return self.cells[(table, column)]

    def to_csv(self) -> str:
        lines = [",".join(["table"] + self.columns)]
        for t in self.tables:
            lines.append(",".join([t] + [format_cell(self.cells[(t, c)]) for c in self.columns]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "schemaVersion": 1,
            "tables": self.tables,
            "columns": self.columns,
            "cells": {t: {c: format_cell(self.cells[(t, c)]) for c in self.columns} for t in self.tables},
        }


def format_cell(value) -> str:
    if value == NA:
        return NA
    if value == INF:
        return "inf"
    return str(int(value)) if float(value).is_integer() else str(value)


def _occurrences(ex: Expansion) -> tuple[dict[str, int], set[str]]:
    """Free occurrences per table, and tables read inside some aggregation."""
    free: dict[str, int] = {}
    for table, _ in ex.free:
        free[table] = free.get(table, 0) + 1
    in_agg = set()
    roots = list(ex.columns) + [ex.cond]
    for root in roots:
        for n in descendants(root):
            if n.kind == "agg":
                in_agg.update(t for t, _ in n.payload[1])
    return free, in_agg


def derivation_cells(ex: Expansion, distinct: bool, tables) -> dict[str, float]:
    free, in_agg = _occurrences(ex)
    proj_symbols = {(n.payload[0], n.payload[2]) for c in ex.columns for n in input_leaves(c)}
    out = {}
    for t in tables:
        if t in in_agg:
            out[t] = INF
        elif t not in free:
            out[t] = 0
        elif free[t] == 1 and len(free) == 1:
            out[t] = 1
        elif distinct and free[t] == 1 and all(sym[0] == t for sym in proj_symbols):
            out[t] = 1
        else:
            out[t] = INF
    return out


def _count_query(query: SelectQuery) -> tuple[SelectQuery, bool]:
    if query.aggregation is None:
        return query, query.distinct
    if query.aggregation.kind != "COUNT":
        raise UnsupportedAggregation(
            f"global sensitivity supports only COUNT-style queries, not {query.aggregation.kind}")
    # COUNT counts the rows of the underlying filter; analyze it as a plain select
    return SelectQuery(False, (), None, query.sources, query.predicate, query.into, pos=query.pos), False


def task_sensitivity(workflow: SqlWorkflow, task: str, run: Run | None = None,
                     builder: DagBuilder | None = None, visited: set | None = None) -> dict[str, float]:
    """Cells of one task (its last statement) w.r.t. every workflow input table."""
    builder = builder or DagBuilder(workflow.funcs)
    query, distinct = _count_query(workflow.final_query(task))
    ex = expand_query(workflow, run, task, query, builder, visited)
    return derivation_cells(ex, distinct, workflow.inputs)


def global_sensitivity(workflow: SqlWorkflow) -> GlobalSensitivityMatrix:
    tables = workflow.inputs
    columns = list(workflow.order) + [WORKFLOW]
    cells: dict[tuple[str, str], float | str] = {(t, c): 0 for t in tables for c in columns}
    builder = DagBuilder(workflow.funcs)
    finals = set(workflow.final_outputs())
    for run in workflow_runs(workflow):
        present = run_tasks(workflow, run)
        for task in present:
            visited: set[str] = set()
            try:
                task_cells = task_sensitivity(workflow, task, run, builder, visited)
            except UnsupportedAggregation:
                for t in tables:
                    cells[(t, task)] = NA
                    if finals & set(workflow.task_outputs(task)):
                        cells[(t, WORKFLOW)] = NA
                continue
            for t, v in task_cells.items():
                if cells[(t, task)] != NA:
                    cells[(t, task)] = max(cells[(t, task)], v)
            if finals & set(workflow.task_outputs(task)):
                # the whole workflow is at least as sensitive as every task on the derivation
                for t in tables:
                    if cells[(t, WORKFLOW)] == NA:
                        continue
                    along = [task_cells[t]] + [cells[(t, v)] for v in visited if cells[(t, v)] != NA]
                    cells[(t, WORKFLOW)] = max([cells[(t, WORKFLOW)]] + along)
    return GlobalSensitivityMatrix(tables, columns, cells)
