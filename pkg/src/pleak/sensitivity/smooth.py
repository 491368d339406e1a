"""Smoothed aggregates, derivative sensitivity and the beta-smooth upper bound."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from pleak.errors import MissingAttackerBound, SymbolicError, UnsupportedAggregation
from pleak.sensitivity.engine import AggTarget, Engine, Grid, table_columns
from pleak.sensitivity.norm import NormSpec
from pleak.sql.ast import SelectQuery
from pleak.sql.tables import TableData
from pleak.sql.workflow import SqlWorkflow, single_query_workflow
from pleak.symexec import DagBuilder, Node, expand_target, inline_call, workflow_runs

GRID_POINTS = 16
BETA_CAP = 1e6
DEFAULT_A = 10.0

Ranges = dict[tuple[str, str], tuple[float, float]]


def as_workflow(source, db: dict[str, TableData] | None = None) -> SqlWorkflow:
    if isinstance(source, SqlWorkflow):
        return source
    if isinstance(source, SelectQuery):
        schemas = {name: t.schema for name, t in (db or {}).items()}
        return single_query_workflow(source, schemas, db)
    raise TypeError(f"expected a query or a workflow, got {type(source).__name__}")


def aggregate_target(workflow: SqlWorkflow, output: str | None = None,
                     builder: DagBuilder | None = None) -> AggTarget:
    """The aggregate computed for ``output``; a plain SELECT counts its rows."""
    builder = builder or DagBuilder(workflow.funcs)
    if output is None:
        finals = workflow.final_outputs()
        if len(finals) != 1:
            raise SymbolicError(f"choose one output to analyze among {finals}")
        output = finals[0]
    found: dict[tuple, object] = {}
    for run in workflow_runs(workflow):
        ex = expand_target(workflow, run, output, builder)
        if ex is not None:
            found.setdefault(tuple(c.id for c in ex.columns) + (ex.cond.id,), ex)
    if not found:
        raise SymbolicError(f"no run produces {output!r}")
    if len(found) > 1:
        raise SymbolicError(f"{output!r} has a different derivation in different runs; analyze a single run")
    ex = next(iter(found.values()))
    producer = workflow.producers(output)[0]
    final = next(q for q in reversed(workflow.statements[producer]) if q.into == output)
    if len(ex.columns) == 1 and ex.columns[0].kind == "agg" and ex.cond.is_true and not ex.free:
        agg = ex.columns[0]
        if not ex.bag_exact:
            raise UnsupportedAggregation("an aggregation over a DISTINCT intermediate table is not supported")
        kind, bound = agg.payload
        return AggTarget(kind, bound, agg.children[0], agg.children[1])
    if not ex.bag_exact or (ex.set_semantics and not final.distinct):
        raise UnsupportedAggregation("row counting through a DISTINCT intermediate table is not supported")
    return AggTarget("COUNT", tuple(sorted(ex.free)), builder.const(1, "INT8"), ex.cond,
                     final.distinct, tuple(ex.columns))


def _intervals(node: Node, builder, columns, table, sens_cols, ranges, memo):
    """Interval enclosure of a numeric node; also reports sensitive leaves lacking a range."""
    got = memo.get(node.id)
    if got is not None:
        return got
    kind = node.kind
    missing: set = set()
    if kind == "const":
        v = node.value
        out = (float(v), float(v)) if isinstance(v, (int, float)) else (-math.inf, math.inf)
        sens = False
    elif kind == "input":
        t, c, _ = node.payload
        sens = t == table and c in sens_cols
        if sens:
            if (t, c) in ranges:
                lo, hi = ranges[(t, c)]
                lo = min(lo, float(np.min(columns[t][c]))) if len(columns[t][c]) else lo
                hi = max(hi, float(np.max(columns[t][c]))) if len(columns[t][c]) else hi
                out = (lo, hi)
            else:
                out = (-math.inf, math.inf)
                missing.add((t, c))
        else:
            col = columns[t][c]
            if col.dtype == object or len(col) == 0:
                out = (-math.inf, math.inf)
            else:
                out = (float(np.min(col)), float(np.max(col)))
    elif kind == "func" and node.payload in builder.funcs:
        out, sens, missing = _intervals(inline_call(node, builder), builder, columns, table, sens_cols, ranges, memo)
    else:
        parts = [_intervals(c, builder, columns, table, sens_cols, ranges, memo) for c in node.children]
        sens = any(p[1] for p in parts)
        for p in parts:
            missing |= p[2]
        ivs = [p[0] for p in parts]
        out = _combine(kind, node.payload, ivs)
        if kind == "arith" and node.payload == "/" and parts[1][1]:
            lo, hi = ivs[1]
            if parts[1][2]:
                t, c = sorted(parts[1][2])[0]
                raise MissingAttackerBound(
                    f"the divisor depends on {t}.{c}, which has no attacker range; "
                    f"without bounds the quotient is unbounded")
            if lo <= 0 <= hi:
                raise MissingAttackerBound(
                    f"the divisor can reach 0 within the attacker ranges ({lo}, {hi}); narrow the range")
    result = (out, sens, missing)
    memo[node.id] = result
    return result


def _combine(kind, op, ivs):
    full = (-math.inf, math.inf)
    if kind in ("cmp", "and", "or", "not"):
        return (0.0, 1.0)
    if kind == "neg":
        lo, hi = ivs[0]
        return (-hi, -lo)
    if kind == "arith":
        (a, b), (c, d) = ivs
        with np.errstate(all="ignore"):
            if op == "+":
                return (a + c, b + d)
            if op == "-":
                return (a - d, b - c)
            if op == "*":
                prods = [x * y for x in (a, b) for y in (c, d)]
                prods = [p for p in prods if not math.isnan(p)]
                return (min(prods), max(prods)) if prods else full
            if op == "/":
                if c <= 0 <= d:
                    return full
                quots = [x / y for x in (a, b) for y in (c, d)]
                return (min(quots), max(quots))
        return full
    if kind == "func":
        if op == "sqrt":
            lo, hi = ivs[0]
            return (math.sqrt(max(lo, 0.0)), math.sqrt(max(hi, 0.0)))
        if op == "abs":
            lo, hi = ivs[0]
            if lo >= 0:
                return (lo, hi)
            if hi <= 0:
                return (-hi, -lo)
            return (0.0, max(-lo, hi))
        if op == "least":
            return (min(i[0] for i in ivs), min(i[1] for i in ivs))
        if op == "greatest":
            return (max(i[0] for i in ivs), max(i[1] for i in ivs))
    return full


@dataclass
class SmoothFunction:
    """Smoothed query output as a function of the sensitive coordinates of one table."""

    target: AggTarget
    table: str
    norm: NormSpec
    rows: list[int]
    cols: list[str]
    baseline: np.ndarray
    builder: DagBuilder = field(repr=False)
    columns: dict = field(repr=False)
    grid: Grid = field(repr=False)
    a: float = DEFAULT_A

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns[self.table].values()))) if self.columns[self.table] else 0

    def evaluate(self, x=None) -> tuple[float, np.ndarray]:
        """Value and gradient at ``x`` (shape rows x cols; default the baseline)."""
        x = self.baseline if x is None else np.asarray(x, dtype=np.float64).reshape(self.baseline.shape)
        cols = dict(self.columns)
        if self.cols and self.rows:
            t = dict(cols[self.table])
            for j, c in enumerate(self.cols):
                arr = t[c].copy()
                arr[self.rows] = x[:, j]
                t[c] = arr
            cols[self.table] = t
        engine = Engine(self.builder, cols, self.grid, self.table, self.cols, self.a)
        value, grads = engine.reduce(self.target, self.n_rows)
        g = np.zeros_like(self.baseline)
        for j, c in enumerate(self.cols):
            if c in grads:
                g[:, j] = np.asarray(grads[c])[self.rows]
        return value, g

    def __call__(self, x=None):
        return self.evaluate(x)


def smooth_lower(source, db: dict[str, TableData], norm: NormSpec, ranges: Ranges | None = None,
                 table: str | None = None, a: float = DEFAULT_A, output: str | None = None) -> SmoothFunction:
    """Build the smoothed aggregate for ``source`` (a query or workflow) w.r.t. ``table``."""
    wf = as_workflow(source, db)
    builder = DagBuilder(wf.funcs)
    target = aggregate_target(wf, output, builder)
    if target.distinct:
        raise UnsupportedAggregation("counting DISTINCT rows has no smooth form; use local row sensitivity")
    if target.kind not in ("COUNT", "SUM", "MIN", "MAX"):
        raise UnsupportedAggregation(target.kind)
    if table is None:
        tables = sorted({t for t, _ in target.symbols})
        if len(tables) != 1:
            raise SymbolicError(f"choose the sensitive table among {tables}")
        table = tables[0]
    if table not in db:
        raise SymbolicError(f"no data for table {table!r}")
    columns = {name: table_columns(data) for name, data in db.items()}
    schema = db[table].schema
    for c in norm.cols:
        if c not in schema.column_names or not schema.is_numeric(c):
            raise SymbolicError(f"sensitive column {table}.{c} is missing or not numeric")
    cols = list(norm.cols)
    rows = norm.sensitive_rows(len(db[table].rows)) if cols else []
    baseline = np.array([[columns[table][c][r] for c in cols] for r in rows], dtype=np.float64).reshape(len(rows), len(cols))
    sizes = {name: len(data.rows) for name, data in db.items()}
    grid = Grid(target.symbols, sizes)
    memo: dict = {}
    for root in (target.value, target.cond):
        _intervals(root, builder, columns, table, set(cols), ranges or {}, memo)
    if target.kind in ("MIN", "MAX") and grid.size == 0:
        raise SymbolicError(f"{target.kind} over an empty join")
    return SmoothFunction(target, table, norm, rows, cols, baseline, builder, columns, grid, a)


def row_duals(fn: SmoothFunction, grad: np.ndarray, norm: NormSpec | None = None) -> list[float]:
    """Dual row norm of each sensitive row's gradient block."""
    norm = norm or fn.norm
    return [norm.dual_row_norm(dict(zip(fn.cols, grad[i]))) for i in range(len(fn.rows))]


def derivative_sensitivity(fn: SmoothFunction, norm: NormSpec | None = None, x=None) -> float:
    norm = norm or fn.norm
    _, grad = fn.evaluate(x)
    return norm.combine(row_duals(fn, grad, norm))


def smooth_bound(fn: SmoothFunction, norm: NormSpec | None, beta: float, ranges: Ranges | None) -> float:
    """Grid-search estimate of sup over D' of c(D') * exp(-beta * d(D, D'))."""
    norm = norm or fn.norm
    if beta < 0:
        raise ValueError("beta must be non-negative")
    beta = min(beta, BETA_CAP)
    ranges = ranges or {}
    best = derivative_sensitivity(fn, norm)
    for j, c in enumerate(fn.cols):
        if (fn.table, c) not in ranges:
            raise MissingAttackerBound(f"smooth bound needs an attacker range for {fn.table}.{c}")
        lo, hi = ranges[(fn.table, c)]
        points = np.linspace(lo, hi, GRID_POINTS)
        for i in range(len(fn.rows)):
            for v in points:
                x = fn.baseline.copy()
                delta = v - x[i, j]
                if delta == 0:
                    continue
                x[i, j] = v
                d = norm.row_norm({c: delta})
                best = max(best, derivative_sensitivity(fn, norm, x) * math.exp(-beta * d))
    return best
