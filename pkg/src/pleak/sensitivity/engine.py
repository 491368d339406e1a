"""Vectorized evaluation of an aggregate DAG over the product of its row symbols.

Values are numpy arrays over every combination of source rows. Derivatives
with respect to sensitive attributes are carried forward alongside the
values, keyed by (column, row symbol), and scattered back onto table rows at
the end. Comparisons that depend on sensitive attributes are replaced by
sigmoids of their margin; everything else is evaluated exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pleak.errors import EvaluationError, SymbolicError, UnsupportedAggregation
from pleak.kernels import sigmoid, smooth_reduce
from pleak.sql.tables import TableData
from pleak.symexec import DagBuilder, Node, inline_call

ZERO = np.zeros(1)


@dataclass
class AggTarget:
    """A COUNT/SUM/MIN/MAX over the rows of ``symbols`` satisfying ``cond``."""

    kind: str
    symbols: tuple[tuple[str, int], ...]
    value: Node
    cond: Node
    distinct: bool = False
    projections: tuple[Node, ...] = ()


def table_columns(data: TableData) -> dict[str, np.ndarray]:
    cols = {}
    for i, (name, type_) in enumerate(data.schema.columns):
        values = [row[i] for row in data.rows]
        if type_ in ("INT8", "FLOAT8"):
            cols[name] = np.asarray(values, dtype=np.float64)
        elif type_ == "BOOL":
            cols[name] = np.asarray(values, dtype=bool)
        else:
            cols[name] = np.asarray(values, dtype=object)
    return cols


class Grid:
    """Row-index arrays enumerating the product of the symbols' tables."""

    def __init__(self, symbols, sizes: dict[str, int]):
        self.symbols = tuple(symbols)
        shape = [sizes[t] for t, _ in self.symbols]
        self.size = int(np.prod(shape)) if shape else 1
        if self.symbols:
            idx = np.indices(shape).reshape(len(shape), -1)
        else:
            idx = np.zeros((0, 1), dtype=np.intp)
        self.index = {sym: idx[k] for k, sym in enumerate(self.symbols)}


class Engine:
    def __init__(self, builder: DagBuilder, columns: dict[str, dict[str, np.ndarray]], grid: Grid,
                 sensitive_table: str | None = None, sensitive_cols=(), a: float = 10.0, smooth: bool = True):
        self.builder = builder
        self.columns = columns
        self.grid = grid
        self.table = sensitive_table
        self.sens_cols = set(sensitive_cols)
        self.a = a
        self.smooth = smooth
        self.memo: dict[int, tuple] = {}

    def full(self, value):
        return np.broadcast_to(np.asarray(value), (self.grid.size,))

    def eval(self, node: Node):
        got = self.memo.get(node.id)
        if got is None:
            got = self._eval(node)
            self.memo[node.id] = got
        return got

    def _eval(self, node: Node):
        kind = node.kind
        if kind == "const":
            v = node.value
            if node.type in ("INT8", "FLOAT8", "BOOL"):
                v = float(v)
            return v, {}
        if kind == "input":
            table, column, row = node.payload
            idx = self.grid.index.get((table, row))
            if idx is None:
                raise SymbolicError(f"row symbol {table}[{row}] is not bound")
            values = self.columns[table][column][idx]
            if values.dtype == bool:
                values = values.astype(np.float64)
            partials = {}
            if table == self.table and column in self.sens_cols:
                partials[(column, (table, row))] = 1.0
            return values, partials
        if kind == "agg":
            raise UnsupportedAggregation("nested aggregations cannot be smoothed")
        if kind == "filter":
            raise SymbolicError("filter nodes cannot be evaluated numerically")
        if kind == "func" and node.payload in self.builder.funcs:
            return self.eval(inline_call(node, self.builder))
        args = [self.eval(c) for c in node.children]
        return getattr(self, "_" + kind)(node, args)

    # arithmetic
    def _arith(self, node, args):
        (x, dx), (y, dy) = args
        op = node.payload
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if op == "+":
                return x + y, _lin(dx, 1.0, dy, 1.0)
            if op == "-":
                return x - y, _lin(dx, 1.0, dy, -1.0)
            if op == "*":
                return x * y, _lin(dx, y, dy, x)
            if op == "/":
                v = x / y
                if node.type == "INT8" and not (dx or dy):
                    v = np.trunc(v)
                return v, _lin(dx, 1.0 / y, dy, -x / (y * y))
            if op == "^":
                v = np.power(x, y)
                d = _lin(dx, y * np.power(x, y - 1.0), {}, 0.0)
                if dy:
                    d = _add(d, _scale(dy, v * np.log(x)))
                return v, d
        raise ValueError(op)

    def _neg(self, node, args):
        (x, dx), = args
        return -x, _scale(dx, -1.0)

    def _func(self, node, args):
        name = node.payload
        vals = [v for v, _ in args]
        if name == "sqrt":
            (x, dx), = args
            if np.any(np.asarray(x) < 0):
                raise EvaluationError("sqrt of a negative value")
            v = np.sqrt(x)
            with np.errstate(divide="ignore"):
                return v, _scale(dx, 0.5 / v)
        if name == "abs":
            (x, dx), = args
            return np.abs(x), _scale(dx, np.sign(x))
        pick = np.argmin if name == "least" else np.argmax
        stacked = np.stack([self.full(v) for v in vals])
        choice = pick(stacked, axis=0)
        v = stacked[choice, np.arange(stacked.shape[1])]
        d: dict = {}
        for i, (_, di) in enumerate(args):
            d = _add(d, _scale(di, (choice == i).astype(np.float64)))
        return v, d

    # booleans
    def _cmp(self, node, args):
        (x, dx), (y, dy) = args
        op = node.payload
        if self.smooth and (dx or dy) and op in ("<", "<=", ">", ">="):
            if op in ("<", "<="):
                margin, dm = y - x, _lin(dy, 1.0, dx, -1.0)
            else:
                margin, dm = x - y, _lin(dx, 1.0, dy, -1.0)
            s, ds = sigmoid(self.full(margin), self.a)
            return s, _scale(dm, ds)
        from pleak.sql.ops import compare

        if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
            x, y = self.full(x), self.full(y)
            ops = {"<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal,
                   "=": np.equal, "<>": np.not_equal}
            return ops[op](x, y).astype(np.float64), {}
        return float(compare(op, x, y)), {}

    def _and(self, node, args):
        (p, dp), (q, dq) = args
        return p * q, _lin(dp, q, dq, p)

    def _or(self, node, args):
        (p, dp), (q, dq) = args
        return 1.0 - (1.0 - p) * (1.0 - q), _lin(dp, 1.0 - q, dq, 1.0 - p)

    def _not(self, node, args):
        (p, dp), = args
        return 1.0 - p, _scale(dp, -1.0)

    # aggregate
    def reduce(self, target: AggTarget, n_rows: int | None = None):
        """Smoothed aggregate value and its gradient per sensitive column (arrays over table rows)."""
        s, ds = self.eval(target.cond)
        s = np.array(self.full(s), dtype=np.float64)
        if target.kind == "COUNT":
            v, dv = 0.0, {}
        else:
            v, dv = self.eval(target.value)
        v = np.array(self.full(v), dtype=np.float64)
        bad = ~np.isfinite(v)
        if np.any(bad & (s > 0)):
            raise EvaluationError("aggregate operand is undefined (division by zero) on a contributing row")
        v[bad] = 0.0
        value, gv, gs = smooth_reduce(target.kind, v, s, self.a)
        if math.isnan(value):
            raise EvaluationError(f"{target.kind} over an empty set")
        grads: dict[str, np.ndarray] = {}
        if n_rows is None:
            return float(value), grads
        for key, d in _add(_scale(dv, gv), _scale(ds, gs)).items():
            col, sym = key
            w = np.array(self.full(d), dtype=np.float64)
            w[bad] = 0.0
            contrib = np.bincount(self.grid.index[sym], weights=w, minlength=n_rows)
            grads[col] = grads.get(col, 0.0) + contrib
        return float(value), grads


def _scale(d: dict, factor) -> dict:
    return {k: v * factor for k, v in d.items()}


def _add(a: dict, b: dict) -> dict:
    if not a:
        return dict(b)
    out = dict(a)
    for k, v in b.items():
        out[k] = out[k] + v if k in out else v
    return out


def _lin(da: dict, fa, db: dict, fb) -> dict:
    return _add(_scale(da, fa), _scale(db, fb))
