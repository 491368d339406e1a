"""Concrete query evaluation; the ground truth every analysis is checked against."""
from __future__ import annotations

import itertools
from typing import Callable

from pleak.errors import EvaluationError
from pleak.sql import ops
from pleak.sql.ast import Binary, Call, Column, Const, Expr, SelectQuery, Unary
from pleak.sql.tables import TableData, TableSchema
from pleak.sql.typing import FuncDef, check_query, type_of


def compile_expr(expr: Expr, slots: dict[str, tuple[int, TableSchema]],
                 funcs: dict[str, FuncDef]) -> Callable:
    """Turn ``expr`` into ``fn(combo)`` where ``combo[i]`` is the row bound to source i."""

    def column_type(col):
        pos, schema = slots[col.table]
        return schema.type_of(col.name)

    def build(e: Expr):
        if isinstance(e, Const):
            value = e.value
            return lambda combo: value
        if isinstance(e, Column):
            pos, schema = slots[e.table]
            idx = schema.index(e.name)
            return lambda combo: combo[pos][idx]
        if isinstance(e, Unary):
            inner = build(e.operand)
            if e.op == "NOT":
                return lambda combo: not inner(combo)
            return lambda combo: -inner(combo)
        if isinstance(e, Binary):
            left, right = build(e.left), build(e.right)
            if e.op == "AND":
                return lambda combo: left(combo) and right(combo)
            if e.op == "OR":
                return lambda combo: left(combo) or right(combo)
            if e.op in ("<", "<=", ">", ">=", "=", "<>"):
                op = e.op
                return lambda combo: ops.compare(op, left(combo), right(combo))
            op, rtype = e.op, type_of(e, column_type, funcs)
            return lambda combo: ops.arith(op, left(combo), right(combo), rtype)
        if isinstance(e, Call):
            args = [build(a) for a in e.args]
            if e.name in funcs:
                return _compile_call(funcs[e.name], args, funcs)
            name, rtype = e.name, type_of(e, column_type, funcs)
            return lambda combo: ops.builtin(name, [a(combo) for a in args], rtype)
        raise TypeError(e)

    return build(expr)


def _compile_call(f: FuncDef, args, funcs):
    param_schema = TableSchema(f"{f.name}$args", f.params)
    # function bodies reference bare parameter names
    body = compile_expr(_bind_params(f.body), {"$p": (0, param_schema)}, funcs)
    rtype = f.return_type

    def call(combo):
        values = tuple(ops.coerce_to(a(combo), t) for a, (_, t) in zip(args, f.params))
        return ops.coerce_to(body((values,)), rtype)

    return call


def _bind_params(expr: Expr) -> Expr:
    from pleak.sql.typing import qualify

    return qualify(expr, lambda col: ("$p", None))


def eval_query(query: SelectQuery, db: dict[str, TableData],
               funcs: dict[str, FuncDef] | None = None) -> TableData:
    """Evaluate ``query`` with bag semantics (set semantics under DISTINCT)."""
    funcs = funcs or {}
    schemas = {name: t.schema for name, t in db.items()}
    for table, _ in query.sources:
        if table not in db:
            raise EvaluationError(f"table {table!r} is not in the database")
    q, out_schema = check_query(query, schemas, funcs)
    slots = {alias: (i, schemas[table]) for i, (table, alias) in enumerate(q.sources)}
    pred = compile_expr(q.predicate, slots, funcs)
    tables = [db[table].rows for table, _ in q.sources]

    def matching():
        for n, combo in enumerate(itertools.product(*tables)):
            try:
                if pred(combo):
                    yield combo
            except EvaluationError as exc:
                raise EvaluationError(f"{exc} while evaluating source row combination {n}: {combo}") from None

    if q.aggregation is not None:
        agg = q.aggregation
        out_type = out_schema.columns[0][1]
        if agg.expr is None:
            value = sum(1 for _ in matching())
        else:
            fn = compile_expr(agg.expr, slots, funcs)
            values = [fn(c) for c in matching()]
            if agg.kind == "SUM":
                value = ops.coerce_to(sum(values), out_type) if values else (0 if out_type == "INT8" else 0.0)
            elif not values:
                raise EvaluationError(f"{agg.kind} over an empty set")
            else:
                value = min(values) if agg.kind == "MIN" else max(values)
        return TableData(out_schema, ((value,),))

    projs = [compile_expr(e, slots, funcs) for e, _ in q.projections]
    types = [t for _, t in out_schema.columns]
    rows = []
    for combo in matching():
        try:
            rows.append(tuple(ops.coerce_to(p(combo), t) for p, t in zip(projs, types)))
        except EvaluationError as exc:
            raise EvaluationError(f"{exc} in source row combination {combo}") from None
    if q.distinct:
        rows = list(dict.fromkeys(rows))
    return TableData(out_schema, tuple(rows))


def count_rows(query: SelectQuery, db: dict[str, TableData], funcs=None) -> int:
    """COUNT-style value: row count of a plain SELECT, or the value of COUNT(*)."""
    result = eval_query(query, db, funcs)
    if query.aggregation is not None:
        if query.aggregation.kind != "COUNT":
            raise ValueError("not a COUNT-style query")
        return result.rows[0][0]
    return len(result.rows)
