"""Name resolution and type checking for queries and stored functions."""
from __future__ import annotations

from dataclasses import dataclass, replace

from pleak.errors import SqlError, SqlTypeError, UnknownIdentifier
from pleak.sql.ast import (
    BUILTINS,
    CMP_OPS,
    NUMERIC,
    Binary,
    Call,
    Column,
    Const,
    CreateFunction,
    CreateTable,
    Expr,
    SelectQuery,
    Unary,
)
from pleak.sql.tables import TableSchema


@dataclass(frozen=True)
class FuncDef:
    name: str
    params: tuple[tuple[str, str], ...]
    return_type: str
    body: Expr

    @property
    def param_names(self) -> list[str]:
        return [p for p, _ in self.params]


def _pos(expr):
    return expr.pos if getattr(expr, "pos", None) else (None, None)


def _fail(cls, message, expr):
    line, col = _pos(expr)
    raise cls(message, line, col)


def numeric_result(a: str, b: str) -> str:
    return "INT8" if a == b == "INT8" else "FLOAT8"


def assignable(src: str, dst: str) -> bool:
    return src == dst or (src == "INT8" and dst == "FLOAT8")


def type_of(expr: Expr, column_type, funcs: dict[str, FuncDef]) -> str:
    """Type of ``expr``; ``column_type(Column)`` resolves column references."""
    if isinstance(expr, Const):
        return expr.type
    if isinstance(expr, Column):
        return column_type(expr)
    if isinstance(expr, Unary):
        t = type_of(expr.operand, column_type, funcs)
        if expr.op == "NOT":
            if t != "BOOL":
                _fail(SqlTypeError, f"NOT applied to {t}", expr)
            return "BOOL"
        if t not in NUMERIC:
            _fail(SqlTypeError, f"unary minus applied to {t}", expr)
        return t
    if isinstance(expr, Binary):
        lt = type_of(expr.left, column_type, funcs)
        rt = type_of(expr.right, column_type, funcs)
        if expr.op in ("AND", "OR"):
            if lt != "BOOL" or rt != "BOOL":
                _fail(SqlTypeError, f"{expr.op} needs BOOL operands, got {lt} and {rt}", expr)
            return "BOOL"
        if expr.op in CMP_OPS:
            if not (lt == rt or (lt in NUMERIC and rt in NUMERIC)):
                _fail(SqlTypeError, f"cannot compare {lt} with {rt}", expr)
            return "BOOL"
        if lt not in NUMERIC or rt not in NUMERIC:
            _fail(SqlTypeError, f"operator {expr.op} needs numeric operands, got {lt} and {rt}", expr)
        if expr.op == "^":
            return "FLOAT8"
        return numeric_result(lt, rt)
    if isinstance(expr, Call):
        arg_types = [type_of(a, column_type, funcs) for a in expr.args]
        if expr.name in funcs:
            f = funcs[expr.name]
            if len(arg_types) != len(f.params):
                _fail(SqlTypeError, f"{expr.name} expects {len(f.params)} arguments", expr)
            for (pname, ptype), at in zip(f.params, arg_types):
                if not assignable(at, ptype):
                    _fail(SqlTypeError, f"argument {pname} of {expr.name} expects {ptype}, got {at}", expr)
            return f.return_type
        if expr.name in BUILTINS:
            if not arg_types or any(t not in NUMERIC for t in arg_types):
                _fail(SqlTypeError, f"{expr.name} needs numeric arguments", expr)
            if expr.name in ("sqrt", "abs") and len(arg_types) != 1:
                _fail(SqlTypeError, f"{expr.name} takes one argument", expr)
            if expr.name == "sqrt":
                return "FLOAT8"
            result = arg_types[0]
            for t in arg_types[1:]:
                result = numeric_result(result, t)
            return result
        _fail(UnknownIdentifier, f"unknown function {expr.name!r}", expr)
    raise TypeError(expr)


def check_function(stmt: CreateFunction, funcs: dict[str, FuncDef]) -> FuncDef:
    if stmt.name in funcs or stmt.name in BUILTINS:
        raise SqlError(f"function {stmt.name!r} is already defined")
    params = dict(stmt.params)

    def column_type(col: Column) -> str:
        if col.table is not None or col.name not in params:
            _fail(UnknownIdentifier, f"function {stmt.name!r} body references unknown name {col.name!r}", col)
        return params[col.name]

    body_type = type_of(stmt.body, column_type, funcs)
    if not assignable(body_type, stmt.return_type):
        raise SqlTypeError(f"function {stmt.name!r} returns {body_type}, declared {stmt.return_type}")
    return FuncDef(stmt.name, stmt.params, stmt.return_type, stmt.body)


def qualify(expr: Expr, resolve) -> Expr:
    """Rewrite every column reference to its (alias, column) form."""
    if isinstance(expr, Column):
        alias = resolve(expr)[0]
        return Column(alias, expr.name, pos=expr.pos)
    if isinstance(expr, Unary):
        return replace(expr, operand=qualify(expr.operand, resolve))
    if isinstance(expr, Binary):
        return replace(expr, left=qualify(expr.left, resolve), right=qualify(expr.right, resolve))
    if isinstance(expr, Call):
        return replace(expr, args=tuple(qualify(a, resolve) for a in expr.args))
    return expr


def check_query(query: SelectQuery, schemas: dict[str, TableSchema],
                funcs: dict[str, FuncDef]) -> tuple[SelectQuery, TableSchema]:
    """Resolve names and types; returns the fully qualified query and its output schema."""
    if query.distinct and query.aggregation is not None:
        raise SqlError("DISTINCT cannot be combined with an aggregation")
    scope: dict[str, TableSchema] = {}
    for table, alias in query.sources:
        if table not in schemas:
            line, col = query.pos or (None, None)
            raise UnknownIdentifier(f"unknown table {table!r}", line, col)
        if alias in scope:
            raise SqlError(f"alias {alias!r} used twice")
        scope[alias] = schemas[table]

    def resolve(col: Column) -> tuple[str, str]:
        if col.table is not None:
            if col.table not in scope:
                _fail(UnknownIdentifier, f"unknown table or alias {col.table!r}", col)
            schema = scope[col.table]
            if col.name not in schema.column_names:
                _fail(UnknownIdentifier, f"table {schema.name!r} has no column {col.name!r}", col)
            return col.table, schema.type_of(col.name)
        hits = [(a, s) for a, s in scope.items() if col.name in s.column_names]
        if not hits:
            _fail(UnknownIdentifier, f"unknown column {col.name!r}", col)
        if len(hits) > 1:
            _fail(SqlError, f"column {col.name!r} is ambiguous", col)
        alias, schema = hits[0]
        return alias, schema.type_of(col.name)

    def column_type(col):
        return resolve(col)[1]

    pred_type = type_of(query.predicate, column_type, funcs)
    if pred_type != "BOOL":
        _fail(SqlTypeError, f"WHERE clause has type {pred_type}, expected BOOL", query.predicate)
    predicate = qualify(query.predicate, resolve)

    names = query.output_names()
    if query.aggregation is not None:
        agg = query.aggregation
        if agg.expr is None:
            out_type = "INT8"
            new_agg = agg
        else:
            out_type = type_of(agg.expr, column_type, funcs)
            if out_type not in NUMERIC:
                _fail(SqlTypeError, f"{agg.kind} needs a numeric argument", agg.expr)
            new_agg = replace(agg, expr=qualify(agg.expr, resolve))
        columns = ((names[0], out_type),)
        checked = replace(query, aggregation=new_agg, predicate=predicate)
    else:
        if len(set(names)) != len(names):
            raise SqlError(f"duplicate output column names {names}")
        types = [type_of(e, column_type, funcs) for e, _ in query.projections]
        columns = tuple(zip(names, types))
        projections = tuple((qualify(e, resolve), a) for e, a in query.projections)
        checked = replace(query, projections=projections, predicate=predicate)
    return checked, TableSchema(query.into or "result", columns)


def check_script(stmts, schemas=None) -> dict[str, FuncDef]:
    """Check functions always; queries only when a schema catalog is supplied."""
    funcs: dict[str, FuncDef] = {}
    catalog = dict(schemas) if schemas is not None else None
    for stmt in stmts:
        if isinstance(stmt, CreateFunction):
            f = check_function(stmt, funcs)
            funcs[f.name] = f
        elif isinstance(stmt, CreateTable) and catalog is not None:
            catalog[stmt.name] = TableSchema.from_create(stmt)
    if catalog is not None:
        for stmt in stmts:
            if isinstance(stmt, SelectQuery):
                _, out = check_query(stmt, catalog, funcs)
                if stmt.into:
                    catalog[stmt.into] = out
    return funcs
