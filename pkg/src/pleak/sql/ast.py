"""AST for the supported SQL subset, plus a printer that the parser accepts back."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

TYPES = ("INT8", "FLOAT8", "TEXT", "BOOL")
NUMERIC = ("INT8", "FLOAT8")
ARITH_OPS = ("+", "-", "*", "/", "^")
CMP_OPS = ("<", "<=", ">", ">=", "=", "<>")
BOOL_OPS = ("AND", "OR")
AGG_KINDS = ("COUNT", "SUM", "MIN", "MAX")
BUILTINS = ("sqrt", "abs", "least", "greatest")


@dataclass(frozen=True)
class Column:
    table: str | None
    name: str
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Const:
    value: object
    type: str
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "NOT"
    operand: "Expr"
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    pos: tuple[int, int] | None = field(default=None, compare=False)

    @property
    def divisor(self) -> "Expr | None":
        return self.right if self.op == "/" else None


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]
    pos: tuple[int, int] | None = field(default=None, compare=False)


Expr = Union[Column, Const, Unary, Binary, Call]


@dataclass(frozen=True)
class Aggregate:
    kind: str
    expr: Expr | None = None  # None for COUNT(*)
    alias: str | None = None


@dataclass(frozen=True)
class SelectQuery:
    distinct: bool
    projections: tuple[tuple[Expr, str | None], ...]
    aggregation: Aggregate | None
    sources: tuple[tuple[str, str], ...]  # (table, alias)
    predicate: Expr
    into: str | None = None
    pos: tuple[int, int] | None = field(default=None, compare=False)

    @property
    def is_count_style(self) -> bool:
        return self.aggregation is None or self.aggregation.kind == "COUNT"

    def output_names(self) -> list[str]:
        if self.aggregation is not None:
            return [self.aggregation.alias or self.aggregation.kind.lower()]
        names = []
        for i, (expr, alias) in enumerate(self.projections):
            if alias:
                names.append(alias)
            elif isinstance(expr, Column):
                names.append(expr.name)
            else:
                names.append(f"col{i}")
        return names


@dataclass(frozen=True)
class CreateTable:
    name: str
    columns: tuple[tuple[str, str], ...]
    primary_key: tuple[str, ...] | None = None


@dataclass(frozen=True)
class CreateFunction:
    name: str
    params: tuple[tuple[str, str], ...]
    return_type: str
    body: Expr


Statement = Union[CreateTable, CreateFunction, SelectQuery]


def walk(expr: Expr):
    """Pre-order traversal of an expression tree."""
    yield expr
    if isinstance(expr, Unary):
        yield from walk(expr.operand)
    elif isinstance(expr, Binary):
        yield from walk(expr.left)
        yield from walk(expr.right)
    elif isinstance(expr, Call):
        for arg in expr.args:
            yield from walk(arg)


def divisors(expr: Expr) -> list[Expr]:
    return [e.right for e in walk(expr) if isinstance(e, Binary) and e.op == "/"]


# -- printing --------------------------------------------------------------

def _const_sql(c: Const) -> str:
    if c.type == "BOOL":
        return "TRUE" if c.value else "FALSE"
    if c.type == "TEXT":
        return "'" + str(c.value).replace("'", "''") + "'"
    if c.type == "FLOAT8":
        return repr(float(c.value))
    return str(c.value)


def expr_sql(expr: Expr) -> str:
    if isinstance(expr, Column):
        return f"{expr.table}.{expr.name}" if expr.table else expr.name
    if isinstance(expr, Const):
        return _const_sql(expr)
    if isinstance(expr, Unary):
        return f"(NOT {expr_sql(expr.operand)})" if expr.op == "NOT" else f"(-{expr_sql(expr.operand)})"
    if isinstance(expr, Binary):
        return f"({expr_sql(expr.left)} {expr.op} {expr_sql(expr.right)})"
    if isinstance(expr, Call):
        return f"{expr.name}({', '.join(expr_sql(a) for a in expr.args)})"
    raise TypeError(expr)


def to_sql(stmt: Statement) -> str:
    if isinstance(stmt, CreateTable):
        cols = [f"{n} {t}" for n, t in stmt.columns]
        if stmt.primary_key:
            cols.append(f"PRIMARY KEY ({', '.join(stmt.primary_key)})")
        return f"CREATE TABLE {stmt.name} ({', '.join(cols)});"
    if isinstance(stmt, CreateFunction):
        params = ", ".join(f"{n} {t}" for n, t in stmt.params)
        return f"CREATE FUNCTION {stmt.name}({params}) RETURNS {stmt.return_type} AS {expr_sql(stmt.body)};"
    parts = ["SELECT"]
    if stmt.distinct:
        parts.append("DISTINCT")
    if stmt.aggregation is not None:
        agg = stmt.aggregation
        inner = "*" if agg.expr is None else expr_sql(agg.expr)
        parts.append(f"{agg.kind}({inner})" + (f" AS {agg.alias}" if agg.alias else ""))
    else:
        parts.append(", ".join(expr_sql(e) + (f" AS {a}" if a else "") for e, a in stmt.projections))
    if stmt.into:
        parts.append(f"INTO {stmt.into}")
    parts.append("FROM " + ", ".join(t if t == a else f"{t} AS {a}" for t, a in stmt.sources))
    parts.append(f"WHERE {expr_sql(stmt.predicate)}")
    return " ".join(parts) + ";"
