"""Tokenizer and recursive-descent parser for the SQL subset."""
from __future__ import annotations

import re
from dataclasses import dataclass

from pleak.errors import SqlSyntaxError
from pleak.sql.ast import (
    AGG_KINDS,
    Aggregate,
    Binary,
    Call,
    Column,
    Const,
    CreateFunction,
    CreateTable,
    SelectQuery,
    Statement,
    Unary,
)

KEYWORDS = {
    "SELECT", "DISTINCT", "INTO", "FROM", "WHERE", "AS", "AND", "OR", "NOT",
    "TRUE", "FALSE", "CREATE", "TABLE", "FUNCTION", "RETURNS", "PRIMARY", "KEY",
}

TYPE_ALIASES = {
    "INT8": "INT8", "INT": "INT8", "INTEGER": "INT8", "BIGINT": "INT8", "INT4": "INT8",
    "FLOAT8": "FLOAT8", "FLOAT": "FLOAT8", "REAL": "FLOAT8", "DOUBLE": "FLOAT8", "NUMERIC": "FLOAT8",
    "FLOAT4": "FLOAT8",
    "TEXT": "TEXT", "VARCHAR": "TEXT",
    "BOOL": "BOOL", "BOOLEAN": "BOOL",
}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|--[^\n]*)
  | (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+)
  | (?P<str>'(?:[^']|'')*')
  | (?P<qid>"[^"]+")
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|<>|!=|[-+*/^<>=(),;.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # kw, id, num, str, op, eof
    value: object
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SqlSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind, lexeme = m.lastgroup, m.group()
        col = pos - line_start + 1
        if kind == "num":
            value = float(lexeme) if any(c in lexeme for c in ".eE") else int(lexeme)
            tokens.append(Token("num", value, line, col))
        elif kind == "str":
            tokens.append(Token("str", lexeme[1:-1].replace("''", "'"), line, col))
        elif kind == "qid":
            tokens.append(Token("id", lexeme[1:-1], line, col))
        elif kind == "id":
            upper = lexeme.upper()
            if upper in KEYWORDS:
                tokens.append(Token("kw", upper, line, col))
            else:
                tokens.append(Token("id", lexeme.lower(), line, col))
        elif kind == "op":
            tokens.append(Token("op", "<>" if lexeme == "!=" else lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = pos + lexeme.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", None, line, pos - line_start + 1))
    return tokens


class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, expected: str):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.value)
        raise SqlSyntaxError(f"expected {expected}, found {found}", t.line, t.col)

    def at(self, kind, value=None) -> bool:
        t = self.tok
        return t.kind == kind and (value is None or t.value == value)

    def accept(self, kind, value=None):
        if self.at(kind, value):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, kind, value=None, what=None):
        t = self.accept(kind, value)
        if t is None:
            self.error(what or (value if value is not None else kind))
        return t

    def ident(self, what="identifier") -> str:
        return self.expect("id", what=what).value

    def type_name(self) -> str:
        t = self.tok
        if t.kind == "id" and t.value.upper() in TYPE_ALIASES:
            self.i += 1
            if t.value.upper() == "DOUBLE" and self.at("id", "precision"):
                self.i += 1
            return TYPE_ALIASES[t.value.upper()]
        self.error("type name")

    # -- statements
    def script(self) -> list[Statement]:
        stmts = []
        while not self.at("eof"):
            if self.accept("op", ";"):
                continue
            stmts.append(self.statement())
            if not self.at("eof"):
                self.expect("op", ";", "';'")
        return stmts

    def statement(self) -> Statement:
        if self.at("kw", "CREATE"):
            self.i += 1
            if self.accept("kw", "TABLE"):
                return self.create_table()
            if self.accept("kw", "FUNCTION"):
                return self.create_function()
            self.error("TABLE or FUNCTION")
        if self.at("kw", "SELECT"):
            return self.select()
        self.error("SELECT or CREATE")

    def create_table(self) -> CreateTable:
        name = self.ident("table name")
        self.expect("op", "(", "'('")
        cols, key = [], None
        while True:
            if self.accept("kw", "PRIMARY"):
                self.expect("kw", "KEY")
                self.expect("op", "(", "'('")
                key = [self.ident("column name")]
                while self.accept("op", ","):
                    key.append(self.ident("column name"))
                self.expect("op", ")", "')'")
            else:
                cols.append((self.ident("column name"), self.type_name()))
            if not self.accept("op", ","):
                break
        self.expect("op", ")", "')'")
        return CreateTable(name, tuple(cols), tuple(key) if key else None)

    def create_function(self) -> CreateFunction:
        name = self.ident("function name")
        self.expect("op", "(", "'('")
        params = []
        if not self.at("op", ")"):
            params.append((self.ident("parameter name"), self.type_name()))
            while self.accept("op", ","):
                params.append((self.ident("parameter name"), self.type_name()))
        self.expect("op", ")", "')'")
        if not (self.at("kw", "RETURNS")):
            self.error("RETURNS")
        self.i += 1
        ret = self.type_name()
        self.expect("kw", "AS", "AS")
        return CreateFunction(name, tuple(params), ret, self.expr())

    def select(self) -> SelectQuery:
        start = self.expect("kw", "SELECT")
        distinct = bool(self.accept("kw", "DISTINCT"))
        aggregation, projections = None, []
        t, nxt = self.tok, self.tokens[self.i + 1]
        if t.kind == "id" and t.value.upper() in AGG_KINDS and nxt.kind == "op" and nxt.value == "(":
            kind = t.value.upper()
            self.i += 2
            if kind == "COUNT":
                self.expect("op", "*", "'*'")
                inner = None
            else:
                inner = self.expr()
            self.expect("op", ")", "')'")
            alias = self.ident("alias") if self.accept("kw", "AS") else None
            aggregation = Aggregate(kind, inner, alias)
        else:
            projections.append(self.projection())
            while self.accept("op", ","):
                projections.append(self.projection())
        into = self.ident("table name") if self.accept("kw", "INTO") else None
        self.expect("kw", "FROM", "FROM")
        sources = [self.source()]
        while self.accept("op", ","):
            sources.append(self.source())
        predicate = self.expr() if self.accept("kw", "WHERE") else Const(True, "BOOL")
        return SelectQuery(distinct, tuple(projections), aggregation, tuple(sources), predicate, into,
                           pos=(start.line, start.col))

    def projection(self):
        e = self.expr()
        alias = self.ident("alias") if self.accept("kw", "AS") else None
        return e, alias

    def source(self):
        table = self.ident("table name")
        if self.accept("kw", "AS"):
            return table, self.ident("alias")
        if self.at("id"):
            return table, self.ident()
        return table, table

    # -- expressions, lowest precedence first
    def expr(self):
        return self.or_expr()

    def or_expr(self):
        left = self.and_expr()
        while self.at("kw", "OR"):
            t = self.tok
            self.i += 1
            left = Binary("OR", left, self.and_expr(), pos=(t.line, t.col))
        return left

    def and_expr(self):
        left = self.not_expr()
        while self.at("kw", "AND"):
            t = self.tok
            self.i += 1
            left = Binary("AND", left, self.not_expr(), pos=(t.line, t.col))
        return left

    def not_expr(self):
        if self.at("kw", "NOT"):
            t = self.tok
            self.i += 1
            return Unary("NOT", self.not_expr(), pos=(t.line, t.col))
        return self.comparison()

    def comparison(self):
        left = self.additive()
        if self.tok.kind == "op" and self.tok.value in ("<", "<=", ">", ">=", "=", "<>"):
            t = self.tok
            self.i += 1
            return Binary(t.value, left, self.additive(), pos=(t.line, t.col))
        return left

    def additive(self):
        left = self.multiplicative()
        while self.tok.kind == "op" and self.tok.value in ("+", "-"):
            t = self.tok
            self.i += 1
            left = Binary(t.value, left, self.multiplicative(), pos=(t.line, t.col))
        return left

    def multiplicative(self):
        left = self.power()
        while self.tok.kind == "op" and self.tok.value in ("*", "/"):
            t = self.tok
            self.i += 1
            left = Binary(t.value, left, self.power(), pos=(t.line, t.col))
        return left

    def power(self):
        base = self.unary()
        if self.at("op", "^"):
            t = self.tok
            self.i += 1
            return Binary("^", base, self.power(), pos=(t.line, t.col))
        return base

    def unary(self):
        if self.at("op", "-"):
            t = self.tok
            self.i += 1
            operand = self.unary()
            if isinstance(operand, Const) and operand.type in ("INT8", "FLOAT8"):
                return Const(-operand.value, operand.type, pos=(t.line, t.col))
            return Unary("-", operand, pos=(t.line, t.col))
        if self.accept("op", "+"):
            return self.unary()
        return self.primary()

    def primary(self):
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "num":
            self.i += 1
            return Const(t.value, "FLOAT8" if isinstance(t.value, float) else "INT8", pos=pos)
        if t.kind == "str":
            self.i += 1
            return Const(t.value, "TEXT", pos=pos)
        if t.kind == "kw" and t.value in ("TRUE", "FALSE"):
            self.i += 1
            return Const(t.value == "TRUE", "BOOL", pos=pos)
        if self.accept("op", "("):
            inner = self.expr()
            self.expect("op", ")", "')'")
            return inner
        if t.kind == "id":
            self.i += 1
            if self.accept("op", "("):
                args = []
                if not self.at("op", ")"):
                    args.append(self.expr())
                    while self.accept("op", ","):
                        args.append(self.expr())
                self.expect("op", ")", "')'")
                return Call(t.value, tuple(args), pos=pos)
            if self.accept("op", "."):
                return Column(t.value, self.ident("column name"), pos=pos)
            return Column(None, t.value, pos=pos)
        self.error("expression")


def parse_sql(text: str, schemas=None) -> list[Statement]:
    """Parse a script. With ``schemas`` (name -> TableSchema), queries are also type-checked."""
    stmts = Parser(text).script()
    from pleak.sql.typing import check_script

    check_script(stmts, schemas)
    return stmts


def parse_expr(text: str):
    p = Parser(text)
    e = p.expr()
    if not p.at("eof"):
        p.error("end of input")
    return e
