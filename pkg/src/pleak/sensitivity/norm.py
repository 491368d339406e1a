"""Table-norm language: which rows and columns are sensitive and how changes are measured.

Example::

    rows: 3, 7;
    cols: latitude, longitude, length;
    u = lp 2.0 latitude longitude;
    v1 = scaleNorm 0.2 u;
    v2 = lp 1.0 length;
    z = lp 1.0 v1 v2;
    return linf z;
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

from pleak.errors import NormError

_TOKEN = re.compile(r"\s*(?:(#[^\n]*)|([A-Za-z_][A-Za-z0-9_]*)|(-?\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|-?\.\d+)|([:;,=]))")


@dataclass(frozen=True)
class NormExpr:
    kind: str  # lp | scaleNorm | linf
    param: float | None
    args: tuple[str, ...]


@dataclass(frozen=True)
class NormSpec:
    rows: tuple[int, ...] | None  # None means every row
    cols: tuple[str, ...]
    G: float | None = None
    bindings: tuple[tuple[str, NormExpr], ...] = ()
    combiner: tuple[str, float | None] = ("linf", None)
    result: str | None = None

    @property
    def binding_map(self) -> dict[str, NormExpr]:
        return dict(self.bindings)

    def sensitive_rows(self, n_rows: int) -> list[int]:
        if self.rows is None:
            return list(range(n_rows))
        bad = [r for r in self.rows if r >= n_rows]
        if bad:
            raise NormError(f"sensitive row {bad[0]} out of range for a table with {n_rows} rows")
        return list(self.rows)

    # row norm of a perturbation given per column
    def row_norm(self, delta: dict[str, float]) -> float:
        if self.result is None:
            return 0.0
        return _norm_value(self.binding_map, self.result, delta)

    def dual_row_norm(self, grad: dict[str, float]) -> float:
        """Dual of the row norm evaluated on a gradient block."""
        if self.result is None:
            return 0.0
        return _dual_value(self.binding_map, self.result, grad)

    def combine(self, per_row) -> float:
        """Table-level sensitivity from per-row dual norms.

        A max-row-distance table norm dualizes to a sum over rows, an l1 table
        norm to a max, and a general lp to the conjugate lq.
        """
        values = [abs(float(v)) for v in per_row]
        if not values:
            return 0.0
        kind, p = self.combiner
        if kind == "linf":
            return float(sum(values))
        return _lp(values, conjugate(p))


def conjugate(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _lp(values, p: float) -> float:
    values = [abs(v) for v in values]
    if not values:
        return 0.0
    if math.isinf(p):
        return max(values)
    if p == 1:
        return float(sum(values))
    m = max(values)
    if m == 0:
        return 0.0
    return m * sum((v / m) ** p for v in values) ** (1.0 / p)


def _norm_value(bindings, name, delta) -> float:
    if name not in bindings:
        return abs(float(delta.get(name, 0.0)))
    e = bindings[name]
    if e.kind == "scaleNorm":
        return e.param * _norm_value(bindings, e.args[0], delta)
    parts = [_norm_value(bindings, a, delta) for a in e.args]
    return _lp(parts, math.inf if e.kind == "linf" else e.param)


def _dual_value(bindings, name, grad) -> float:
    if name not in bindings:
        return abs(float(grad.get(name, 0.0)))
    e = bindings[name]
    if e.kind == "scaleNorm":
        return _dual_value(bindings, e.args[0], grad) / e.param
    parts = [_dual_value(bindings, a, grad) for a in e.args]
    return _lp(parts, 1.0 if e.kind == "linf" else conjugate(e.param))


class _Reader:
    def __init__(self, text: str):
        self.tokens = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                raise NormError(f"unexpected character {text[pos:].strip()[:1]!r} in table norm")
            pos = m.end()
            if m.group(1):
                continue
            tok = m.group(2) or m.group(3) or m.group(4)
            if tok:
                self.tokens.append(tok)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self, what="token"):
        tok = self.peek()
        if tok is None:
            raise NormError(f"unexpected end of table norm, expected {what}")
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.next(repr(value))
        if tok != value:
            raise NormError(f"expected {value!r} in table norm, found {tok!r}")

    def number(self, what) -> float:
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise NormError(f"expected a number for {what}, found {tok!r}") from None

    def ident(self, what) -> str:
        tok = self.next(what)
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            raise NormError(f"expected {what}, found {tok!r}")
        return tok.lower()

    def items(self, what) -> list[str]:
        out = [self.next(what)]
        while self.peek() not in (";", None):
            if self.peek() == ",":
                self.next()
            out.append(self.next(what))
        return out


def parse_norm(text: str, schema=None) -> NormSpec:
    """Parse a table norm; with ``schema`` given, referenced columns are checked."""
    r = _Reader(text)
    r.expect("rows")
    r.expect(":")
    items = r.items("row index")
    if [i.lower() for i in items] == ["all"]:
        rows = None
    else:
        try:
            rows = tuple(int(i) for i in items)
        except ValueError:
            raise NormError(f"rows must be 'all' or integer indices, got {items}") from None
        if any(i < 0 for i in rows):
            raise NormError("row indices must be non-negative")
    r.expect(";")
    r.expect("cols")
    r.expect(":")
    items = [i.lower() for i in r.items("column name")]
    cols = () if items == ["none"] else tuple(items)
    r.expect(";")
    G = None
    if r.peek() is not None and r.peek().lower() == "g":
        r.next()
        r.expect(":")
        G = r.number("G")
        if not G > 0:
            raise NormError("G must be positive")
        r.expect(";")
    bindings: list[tuple[str, NormExpr]] = []
    combiner, result = ("linf", None), None
    while r.peek() is not None:
        name = r.ident("binding name")
        if name == "return":
            kind = r.next("combiner")
            if kind == "linf":
                combiner = ("linf", None)
            elif kind == "lp":
                p = r.number("lp exponent")
                if p < 1:
                    raise NormError(f"lp exponent must be at least 1, got {p}")
                combiner = ("lp", p)
            else:
                raise NormError(f"unknown combiner {kind!r}; expected linf or lp")
            result = r.ident("binding name")
            r.expect(";")
            if r.peek() is not None:
                raise NormError("nothing may follow the return line")
            break
        r.expect("=")
        kind = r.next("norm kind")
        if kind == "lp":
            p = r.number("lp exponent")
            if p < 1:
                raise NormError(f"lp exponent must be at least 1, got {p}")
            args = tuple(a.lower() for a in r.items("variable"))
            expr = NormExpr("lp", p, args)
        elif kind == "scaleNorm":
            c = r.number("scale factor")
            if not c > 0:
                raise NormError(f"scaleNorm factor must be positive, got {c}")
            expr = NormExpr("scaleNorm", c, (r.ident("variable"),))
        elif kind == "linf":
            expr = NormExpr("linf", None, tuple(a.lower() for a in r.items("variable")))
        else:
            raise NormError(f"unknown norm {kind!r}; expected lp, scaleNorm or linf")
        r.expect(";")
        if not expr.args:
            raise NormError(f"binding {name!r} has no variables")
        bindings.append((name, expr))
    spec = NormSpec(rows, cols, G, tuple(bindings), combiner, result)
    _check(spec, schema)
    return spec


def _check(spec: NormSpec, schema) -> None:
    defined: dict[str, NormExpr] = {}
    used: set[str] = set()
    for name, expr in spec.bindings:
        if name in defined or name in spec.cols:
            raise NormError(f"{name!r} is defined twice")
        for a in expr.args:
            if a not in defined and a not in spec.cols:
                raise NormError(f"binding {name!r} uses undefined variable {a!r}")
            if a in used:
                raise NormError(f"variable {a!r} is used more than once")
            used.add(a)
        defined[name] = expr
    if spec.result is None:
        if spec.cols:
            raise NormError("sensitive columns are declared but the norm has no return line")
    else:
        if spec.result not in defined:
            raise NormError(f"return references undefined binding {spec.result!r}")
        covered = _columns_under(defined, spec.result, set(spec.cols))
        missing = [c for c in spec.cols if c not in covered]
        if missing:
            raise NormError(f"sensitive columns {missing} are not measured by the returned norm")
    if schema is not None:
        for c in spec.cols:
            if c not in schema.column_names:
                raise NormError(f"table {schema.name!r} has no column {c!r}")
            if not schema.is_numeric(c):
                raise NormError(f"sensitive column {c!r} is not numeric")


def _columns_under(defined, name, cols) -> set[str]:
    if name in cols:
        return {name}
    out = set()
    for a in defined[name].args:
        out |= _columns_under(defined, a, cols)
    return out


def _num(x: float) -> str:
    return repr(float(x))


def format_norm(spec: NormSpec) -> str:
    lines = ["rows: " + ("all" if spec.rows is None else ", ".join(map(str, spec.rows))) + ";",
             "cols: " + (", ".join(spec.cols) if spec.cols else "none") + ";"]
    if spec.G is not None:
        lines.append(f"G: {_num(spec.G)};")
    for name, e in spec.bindings:
        param = "" if e.param is None else f" {_num(e.param)}"
        lines.append(f"{name} = {e.kind}{param} {' '.join(e.args)};")
    if spec.result is not None:
        kind, p = spec.combiner
        lines.append(f"return {kind}{'' if p is None else ' ' + _num(p)} {spec.result};")
    return "\n".join(lines) + "\n"


def attacker_norm(columns) -> NormSpec:
    """All rows sensitive, columns compared by their largest change, rows one at a time."""
    cols = tuple(columns)
    return NormSpec(None, cols, None, (("u", NormExpr("linf", None, cols)),), ("lp", 1.0), "u")
