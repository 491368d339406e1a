"""Symbolic execution of SQL workflow runs into hash-consed expression DAGs.

Each output column becomes a ``filter`` node whose first child is the value
that leaks and whose second child is the condition under which it leaks.
Only input-table attributes and constants appear as leaves: intermediate
tables are substituted away by their defining queries.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from pleak.errors import EvaluationError, SymbolicError
from pleak.model import Run, enumerate_runs
from pleak.sql import ops
from pleak.sql.ast import BUILTINS, NUMERIC, Binary, Call, Column, Const, Expr, SelectQuery, Unary
from pleak.sql.tables import TableData
from pleak.sql.typing import FuncDef, numeric_result
from pleak.sql.workflow import SqlWorkflow

MAX_DEPTH = 64


class Node:
    """A DAG node; identity is the hash-cons id, so compare nodes with ``is``."""

    __slots__ = ("id", "kind", "payload", "children", "type")

    def __init__(self, id, kind, payload, children, type_):
        self.id = id
        self.kind = kind
        self.payload = payload
        self.children = children
        self.type = type_

    def __repr__(self):
        return f"Node#{self.id}({self.kind}, {self.payload!r})"

    @property
    def is_true(self) -> bool:
        return self.kind == "const" and self.payload == (True, "BOOL")

    @property
    def value(self):
        return self.payload[0]


class DagBuilder:
    """Hash-consing node factory. One instance per analysis invocation."""

    def __init__(self, funcs: dict[str, FuncDef] | None = None):
        self.funcs = dict(funcs or {})
        self.nodes: list[Node] = []
        self._table: dict[tuple, Node] = {}
        self._simplified: dict[int, Node] = {}

    def make(self, kind, payload, children=(), type_=None) -> Node:
        key = (kind, payload, tuple(c.id for c in children))
        node = self._table.get(key)
        if node is None:
            node = Node(len(self.nodes), kind, payload, tuple(children), type_)
            self.nodes.append(node)
            self._table[key] = node
        return node

    def __len__(self):
        return len(self.nodes)

    # constructors
    def const(self, value, type_) -> Node:
        if type_ == "FLOAT8":
            value = float(value)
        return self.make("const", (value, type_), (), type_)

    def true(self) -> Node:
        return self.const(True, "BOOL")

    def input(self, table, column, row, type_) -> Node:
        return self.make("input", (table, column, row), (), type_)

    def arith(self, op, a, b) -> Node:
        type_ = "FLOAT8" if op == "^" else numeric_result(a.type, b.type)
        return self.make("arith", op, (a, b), type_)

    def neg(self, a) -> Node:
        return self.make("neg", None, (a,), a.type)

    def cmp(self, op, a, b) -> Node:
        return self.make("cmp", op, (a, b), "BOOL")

    def and_(self, a, b) -> Node:
        return self.make("and", None, (a, b), "BOOL")

    def or_(self, a, b) -> Node:
        return self.make("or", None, (a, b), "BOOL")

    def not_(self, a) -> Node:
        return self.make("not", None, (a,), "BOOL")

    def func(self, name, args) -> Node:
        if name in self.funcs:
            type_ = self.funcs[name].return_type
        elif name == "sqrt":
            type_ = "FLOAT8"
        else:
            type_ = args[0].type
            for a in args[1:]:
                type_ = numeric_result(type_, a.type)
        return self.make("func", name, tuple(args), type_)

    def agg(self, kind, bound, value, cond) -> Node:
        type_ = "INT8" if kind == "COUNT" else value.type
        return self.make("agg", (kind, tuple(sorted(bound))), (value, cond), type_)

    def filter(self, value, cond, distinct=False) -> Node:
        return self.make("filter", bool(distinct), (value, cond), value.type)


# -- traversal helpers -----------------------------------------------------

def descendants(root: Node) -> list[Node]:
    """All nodes reachable from ``root`` (root included), each once, in DFS post-order."""
    seen, out, stack = set(), [], [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            out.append(node)
            continue
        if node.id in seen:
            continue
        seen.add(node.id)
        stack.append((node, True))
        for child in reversed(node.children):
            if child.id not in seen:
                stack.append((child, False))
    return out


def leaves(root: Node) -> list[Node]:
    return [n for n in descendants(root) if n.kind in ("input", "const")]


def input_leaves(root: Node) -> list[Node]:
    return sorted((n for n in descendants(root) if n.kind == "input"), key=lambda n: n.payload)


def free_symbols(root: Node) -> set[tuple[str, int]]:
    """Row symbols not bound by an enclosing aggregation."""
    bound_inside: set = set()
    symbols: set = set()
    for n in descendants(root):
        if n.kind == "input":
            symbols.add((n.payload[0], n.payload[2]))
        elif n.kind == "agg":
            bound_inside.update(n.payload[1])
    return symbols - bound_inside


def tree_size(root: Node) -> int:
    return 1 + sum(tree_size(c) for c in root.children)


# -- symbolic expansion ----------------------------------------------------

@dataclass
class Expansion:
    names: list[str]
    columns: list[Node]
    cond: Node
    free: frozenset
    set_semantics: bool = False
    # False once an aggregation reads a DISTINCT intermediate: the symbolic
    # aggregate then ranges over the bag, not over the deduplicated rows
    bag_exact: bool = True


@dataclass
class ColumnProvenance:
    table: str
    column: int
    name: str
    run: int
    root: Node
    set_semantics: bool = False
    free: tuple = field(default=())
    bag_exact: bool = True

    @property
    def leak(self) -> Node:
        return self.root.children[0]

    @property
    def when(self) -> Node:
        return self.root.children[1]


def translate(expr: Expr, env: dict[str, dict[str, Node]], b: DagBuilder) -> Node:
    """Build the node for a qualified expression; ``env`` maps alias -> column -> node."""
    if isinstance(expr, Const):
        return b.const(expr.value, expr.type)
    if isinstance(expr, Column):
        try:
            return env[expr.table][expr.name]
        except KeyError:
            raise SymbolicError(f"unresolved column {expr.table}.{expr.name}") from None
    if isinstance(expr, Unary):
        inner = translate(expr.operand, env, b)
        return b.not_(inner) if expr.op == "NOT" else b.neg(inner)
    if isinstance(expr, Binary):
        left, right = translate(expr.left, env, b), translate(expr.right, env, b)
        if expr.op == "AND":
            return b.and_(left, right)
        if expr.op == "OR":
            return b.or_(left, right)
        if expr.op in ("<", "<=", ">", ">=", "=", "<>"):
            return b.cmp(expr.op, left, right)
        return b.arith(expr.op, left, right)
    if isinstance(expr, Call):
        return b.func(expr.name, [translate(a, env, b) for a in expr.args])
    raise TypeError(expr)


def inline_call(node: Node, builder: DagBuilder) -> Node:
    """Body of a user-function node with its arguments substituted for the parameters."""
    from pleak.sql.evaluate import _bind_params

    f = builder.funcs[node.payload]
    env = {"$p": {}}
    for (name, type_), arg in zip(f.params, node.children):
        if type_ == "FLOAT8" and arg.type == "INT8":
            arg = builder.arith("*", arg, builder.const(1.0, "FLOAT8"))
        env["$p"][name] = arg
    return translate(_bind_params(f.body), env, builder)


class _Expander:
    def __init__(self, workflow: SqlWorkflow, run_tasks: list[str], builder: DagBuilder):
        self.wf = workflow
        self.builder = builder
        self.counter: dict[str, int] = {}
        self.producer: dict[str, str] = {}
        self.visited: set[str] = set()
        for task in run_tasks:
            for name in workflow.task_outputs(task):
                self.producer.setdefault(name, task)

    def translate(self, expr: Expr, env: dict[str, dict[str, Node]]) -> Node:
        return translate(expr, env, self.builder)

    def table(self, name: str, task: str | None, upto: int | None, depth: int) -> Expansion:
        if depth > MAX_DEPTH:
            raise SymbolicError(f"substitution depth exceeded while expanding {name!r}")
        if task is not None and upto is not None:
            local = self.wf.statements[task][:upto]
            for i in range(len(local) - 1, -1, -1):
                if local[i].into == name:
                    return self.query(local[i], task, i, depth + 1)
        if name in self.producer:
            producer = self.producer[name]
            self.visited.add(producer)
            stmts = self.wf.statements[producer]
            for i in range(len(stmts) - 1, -1, -1):
                if stmts[i].into == name:
                    return self.query(stmts[i], producer, i, depth + 1)
        schema = self.wf.schemas.get(name)
        if schema is None:
            raise SymbolicError(f"no schema for input table {name!r}")
        row = self.counter.get(name, 0)
        self.counter[name] = row + 1
        cols = [self.builder.input(name, c, row, t) for c, t in schema.columns]
        return Expansion(schema.column_names, cols, self.builder.true(), frozenset({(name, row)}))

    def query(self, q: SelectQuery, task: str | None, index: int | None, depth: int = 0) -> Expansion:
        b = self.builder
        env, conds, free, set_sem, exact = {}, [], set(), q.distinct, True
        for table, alias in q.sources:
            sub = self.table(table, task, index, depth)
            env[alias] = dict(zip(sub.names, sub.columns))
            if not sub.cond.is_true:
                conds.append(sub.cond)
            free |= sub.free
            set_sem |= sub.set_semantics
            exact &= sub.bag_exact
        cond = None
        for part in conds + [self.translate(q.predicate, env)]:
            cond = part if cond is None else b.and_(cond, part)
        names = q.output_names()
        if q.aggregation is not None:
            agg = q.aggregation
            value = b.const(1, "INT8") if agg.expr is None else self.translate(agg.expr, env)
            node = b.agg(agg.kind, free, value, cond)
            return Expansion(names, [node], b.true(), frozenset(), False, exact and not set_sem)
        columns = [self.translate(e, env) for e, _ in q.projections]
        return Expansion(names, columns, cond, frozenset(free), set_sem, exact)


def run_tasks(workflow: SqlWorkflow, run: Run | None) -> list[str]:
    if run is None:
        return list(workflow.order)
    members = set(run.tasks)
    return [t for t in workflow.order if t in members]


def workflow_runs(workflow: SqlWorkflow) -> list[Run]:
    if workflow.model is None:
        return [Run(0, tuple(workflow.order))]
    return enumerate_runs(workflow.model)


def expand_target(workflow: SqlWorkflow, run: Run | None, target: str, builder: DagBuilder,
                  visited: set | None = None) -> Expansion | None:
    """Expansion of ``target`` in ``run``; None when the run does not produce it.

    Tasks whose outputs the derivation passes through are added to ``visited``.
    """
    ex = _Expander(workflow, run_tasks(workflow, run), builder)
    if target not in ex.producer:
        return None
    result = ex.table(target, None, None, 0)
    if visited is not None:
        visited |= ex.visited
    return result


def expand_query(workflow: SqlWorkflow, run: Run | None, task: str, query: SelectQuery,
                 builder: DagBuilder, visited: set | None = None) -> Expansion:
    """Expansion of the last statement-position of ``task`` with ``query`` in its place."""
    ex = _Expander(workflow, run_tasks(workflow, run), builder)
    result = ex.query(query, task, len(workflow.statements[task]) - 1)
    if visited is not None:
        visited |= ex.visited | {task}
    return result


def symbolic_run(workflow: SqlWorkflow, run: Run | None, targets, builder: DagBuilder | None = None,
                 simplify: bool = False) -> list[ColumnProvenance]:
    if builder is None:
        builder = DagBuilder(workflow.funcs)
    produced = set(workflow.outputs)
    out = []
    for target in targets:
        if target not in produced:
            raise SymbolicError(f"{target!r} is not produced by any task of the workflow")
        ex = expand_target(workflow, run, target, builder)
        if ex is None:
            continue
        producer = _Expander(workflow, run_tasks(workflow, run), builder).producer[target]
        stmts = workflow.statements[producer]
        distinct = next(q.distinct for q in reversed(stmts) if q.into == target)
        for i, (name, col) in enumerate(zip(ex.names, ex.columns)):
            root = builder.filter(col, ex.cond, distinct)
            if simplify:
                root = simplify_dag(root, builder)
            out.append(ColumnProvenance(target, i, name, run.index if run else 0, root, ex.set_semantics,
                                        tuple(sorted(ex.free)), ex.bag_exact))
    return out


# -- simplification --------------------------------------------------------

def _fold(builder: DagBuilder, kind, payload, kids) -> Node | None:
    """Constant-fold when every child is a constant; None if folding is unsafe."""
    try:
        return _apply(builder, kind, payload, kids, [k.value for k in kids])
    except (EvaluationError, ZeroDivisionError, OverflowError, TypeError, ValueError):
        return None


def _apply(builder, kind, payload, kids, vals):
    if kind == "arith":
        rtype = "FLOAT8" if payload == "^" else numeric_result(kids[0].type, kids[1].type)
        return builder.const(ops.arith(payload, vals[0], vals[1], rtype), rtype)
    if kind == "neg":
        return builder.const(-vals[0], kids[0].type)
    if kind == "cmp":
        return builder.const(ops.compare(payload, vals[0], vals[1]), "BOOL")
    if kind == "not":
        return builder.const(not vals[0], "BOOL")
    if kind == "func" and payload in BUILTINS:
        probe = builder.func(payload, kids)
        return builder.const(ops.builtin(payload, vals, probe.type), probe.type)
    return None


def simplify_dag(root: Node, builder: DagBuilder) -> Node:
    """Constant folding and identity elimination; idempotent and semantics-preserving."""
    memo = builder._simplified
    for node in descendants(root):
        if node.id in memo:
            continue
        kids = tuple(memo[c.id] for c in node.children)
        memo[node.id] = _simplify_node(builder, node, kids)
    return memo[root.id]


def _is_const(n: Node, value=None, type_=None) -> bool:
    if n.kind != "const":
        return False
    if value is not None:
        if isinstance(n.value, bool) != isinstance(value, bool) or n.value != value:
            return False
    return type_ is None or n.type == type_


def _simplify_node(b: DagBuilder, node: Node, kids: tuple) -> Node:
    kind = node.kind
    if kind in ("input", "const"):
        return node
    if kind == "and":
        l, r = kids
        if l.is_true:
            return r
        if r.is_true:
            return l
        if _is_const(l, False, "BOOL"):
            return l
        return b.and_(l, r)
    if kind == "or":
        l, r = kids
        if l.is_true:
            return l
        if _is_const(l, False, "BOOL"):
            return r
        if _is_const(r, False, "BOOL"):
            return l
        return b.or_(l, r)
    if kind == "not":
        (a,) = kids
        if a.kind == "not":
            return a.children[0]
    if kind in ("arith", "neg", "cmp", "not", "func") and all(k.kind == "const" for k in kids):
        folded = _fold(b, kind, node.payload, kids) if (kind != "func" or node.payload in BUILTINS) else None
        if folded is not None:
            return folded
    if kind == "arith":
        l, r = kids
        op, rtype = node.payload, node.type
        if op == "+" and _is_const(l, 0) and r.type == rtype:
            return r
        if op in ("+", "-") and _is_const(r, 0) and l.type == rtype:
            return l
        if op == "*" and _is_const(l, 1) and r.type == rtype:
            return r
        if op in ("*", "/") and _is_const(r, 1) and l.type == rtype:
            return l
        return b.arith(op, l, r)
    if kind == "neg":
        return b.neg(kids[0])
    if kind == "cmp":
        return b.cmp(node.payload, *kids)
    if kind == "not":
        return b.not_(kids[0])
    if kind == "func":
        return b.func(node.payload, list(kids))
    if kind == "agg":
        return b.make("agg", node.payload, kids, node.type)
    if kind == "filter":
        return b.make("filter", node.payload, kids, node.type)
    raise ValueError(kind)


# -- concrete interpretation -----------------------------------------------

def _call_user(builder: DagBuilder, f: FuncDef, args: list):
    from pleak.sql.evaluate import compile_expr, _bind_params
    from pleak.sql.tables import TableSchema

    fn = compile_expr(_bind_params(f.body), {"$p": (0, TableSchema(f.name, f.params))}, builder.funcs)
    values = tuple(ops.coerce_to(a, t) for a, (_, t) in zip(args, f.params))
    return ops.coerce_to(fn((values,)), f.return_type)


def evaluate(node: Node, assignment: dict, db: dict[str, TableData], builder: DagBuilder):
    """Concrete value of ``node``; ``assignment`` maps (table, row symbol) to a row tuple."""
    kind = node.kind
    if kind == "const":
        return node.value
    if kind == "input":
        table, column, row = node.payload
        schema = db[table].schema
        return assignment[(table, row)][schema.index(column)]
    if kind == "and":
        return bool(evaluate(node.children[0], assignment, db, builder)) and \
            bool(evaluate(node.children[1], assignment, db, builder))
    if kind == "or":
        return bool(evaluate(node.children[0], assignment, db, builder)) or \
            bool(evaluate(node.children[1], assignment, db, builder))
    if kind == "not":
        return not evaluate(node.children[0], assignment, db, builder)
    if kind == "filter":
        raise SymbolicError("filter nodes are interpreted by filter_rows")
    if kind == "agg":
        agg_kind, bound = node.payload
        value_node, cond_node = node.children
        values = []
        tables = [db[t].rows for t, _ in bound]
        for combo in itertools.product(*tables):
            local = dict(assignment)
            local.update(zip(bound, combo))
            if evaluate(cond_node, local, db, builder):
                values.append(evaluate(value_node, local, db, builder))
        if agg_kind == "COUNT":
            return len(values)
        if agg_kind == "SUM":
            return ops.coerce_to(sum(values), node.type) if values else (0 if node.type == "INT8" else 0.0)
        if not values:
            raise EvaluationError(f"{agg_kind} over an empty set")
        return min(values) if agg_kind == "MIN" else max(values)
    vals = [evaluate(c, assignment, db, builder) for c in node.children]
    if kind == "arith":
        return ops.arith(node.payload, vals[0], vals[1], node.type)
    if kind == "neg":
        return -vals[0]
    if kind == "cmp":
        return ops.compare(node.payload, vals[0], vals[1])
    if kind == "func":
        if node.payload in builder.funcs:
            return _call_user(builder, builder.funcs[node.payload], vals)
        return ops.builtin(node.payload, vals, node.type)
    raise ValueError(kind)


def filter_rows(columns: list[ColumnProvenance], db: dict[str, TableData], builder: DagBuilder) -> list[tuple]:
    """Rows described by the filter roots of one output table (bag order unspecified)."""
    if not columns:
        return []
    # unreferenced FROM tables still multiply the bag, so the expansion's symbols count too
    free = sorted(set(columns[0].free).union(*(free_symbols(c.root) for c in columns)))
    cond = columns[0].when
    tables = [db[t].rows for t, _ in free]
    rows = []
    for combo in itertools.product(*tables):
        assignment = dict(zip(free, combo))
        if evaluate(cond, assignment, db, builder):
            rows.append(tuple(ops.coerce_to(evaluate(c.leak, assignment, db, builder), c.leak.type)
                              for c in columns))
    return rows


def is_numeric(node: Node) -> bool:
    return node.type in NUMERIC
