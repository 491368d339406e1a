"""Local row sensitivity of COUNT-style queries on a concrete instance."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from pleak.errors import UnsupportedAggregation
from pleak.sensitivity.engine import AggTarget, Engine, Grid, table_columns
from pleak.sensitivity.smooth import aggregate_target, as_workflow
from pleak.sql.tables import TableData
from pleak.symexec import DagBuilder, Node

# largest product of candidate rows and joined rows evaluated exactly
EXACT_BUDGET = 2_000_000


@dataclass
class LocalSensitivity:
    table: str
    value: float
    removal: int
    addition: int
    count: int
    approximate: bool = False
    G: float | None = None


class _Counter:
    def __init__(self, target: AggTarget, builder: DagBuilder, db: dict[str, TableData]):
        if target.kind != "COUNT":
            raise UnsupportedAggregation(f"local row sensitivity supports only COUNT-style queries, not {target.kind}")
        self.target = target
        self.builder = builder
        self.columns = {name: table_columns(t) for name, t in db.items()}
        self.sizes = {name: len(t.rows) for name, t in db.items()}

    def satisfied(self, columns, sizes):
        grid = Grid(self.target.symbols, sizes)
        engine = Engine(self.builder, columns, grid, smooth=False)
        s, _ = engine.eval(self.target.cond)
        sat = np.asarray(engine.full(s)) > 0.5
        projected = None
        if self.target.distinct:
            projected = [np.asarray(engine.full(engine.eval(p)[0]))[sat] for p in self.target.projections]
        return grid, sat, projected

    def count(self, columns, sizes) -> int:
        _, sat, projected = self.satisfied(columns, sizes)
        if projected is None:
            return int(np.count_nonzero(sat))
        return len(set(zip(*projected))) if projected else int(bool(np.any(sat)))


def _distinct_count(projected, keep) -> int:
    if not projected:
        return int(bool(np.any(keep)))
    return len(set(zip(*(p[keep] for p in projected))))


def local_row_sensitivity(source, db: dict[str, TableData], table: str, G: float | None = None,
                          output: str | None = None, budget: int = EXACT_BUDGET) -> LocalSensitivity:
    """Largest change of the count when one row of ``table`` is removed or added.

    Added rows range over the product of each column's active domain (its
    distinct values in the current instance). When that enumeration exceeds
    ``budget`` a join-key grouping bound is used instead and the result is
    flagged approximate; the bound never underestimates.
    """
    wf = as_workflow(source, db)
    builder = DagBuilder(wf.funcs)
    counter = _Counter(aggregate_target(wf, output, builder), builder, db)
    target = counter.target
    grid, sat, projected = counter.satisfied(counter.columns, counter.sizes)
    base = _distinct_count(projected, np.ones(int(np.count_nonzero(sat)), dtype=bool)) \
        if target.distinct else int(np.count_nonzero(sat))
    own = [sym for sym in target.symbols if sym[0] == table]
    scale = 1.0 / G if G else 1.0
    if not own:
        return LocalSensitivity(table, 0.0, 0, 0, base, False, G)
    n = counter.sizes[table]

    # removal: combinations touching row i disappear
    removal = 0
    if n:
        if len(own) == 1 and not target.distinct:
            hits = np.bincount(grid.index[own[0]][sat], minlength=n)
            removal = int(hits.max())
        else:
            idx_sat = [grid.index[sym][sat] for sym in own]
            for i in range(n):
                touching = np.zeros(len(idx_sat[0]), dtype=bool)
                for idx in idx_sat:
                    touching |= idx == i
                if target.distinct:
                    removal = max(removal, base - _distinct_count(projected, ~touching))
                else:
                    removal = max(removal, int(np.count_nonzero(touching)))

    # addition: one new row drawn from the active domains
    schema = db[table].schema
    domains = [list(dict.fromkeys(db[table].column(c))) for c in schema.column_names]
    n_candidates = int(np.prod([len(d) for d in domains])) if domains else 0
    others = int(np.prod([counter.sizes[t] for t, _ in target.symbols if t != table])) if target.symbols else 1
    approximate = False
    addition = 0
    if n_candidates == 0:
        addition = 0
    elif len(own) == 1 and not target.distinct and n_candidates * others <= budget:
        addition = _single_occurrence_addition(counter, table, own[0], domains, schema)
    elif n_candidates * others * (n + 1) ** len(own) <= budget:
        addition = _enumerated_addition(counter, table, domains, base, db)
    else:
        addition = _fanout_bound(counter, table, own, target.cond)
        approximate = True
    value = max(removal, addition) * scale
    return LocalSensitivity(table, value, removal, addition, base, approximate, G)


def _candidate_columns(domains, schema, rows=None):
    cands = list(itertools.product(*domains))
    out = TableData(schema, tuple(cands) if rows is None else tuple(rows) + tuple(cands))
    return table_columns(out), len(out.rows)


def _single_occurrence_addition(counter, table, sym, domains, schema) -> int:
    cols, n_cand = _candidate_columns(domains, schema)
    columns = dict(counter.columns)
    columns[table] = cols
    sizes = dict(counter.sizes)
    sizes[table] = n_cand
    grid, sat, _ = counter.satisfied(columns, sizes)
    per_candidate = np.bincount(grid.index[sym][sat], minlength=n_cand)
    return int(per_candidate.max()) if n_cand else 0


def _enumerated_addition(counter, table, domains, base, db) -> int:
    schema = db[table].schema
    best = 0
    for cand in itertools.product(*domains):
        data = TableData(schema, tuple(db[table].rows) + (cand,))
        columns = dict(counter.columns)
        columns[table] = table_columns(data)
        sizes = dict(counter.sizes)
        sizes[table] = len(data.rows)
        best = max(best, abs(counter.count(columns, sizes) - base))
    return best


def _equality_links(cond: Node, table: str):
    """(other symbol, its column, our column) for top-level equality conjuncts."""
    links = []
    stack = [cond]
    while stack:
        n = stack.pop()
        if n.kind == "and":
            stack.extend(n.children)
        elif n.kind == "cmp" and n.payload == "=":
            l, r = n.children
            if l.kind == "input" and r.kind == "input":
                for mine, other in ((l, r), (r, l)):
                    if mine.payload[0] == table and other.payload[0] != table:
                        links.append(((other.payload[0], other.payload[2]), other.payload[1]))
    return links


def _fanout_bound(counter, table, own, cond) -> int:
    """Upper bound on the combinations a single new row can join with."""
    groups: dict = {}
    for sym, column in _equality_links(cond, table):
        values = counter.columns[sym[0]][column]
        _, counts = np.unique(values, return_counts=True) if len(values) else (None, np.array([0]))
        groups[sym] = min(groups.get(sym, counter.sizes[sym[0]]), int(counts.max()))
    bound = 1
    for sym in counter.target.symbols:
        if sym[0] != table:
            bound *= groups.get(sym, counter.sizes[sym[0]])
    n = counter.sizes[table]
    k = len(own)
    return bound * ((n + 1) ** k - n ** k)
