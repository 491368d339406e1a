"""Builders shared by the test modules."""
from __future__ import annotations

import itertools
import random
from collections import Counter
from pathlib import Path

import pleak
from pleak.model import load_model_file, model_from_dict
from pleak.sql.tables import TableData, TableSchema
from pleak.sql.workflow import bind_workflow, evaluate_workflow, load_sql_workflow

SCENARIOS = Path(pleak.__file__).resolve().parent / "scenarios"
GOLDEN = Path(__file__).resolve().parent / "golden"


def scenario(rel: str):
    return load_model_file(SCENARIOS / rel)


def scenario_workflow(rel: str, require_data: bool = True):
    return load_sql_workflow(scenario(rel), require_data=require_data)


def chain_model(tasks, pool_name: str = "P"):
    """One pool, tasks in sequence. ``tasks`` holds (id, inputs, outputs)."""
    nodes = [{"id": "start", "kind": "startEvent"}]
    flows, prev = [], "start"
    objects = {}
    for tid, ins, outs in tasks:
        nodes.append({"id": tid, "kind": "task", "label": tid, "inputs": list(ins), "outputs": list(outs)})
        flows.append([prev, tid])
        prev = tid
        for name in list(ins) + list(outs):
            objects[name] = {"name": name, "pool": "p"}
    nodes.append({"id": "end", "kind": "endEvent"})
    flows.append([prev, "end"])
    return model_from_dict({"pools": [{"id": "p", "name": pool_name, "nodes": nodes, "flows": flows}],
                            "messageFlows": [], "dataObjects": list(objects.values())})


def make_workflow(schemas: dict, tasks, data: dict | None = None):
    """``schemas``: name -> [(col, type)]; ``tasks``: (id, inputs, output, sql); ``data``: name -> rows."""
    model = chain_model([(tid, ins, [out]) for tid, ins, out, _ in tasks])
    tschemas = {n: TableSchema(n, tuple(cols)) for n, cols in schemas.items()}
    db = {n: TableData(tschemas[n], tuple(map(tuple, rows))) for n, rows in (data or {}).items()}
    return bind_workflow(model, {tid: sql for tid, _, _, sql in tasks}, tschemas, db)


def with_rows(db: dict, table: str, rows) -> dict:
    out = dict(db)
    out[table] = TableData(db[table].schema, tuple(rows))
    return out


def bag(rows) -> Counter:
    return Counter(map(tuple, rows))


def final_count(wf, db, output=None) -> int:
    """COUNT-style value of the workflow output, computed by plain evaluation."""
    output = output or wf.final_outputs()[0]
    result = evaluate_workflow(wf, db)[output]
    producer = wf.producers(output)[0]
    q = next(q for q in reversed(wf.statements[producer]) if q.into == output)
    if q.aggregation is not None:
        return result.rows[0][0]
    return len(result.rows)


def single_edit_change(wf, db, table: str, output=None) -> int:
    """Largest |change| of the count when one row of ``table`` is removed or
    one row from the product of the column active domains is added."""
    base = final_count(wf, db, output)
    rows = list(db[table].rows)
    best = 0
    for i in range(len(rows)):
        best = max(best, abs(final_count(wf, with_rows(db, table, rows[:i] + rows[i + 1:]), output) - base))
    schema = db[table].schema
    domains = [list(dict.fromkeys(r[j] for r in rows)) for j in range(len(schema.columns))]
    for cand in itertools.product(*domains):
        best = max(best, abs(final_count(wf, with_rows(db, table, rows + [cand]), output) - base))
    return best


# -- random workflows over small integer tables ---------------------------

BASE_SCHEMAS = {
    "r": [("a", "INT8"), ("b", "INT8")],
    "s": [("a", "INT8"), ("c", "INT8")],
    "u": [("d", "INT8")],
}


def random_db(rng: random.Random, max_rows: int = 5, values: int = 4) -> dict[str, list[tuple]]:
    return {name: [tuple(rng.randrange(values) for _ in cols) for _ in range(rng.randint(0, max_rows))]
            for name, cols in BASE_SCHEMAS.items()}


def _term(rng, cols):
    if rng.random() < 0.25:
        return str(rng.randrange(4))
    return rng.choice(cols)


def _numeric(rng, cols, depth=0):
    if depth >= 1 or rng.random() < 0.6:
        return _term(rng, cols)
    op = rng.choice(["+", "-", "*"])
    return f"({_numeric(rng, cols, depth + 1)} {op} {_numeric(rng, cols, depth + 1)})"


def _predicate(rng, cols, depth=0):
    if depth >= 2 or rng.random() < 0.5:
        if rng.random() < 0.1:
            return rng.choice(["TRUE", "FALSE"])
        op = rng.choice(["<", "<=", ">", ">=", "=", "<>"])
        return f"{_numeric(rng, cols)} {op} {_numeric(rng, cols)}"
    kind = rng.choice(["AND", "OR", "NOT"])
    if kind == "NOT":
        return f"NOT ({_predicate(rng, cols, depth + 1)})"
    return f"({_predicate(rng, cols, depth + 1)}) {kind} ({_predicate(rng, cols, depth + 1)})"


def random_select(rng, tables: dict[str, list[str]], into: str, allow_distinct=True, allow_agg=False):
    """A random SELECT over ``tables`` (name -> column names), each read once or twice."""
    picks = rng.sample(sorted(tables), rng.randint(1, min(2, len(tables))))
    if rng.random() < 0.15:
        picks.append(picks[0])
    sources, cols = [], []
    for i, name in enumerate(picks):
        alias = f"x{i}"
        sources.append(f"{name} AS {alias}")
        cols += [f"{alias}.{c}" for c in tables[name]]
    where = _predicate(rng, cols)
    if allow_agg and rng.random() < 0.3:
        kind = rng.choice(["COUNT", "SUM", "MIN", "MAX"])
        arg = "*" if kind == "COUNT" else _numeric(rng, cols)
        head = f"{kind}({arg}) AS v"
        return f"SELECT {head} INTO {into} FROM {', '.join(sources)} WHERE {where};", ["v"]
    n = rng.randint(1, 2)
    names = [f"c{i}" for i in range(n)]
    projs = ", ".join(f"{_numeric(rng, cols)} AS {nm}" for nm in names)
    distinct = "DISTINCT " if allow_distinct and rng.random() < 0.25 else ""
    return f"SELECT {distinct}{projs} INTO {into} FROM {', '.join(sources)} WHERE {where};", names


def random_workflow(rng: random.Random, n_tasks: int | None = None, allow_agg: bool = False):
    """2 or 3 chained tasks; each later task reads the previous output and maybe a base table."""
    n_tasks = n_tasks or rng.randint(2, 3)
    tables = {n: [c for c, _ in cols] for n, cols in BASE_SCHEMAS.items()}
    tasks, prev, prev_cols = [], None, []
    for k in range(n_tasks):
        into = f"t{k}"
        if prev is None:
            avail = dict(tables)
        else:
            extra = rng.sample(sorted(tables), rng.randint(0, 1))
            avail = {prev: prev_cols, **{e: tables[e] for e in extra}}
        last = k == n_tasks - 1
        sql, out_cols = random_select(rng, avail, into, allow_agg=allow_agg and last)
        # the previous output must be read so the tasks form a chain
        if prev is not None and f"{prev} AS" not in sql:
            sql, out_cols = random_select(rng, {prev: prev_cols}, into, allow_agg=allow_agg and last)
        inputs = sorted({part.split(" AS ")[0] for part in sql.split(" FROM ")[1].split(" WHERE ")[0].split(", ")})
        tasks.append((f"task{k}", inputs, into, sql))
        prev, prev_cols = into, out_cols
    return tasks


def scenario_analysis_inputs(rel: str):
    """Workflow, table norms and attacker ranges of a scenario model."""
    from pleak.advantage import parse_policy
    from pleak.sensitivity.norm import parse_norm

    model = scenario(rel)
    wf = load_sql_workflow(model, require_data=True)
    norms = {o.name: parse_norm(model.resolve(o.norm_file).read_text(), wf.schemas.get(o.name))
             for o in model.data_objects.values() if o.norm_file}
    ranges = None
    if model.attacker_file:
        knowledge, _ = parse_policy(model.resolve(model.attacker_file).read_text(), "", wf.schemas)
        ranges = knowledge.ranges()
    return wf, norms, ranges
