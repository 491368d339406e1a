"""Binding SQL scripts to the tasks of a process model."""
from __future__ import annotations

from dataclasses import dataclass, field

from pleak.errors import BindingError, SqlError
from pleak.model import ProcessModel, _topological, pool_order
from pleak.sql.ast import CreateFunction, CreateTable, SelectQuery
from pleak.sql.parser import Parser
from pleak.sql.tables import TableData, TableSchema, load_table_data
from pleak.sql.typing import FuncDef, check_function, check_query

PARAMETERS = "parameters"


@dataclass
class SqlWorkflow:
    model: ProcessModel | None
    # task id -> {table name -> checked defining query}, temporaries included
    definitions: dict[str, dict[str, SelectQuery]]
    statements: dict[str, list[SelectQuery]]
    order: list[str]
    schemas: dict[str, TableSchema]
    data: dict[str, TableData] = field(default_factory=dict)
    funcs: dict[str, FuncDef] = field(default_factory=dict)
    parameters: str | None = None

    @property
    def inputs(self) -> list[str]:
        produced = {t for defs in self.definitions.values() for t in defs}
        seen = []
        for task in self.order:
            for q in self.statements[task]:
                for table, _ in q.sources:
                    if table not in produced and table not in seen:
                        seen.append(table)
        return seen

    def task_outputs(self, task: str) -> list[str]:
        if self.model is not None:
            return list(self.model.node(task).outputs)
        return [q.into for q in self.statements[task][-1:]]

    @property
    def outputs(self) -> list[str]:
        out = []
        for task in self.order:
            for name in self.task_outputs(task):
                if name not in out:
                    out.append(name)
        return out

    def producers(self, table: str) -> list[str]:
        return [t for t in self.order if table in self.task_outputs(t)]

    def final_outputs(self) -> list[str]:
        """Produced tables that no task consumes."""
        consumed = {src for task in self.order for q in self.statements[task] for src, _ in q.sources}
        return [t for t in self.outputs if t not in consumed]

    def final_query(self, task: str) -> SelectQuery:
        return self.statements[task][-1]


def _merge_function(funcs: dict[str, FuncDef], stmt: CreateFunction):
    if stmt.name in funcs:
        existing = funcs[stmt.name]
        if (existing.params, existing.return_type, existing.body) != (stmt.params, stmt.return_type, stmt.body):
            raise BindingError(f"function {stmt.name!r} defined twice with different bodies")
        return
    funcs[stmt.name] = check_function(stmt, funcs)


def bind_workflow(model: ProcessModel, scripts: dict[str, str], schemas: dict[str, TableSchema],
                  data: dict[str, TableData] | None = None) -> SqlWorkflow:
    data = dict(data or {})
    schemas = dict(schemas)
    tasks = {t.id: t for t in model.tasks()}
    parsed: dict[str, list] = {}
    funcs: dict[str, FuncDef] = {}
    for task in tasks.values():
        if task.id not in scripts:
            if task.inputs or task.outputs:
                raise BindingError(f"task {task.id!r} ({task.label}) has data objects but no SQL script")
            continue
        try:
            stmts = Parser(scripts[task.id]).script()
        except SqlError as exc:
            raise BindingError(f"task {task.id!r}: {exc}") from exc
        for stmt in stmts:
            if isinstance(stmt, CreateFunction):
                _merge_function(funcs, stmt)
            elif isinstance(stmt, CreateTable):
                schemas.setdefault(stmt.name, TableSchema.from_create(stmt))
        parsed[task.id] = [s for s in stmts if isinstance(s, SelectQuery)]
        if not parsed[task.id] and task.outputs:
            raise BindingError(f"task {task.id!r} has outputs but its script has no SELECT")

    rank = {}
    for pi, pool in enumerate(model.pools):
        for pos, n in enumerate(pool_order(pool) or [x.id for x in pool.nodes]):
            rank[n] = (pi, pos)
    bound = [t for t in parsed]
    edges = [(a, b) for a in bound for b in bound if a != b
             and set(tasks[a].outputs) & set(tasks[b].inputs)]
    order = _topological(bound, edges, rank)
    if order is None:
        raise BindingError("data dependencies between SQL tasks form a cycle")

    definitions: dict[str, dict[str, SelectQuery]] = {}
    statements: dict[str, list[SelectQuery]] = {}
    for tid in order:
        task = tasks[tid]
        local: dict[str, TableSchema] = {}
        defs: dict[str, SelectQuery] = {}
        checked_list = []
        queries = parsed[tid]
        for i, q in enumerate(queries):
            last = i == len(queries) - 1
            if q.into is None:
                if last and len(task.outputs) == 1:
                    q = SelectQuery(q.distinct, q.projections, q.aggregation, q.sources, q.predicate,
                                    task.outputs[0], pos=q.pos)
                else:
                    raise BindingError(f"task {tid!r}: query {i} needs an INTO clause")
            for table, _ in q.sources:
                if table not in task.inputs and table not in local:
                    raise BindingError(f"task {tid!r} reads table {table!r} which is not one of its inputs")
            catalog = {**schemas, **local}
            missing = [t for t, _ in q.sources if t not in catalog]
            if missing:
                raise BindingError(f"task {tid!r}: no schema for table {missing[0]!r}")
            try:
                checked, out = check_query(q, catalog, funcs)
            except SqlError as exc:
                raise BindingError(f"task {tid!r}: {exc}") from exc
            if last and q.into not in task.outputs:
                raise BindingError(f"task {tid!r} writes {q.into!r}, which is not one of its outputs {list(task.outputs)}")
            if q.into in task.outputs:
                prev = schemas.get(q.into)
                if prev is not None and q.into in {t for d in definitions.values() for t in d} \
                        and prev.columns != out.columns:
                    raise BindingError(f"table {q.into!r} produced with conflicting schemas")
                schemas[q.into] = out
            else:
                local[q.into] = out
            defs[q.into] = checked
            checked_list.append(checked)
        for name in task.outputs:
            if name not in defs:
                raise BindingError(f"task {tid!r} never writes its output {name!r}")
        definitions[tid] = defs
        statements[tid] = checked_list

    params = PARAMETERS if PARAMETERS in model.data_objects else None
    return SqlWorkflow(model, definitions, statements, order, schemas, data, funcs, params)


def single_query_workflow(query: SelectQuery, schemas: dict[str, TableSchema],
                          data: dict[str, TableData] | None = None,
                          funcs: dict[str, FuncDef] | None = None) -> SqlWorkflow:
    """Wrap one query over input tables as a one-task workflow (no process model)."""
    funcs = dict(funcs or {})
    into = query.into or "result"
    q = SelectQuery(query.distinct, query.projections, query.aggregation, query.sources,
                    query.predicate, into, pos=query.pos)
    checked, out = check_query(q, schemas, funcs)
    all_schemas = {**schemas, into: out}
    return SqlWorkflow(None, {"q": {into: checked}}, {"q": [checked]}, ["q"], all_schemas,
                       dict(data or {}), funcs)


def load_sql_workflow(model: ProcessModel, require_data: bool = False) -> SqlWorkflow:
    """Read scripts, schemas and CSV instances referenced by the model."""
    scripts = {}
    for task in model.tasks():
        if task.script_file:
            scripts[task.id] = model.resolve(task.script_file).read_text(encoding="utf-8")
    schemas: dict[str, TableSchema] = {}
    for obj in model.data_objects.values():
        if obj.schema_file:
            for stmt in Parser(model.resolve(obj.schema_file).read_text(encoding="utf-8")).script():
                if isinstance(stmt, CreateTable):
                    schemas[stmt.name] = TableSchema.from_create(stmt)
    data = {}
    for obj in model.data_objects.values():
        if obj.data_file:
            if obj.name not in schemas:
                raise BindingError(f"data object {obj.name!r} has data but no schema")
            text = model.resolve(obj.data_file).read_text(encoding="utf-8")
            data[obj.name] = load_table_data(schemas[obj.name], text)
    wf = bind_workflow(model, scripts, schemas, data)
    if require_data:
        missing = [t for t in wf.inputs if t not in wf.data]
        if missing:
            raise BindingError(f"no data instance for input tables {missing}")
    return wf


def evaluate_workflow(workflow: SqlWorkflow, db: dict[str, TableData] | None = None,
                      tasks: list[str] | None = None) -> dict[str, TableData]:
    """Run the tasks (default: all, in order) and return every table, inputs included."""
    from pleak.sql.evaluate import eval_query

    tables = dict(workflow.data if db is None else db)
    for task in tasks if tasks is not None else workflow.order:
        for q in workflow.statements[task]:
            tables[q.into] = eval_query(q, tables, workflow.funcs)
    return tables
