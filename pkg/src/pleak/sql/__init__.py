"""SQL front end: parsing, type checking, concrete evaluation, workflow binding."""
from pleak.sql.ast import SelectQuery, to_sql
from pleak.sql.evaluate import count_rows, eval_query
from pleak.sql.parser import parse_expr, parse_sql
from pleak.sql.tables import TableData, TableSchema, load_table_data
from pleak.sql.workflow import SqlWorkflow, bind_workflow, load_sql_workflow, single_query_workflow

__all__ = [
    "SelectQuery", "SqlWorkflow", "TableData", "TableSchema", "bind_workflow", "count_rows",
    "eval_query", "load_sql_workflow", "load_table_data", "parse_expr", "parse_sql",
    "single_query_workflow", "to_sql",
]
