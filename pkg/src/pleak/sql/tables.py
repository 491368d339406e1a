"""Table schemas and CSV-backed table instances."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from pleak.errors import DataError, SqlError
from pleak.sql.ast import NUMERIC, CreateTable


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: tuple[tuple[str, str], ...]
    primary_key: tuple[str, ...] | None = None

    def __post_init__(self):
        names = [c for c, _ in self.columns]
        if len(set(names)) != len(names):
            raise SqlError(f"table {self.name!r} has duplicate column names")
        for key in self.primary_key or ():
            if key not in names:
                raise SqlError(f"primary key column {key!r} not in table {self.name!r}")

    @property
    def column_names(self) -> list[str]:
        return [c for c, _ in self.columns]

    def index(self, column: str) -> int:
        for i, (name, _) in enumerate(self.columns):
            if name == column:
                return i
        raise KeyError(column)

    def type_of(self, column: str) -> str:
        return self.columns[self.index(column)][1]

    def is_numeric(self, column: str) -> bool:
        return self.type_of(column) in NUMERIC

    @classmethod
    def from_create(cls, stmt: CreateTable) -> "TableSchema":
        return cls(stmt.name, stmt.columns, stmt.primary_key)


@dataclass(frozen=True)
class TableData:
    schema: TableSchema
    rows: tuple[tuple, ...]

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list:
        i = self.schema.index(name)
        return [r[i] for r in self.rows]

    def with_rows(self, rows) -> "TableData":
        return TableData(self.schema, tuple(rows))


_TRUE = {"true", "t", "1", "yes"}
_FALSE = {"false", "f", "0", "no"}


def coerce(value: str, type_: str):
    if type_ == "INT8":
        return int(value)
    if type_ == "FLOAT8":
        return float(value)
    if type_ == "BOOL":
        low = value.strip().lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(value)
    return value


def load_table_data(schema: TableSchema, csv_text: str) -> TableData:
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"CSV for {schema.name!r} is empty (missing header)") from None
    header = [h.strip() for h in header]
    if header != schema.column_names:
        raise DataError(f"CSV header {header} does not match columns {schema.column_names} of {schema.name!r}")
    rows = []
    for line_no, raw in enumerate(reader, start=2):
        if not raw:
            continue
        if len(raw) != len(schema.columns):
            raise DataError(f"{schema.name}: row {line_no} has {len(raw)} values, expected {len(schema.columns)}",
                            row=line_no)
        row = []
        for (name, type_), value in zip(schema.columns, raw):
            try:
                row.append(coerce(value, type_))
            except ValueError:
                raise DataError(f"{schema.name}: cannot read {value!r} as {type_} in row {line_no}, column {name!r}",
                                row=line_no, column=name) from None
        rows.append(tuple(row))
    return TableData(schema, tuple(rows))


def dump_table_data(table: TableData) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.schema.column_names)
    for row in table.rows:
        writer.writerow(["true" if v is True else "false" if v is False else v for v in row])
    return buf.getvalue()
