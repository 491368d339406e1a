"""Per-table sensitivity analysis of a workflow output, ending in a noise calibration."""
from __future__ import annotations

from dataclasses import dataclass, field

from pleak.errors import SymbolicError
from pleak.sensitivity.local import local_row_sensitivity
from pleak.sensitivity.noise import CalibrationResult, SmoothParams, calibrate_noise
from pleak.sensitivity.norm import NormSpec
from pleak.sensitivity.smooth import (
    Ranges,
    as_workflow,
    row_duals,
    smooth_bound,
    smooth_lower,
)
from pleak.sql.tables import TableData
from pleak.sql.workflow import evaluate_workflow


@dataclass
class TableSensitivity:
    table: str
    derivative: float = 0.0
    smooth: float = 0.0
    row: float | None = None
    row_approximate: bool = False
    per_row: list[float] = field(default_factory=list)

    @property
    def bound(self) -> float:
        return max(self.smooth, self.row or 0.0)


def output_value(workflow, db: dict[str, TableData], output: str) -> float:
    """Concrete value of an aggregate output, or the row count of a plain one."""
    tables = evaluate_workflow(workflow, db)
    result = tables[output]
    producer = workflow.producers(output)[0]
    final = next(q for q in reversed(workflow.statements[producer]) if q.into == output)
    if final.aggregation is not None:
        return float(result.rows[0][0])
    return float(len(result.rows))


def analyze_table(source, db, table: str, norm: NormSpec, ranges: Ranges | None, params: SmoothParams,
                  output: str | None = None) -> TableSensitivity:
    res = TableSensitivity(table)
    if norm.cols:
        fn = smooth_lower(source, db, norm, ranges, table, params.a, output)
        _, grad = fn.evaluate()
        res.per_row = row_duals(fn, grad)
        res.derivative = norm.combine(res.per_row)
        res.smooth = smooth_bound(fn, norm, params.beta, ranges)
    if norm.G is not None:
        local = local_row_sensitivity(source, db, table, norm.G, output)
        res.row = local.value
        res.row_approximate = local.approximate
    return res


def derivative_analysis(source, db: dict[str, TableData], norms: dict[str, NormSpec], ranges: Ranges | None,
                        params: SmoothParams, output: str | None = None) -> CalibrationResult:
    """Sensitivity w.r.t. every table that has a norm, calibrated to the largest bound."""
    params.check_feasible()
    wf = as_workflow(source, db)
    if output is None:
        finals = wf.final_outputs()
        if len(finals) != 1:
            raise SymbolicError(f"choose one output to analyze among {finals}")
        output = finals[0]
    if not norms:
        raise SymbolicError("no table norm given; nothing is sensitive")
    tables = {}
    for table in sorted(norms):
        tables[table] = analyze_table(wf, db, table, norms[table], ranges, params, output)
    y = output_value(wf, db, output)
    worst = max(tables.values(), key=lambda t: t.bound)
    return calibrate_noise(worst.bound, y, params, max(worst.derivative, worst.row or 0.0), tables)
