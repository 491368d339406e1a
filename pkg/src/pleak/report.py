"""Stable serialization of every analysis result (text, json, csv, dot)."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from pleak import leakswhen
from pleak.advantage import AdvantageResult
from pleak.leakswhen import LeaksWhenReport
from pleak.model import StructuralIssue
from pleak.pebpmn import DependencyMatrix, DisclosureReport, ValidationIssue
from pleak.sensitivity.globalsens import GlobalSensitivityMatrix
from pleak.sensitivity.noise import CalibrationResult

SCHEMA_VERSION = 1
FORMATS = ("text", "json", "csv", "dot")


@dataclass
class ValidationReport:
    structural: list[StructuralIssue] = field(default_factory=list)
    stereotypes: list[ValidationIssue] = field(default_factory=list)

    @property
    def issues(self) -> list:
        return list(self.structural) + list(self.stereotypes)

    @property
    def ok(self) -> bool:
        return not self.issues


def _num(x: float | None):
    """JSON has no infinity; infinite values become the string 'inf'."""
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _txt(x: float | None) -> str:
    if x is None:
        return "-"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6g}"


def _pct(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.4g}%"


def _dumps(doc: dict) -> str:
    return json.dumps({"schemaVersion": SCHEMA_VERSION, **doc}, indent=2, ensure_ascii=False) + "\n"


def _unsupported(report, fmt):
    raise ValueError(f"format {fmt!r} is not available for {type(report).__name__}")


def _validation(r: ValidationReport, fmt: str) -> str:
    issues = [{"code": i.code, "message": i.message, "nodes": list(i.node_ids)} for i in r.issues]
    if fmt == "json":
        return _dumps({"valid": r.ok, "issues": issues})
    if fmt == "text":
        if r.ok:
            return "model is valid\n"
        return "".join(f"{i['code']}: {i['message']} [{', '.join(i['nodes'])}]\n" for i in issues)
    if fmt == "csv":
        return "code,message,nodes\n" + "".join(
            f"{i['code']},\"{i['message']}\",{' '.join(i['nodes'])}\n" for i in issues)
    return _unsupported(r, fmt)


def _grid_text(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]
    fmt_row = lambda row: "  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() + "\n"
    return fmt_row(header) + "".join(fmt_row(r) for r in rows)


def _disclosure(r: DisclosureReport, fmt: str) -> str:
    if fmt == "csv":
        return r.to_csv()
    if fmt == "json":
        return _dumps(r.to_json())
    if fmt == "text":
        return _grid_text(["stakeholder", *r.objects], [[s, *row] for s, row in zip(r.stakeholders, r.cells)])
    return _unsupported(r, fmt)


def _dependencies(r: DependencyMatrix, fmt: str) -> str:
    if fmt == "csv":
        return r.to_csv()
    if fmt == "json":
        return _dumps(r.to_json())
    if fmt == "text":
        return _grid_text(["", *r.objects], [[o, *row] for o, row in zip(r.objects, r.cells)])
    if fmt == "dot":
        lines = ["digraph dependencies {"]
        lines += [f'  "{o}";' for o in r.objects]
        for i, src in enumerate(r.objects):
            for j, dst in enumerate(r.objects):
                if r.cells[i][j] not in ("", "–", "-"):
                    lines.append(f'  "{src}" -> "{dst}" [label="{r.cells[i][j]}"];')
        return "\n".join(lines + ["}"]) + "\n"
    return _unsupported(r, fmt)


def _global(r: GlobalSensitivityMatrix, fmt: str) -> str:
    if fmt == "csv":
        return r.to_csv()
    if fmt == "json":
        doc = r.to_json()
        doc.pop("schemaVersion", None)
        return _dumps(doc)
    if fmt == "text":
        from pleak.sensitivity.globalsens import format_cell
        return _grid_text(["table", *r.columns],
                          [[t, *(format_cell(r.cells[(t, c)]) for c in r.columns)] for t in r.tables])
    return _unsupported(r, fmt)


def _tables_doc(tables: dict) -> dict:
    return {name: {"derivative": _num(t.derivative), "smooth": _num(t.smooth), "row": _num(t.row),
                   "rowApproximate": t.row_approximate, "perRow": [_num(v) for v in t.per_row]}
            for name, t in sorted(tables.items())}


def _calibration(r: CalibrationResult, fmt: str) -> str:
    if fmt == "json":
        return _dumps({
            "sensitivity": _num(r.sensitivity), "smoothBound": _num(r.smooth_bound), "epsilon": r.epsilon,
            "beta": r.beta, "gamma": r.gamma, "confidence": r.confidence, "noiseScale": _num(r.noise_scale),
            "output": _num(r.output), "quantile": r.quantile, "relativeError": _num(r.relative_error),
            "tables": _tables_doc(r.tables),
        })
    if fmt == "text":
        lines = [
            f"sensitivity:    {_txt(r.sensitivity)}",
            f"smooth bound:   {_txt(r.smooth_bound)}",
            f"epsilon:        {_txt(r.epsilon)}",
            f"beta:           {_txt(r.beta)}",
            f"gamma:          {_txt(r.gamma)}",
            f"noise scale:    {_txt(r.noise_scale)}",
            f"output:         {_txt(r.output)}",
            f"relative error: {_pct(r.relative_error)} at {r.confidence:.0%} confidence",
        ]
        for name, t in sorted(r.tables.items()):
            row = "" if t.row is None else f", row {_txt(t.row)}" + (" (approximate)" if t.row_approximate else "")
            lines.append(f"  table {name}: derivative {_txt(t.derivative)}, smooth {_txt(t.smooth)}{row}")
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        return "table,derivative,smooth,row\n" + "".join(
            f"{n},{_txt(t.derivative)},{_txt(t.smooth)},{_txt(t.row)}\n" for n, t in sorted(r.tables.items()))
    return _unsupported(r, fmt)


def _advantage(r: AdvantageResult, fmt: str) -> str:
    if fmt == "json":
        return _dumps({
            "advantage": r.advantage, "epsilon": _num(r.epsilon), "beta": _num(r.beta),
            "noiseScale": _num(r.noise_scale), "relativeError": _num(r.relative_error),
            "expectedCost": r.expected_cost, "sensitivity": _num(r.sensitivity), "output": _num(r.output),
            "targets": [{"target": t.target, "prior": t.prior, "posterior": t.posterior,
                         "epsilon": _num(t.epsilon), "cost": t.cost} for t in r.targets],
        })
    if fmt == "text":
        lines = [
            f"advantage:      {_txt(r.advantage)}",
            f"epsilon:        {_txt(r.epsilon)}",
            f"beta:           {_txt(r.beta)}",
            f"noise scale:    {_txt(r.noise_scale)}",
            f"relative error: {_pct(r.relative_error)}",
            f"expected cost:  {_txt(r.expected_cost)}",
        ]
        for t in r.targets:
            lines.append(f"  {t.target}: prior {_txt(t.prior)}, posterior {_txt(t.posterior)}")
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        return "target,prior,posterior,epsilon,cost\n" + "".join(
            f"{t.target},{_txt(t.prior)},{_txt(t.posterior)},{_txt(t.epsilon)},{_txt(t.cost)}\n" for t in r.targets)
    return _unsupported(r, fmt)


def _leaks(r: LeaksWhenReport, fmt: str) -> str:
    if fmt == "csv":
        return _unsupported(r, fmt)
    return leakswhen.render(r, fmt)


_HANDLERS = [
    (ValidationReport, _validation),
    (DisclosureReport, _disclosure),
    (DependencyMatrix, _dependencies),
    (GlobalSensitivityMatrix, _global),
    (CalibrationResult, _calibration),
    (AdvantageResult, _advantage),
    (LeaksWhenReport, _leaks),
]


def format_report(report, fmt: str = "text") -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose one of {', '.join(FORMATS)}")
    for cls, handler in _HANDLERS:
        if isinstance(report, cls):
            return handler(report, fmt)
    raise TypeError(f"no serializer for {type(report).__name__}")
