"""Command-line front end: ``pleak <subcommand> model.json [options]``.

Exit codes: 0 on success, 1 when the model has validation issues, 2 on usage
errors, unreadable inputs or infeasible parameters.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from pleak import __version__, pebpmn
from pleak.advantage import parse_policy
from pleak.errors import InfeasibleSmoothness, PleakError
from pleak.model import load_model_file, validate_structure
from pleak.report import FORMATS, ValidationReport, format_report
from pleak.sensitivity.noise import SmoothParams
from pleak.sensitivity.norm import parse_norm

EXIT_OK, EXIT_ISSUES, EXIT_USAGE = 0, 1, 2
DEFAULT_OUT = "pleak-out"
EXTENSIONS = {"text": "txt", "json": "json", "csv": "csv", "dot": "dot"}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pleak", description="Privacy leakage analyses for process models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model", help="model JSON file")
    common.add_argument("--out", default=DEFAULT_OUT, help="output directory (default: ./%(default)s)")
    common.add_argument("--format", choices=FORMATS, default="text", help="report format (default: text)")
    common.add_argument("--quiet", action="store_true", help="write files only, print nothing")

    numeric = argparse.ArgumentParser(add_help=False)
    numeric.add_argument("--epsilon", type=float, default=1.0, help="privacy budget (default: 1.0)")
    numeric.add_argument("--beta", type=float, default=0.1, help="smoothness parameter (default: 0.1)")
    numeric.add_argument("--gamma", type=float, default=4.0, help="generalized Cauchy exponent (default: 4)")
    numeric.add_argument("--sigmoid-a", type=float, default=10.0, help="sigmoid precision (default: 10)")
    numeric.add_argument("--confidence", type=float, default=0.8, help="error confidence level (default: 0.8)")
    numeric.add_argument("--output", dest="target_output", help="output table to analyze (default: the final one)")
    numeric.add_argument("--attacker", help="attacker knowledge file (overrides the model's)")

    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("validate", parents=[common], help="structural and stereotype checks")
    sub.add_parser("disclosure", parents=[common], help="simple disclosure report")
    sub.add_parser("deps", parents=[common], help="data dependency matrix")
    lw = sub.add_parser("leaks-when", parents=[common], help="leaks-when report for output tables")
    lw.add_argument("--target", nargs="+", required=True, help="output tables to explain")
    sub.add_parser("sens-global", parents=[common], help="global row sensitivity matrix")
    sub.add_parser("sens-derivative", parents=[common, numeric], help="derivative sensitivity and noise calibration")
    adv = sub.add_parser("advantage", parents=[common, numeric], help="noise calibration from a guessing advantage")
    adv.add_argument("--advantage", type=float, required=True, help="allowed guessing advantage in [0, 1]")
    adv.add_argument("--sensitive", help="sensitive attributes file (overrides the model's)")
    return parser


def _params(args) -> SmoothParams:
    try:
        return SmoothParams(args.epsilon, args.beta, args.gamma, args.sigmoid_a, args.confidence)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read(path: Path, what: str) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc.strerror}") from None


def _policy_path(flag: str | None, model, attr: str, what: str) -> Path | None:
    if flag:
        return Path(flag)
    rel = getattr(model, attr)
    return model.resolve(rel) if rel else None


def _emit(args, name: str, text: str, extra: dict[str, str] | None = None) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.{EXTENSIONS[args.format]}").write_text(text, encoding="utf-8")
    for fname, body in (extra or {}).items():
        (out / fname).parent.mkdir(parents=True, exist_ok=True)
        (out / fname).write_text(body, encoding="utf-8")
    if not args.quiet:
        sys.stdout.write(text)


def _load_sql(model, require_data: bool):
    from pleak.sql.workflow import load_sql_workflow
    return load_sql_workflow(model, require_data=require_data)


def _validate(model, stereotypes: bool = True) -> ValidationReport:
    report = ValidationReport(validate_structure(model))
    if stereotypes:
        report.stereotypes = pebpmn.validate_stereotypes(model)
    return report


def _cmd_validate(args, model) -> int:
    report = _validate(model)
    _emit(args, "validate", format_report(report, args.format))
    return EXIT_OK if report.ok else EXIT_ISSUES


def _refuse(args, report: ValidationReport) -> int:
    sys.stderr.write("model has problems; analysis not run\n")
    sys.stderr.write(format_report(report, "text"))
    return EXIT_ISSUES


def _cmd_disclosure(args, model) -> int:
    report = _validate(model)
    if not report.ok:
        return _refuse(args, report)
    _emit(args, "disclosure", format_report(pebpmn.disclosure_report(model), args.format))
    return EXIT_OK


def _cmd_deps(args, model) -> int:
    report = _validate(model)
    if not report.ok:
        return _refuse(args, report)
    _emit(args, "deps", format_report(pebpmn.dependency_matrix(model), args.format))
    return EXIT_OK


def _cmd_leaks_when(args, model) -> int:
    from pleak.leakswhen import dot_files, leaks_when

    report = _validate(model, stereotypes=False)
    if not report.ok:
        return _refuse(args, report)
    wf = _load_sql(model, require_data=False)
    result = leaks_when(wf, args.target)
    extra = {f"leaks-when/{k}": v for k, v in dot_files(result).items()} if args.format == "dot" else None
    _emit(args, "leaks-when", format_report(result, args.format), extra)
    return EXIT_OK


def _cmd_sens_global(args, model) -> int:
    from pleak.sensitivity.globalsens import global_sensitivity

    report = _validate(model, stereotypes=False)
    if not report.ok:
        return _refuse(args, report)
    wf = _load_sql(model, require_data=False)
    _emit(args, "sens-global", format_report(global_sensitivity(wf), args.format))
    return EXIT_OK


def _ranges(args, model, schemas):
    path = _policy_path(args.attacker, model, "attacker_file", "attacker")
    if path is None:
        return None
    knowledge, _ = parse_policy(_read(path, "attacker file"), "", schemas)
    return knowledge.ranges()


def _cmd_sens_derivative(args, model) -> int:
    from pleak.sensitivity.analysis import derivative_analysis

    params = _params(args)
    params.check_feasible()
    report = _validate(model, stereotypes=False)
    if not report.ok:
        return _refuse(args, report)
    wf = _load_sql(model, require_data=True)
    norms = {}
    for obj in model.data_objects.values():
        if obj.norm_file:
            norms[obj.name] = parse_norm(_read(model.resolve(obj.norm_file), "norm file"), wf.schemas.get(obj.name))
    result = derivative_analysis(wf, wf.data, norms, _ranges(args, model, wf.schemas), params, args.target_output)
    _emit(args, "sens-derivative", format_report(result, args.format))
    return EXIT_OK


def _cmd_advantage(args, model) -> int:
    from pleak.advantage import advantage_analysis

    if not 0 <= args.advantage <= 1:
        raise UsageError(f"--advantage must lie in [0, 1], got {args.advantage}")
    params = _params(args)
    report = _validate(model, stereotypes=False)
    if not report.ok:
        return _refuse(args, report)
    attacker = _policy_path(args.attacker, model, "attacker_file", "attacker")
    sensitive = _policy_path(args.sensitive, model, "sensitive_file", "sensitive")
    if attacker is None or sensitive is None:
        raise UsageError("advantage needs an attacker file and a sensitive-attributes file "
                         "(--attacker/--sensitive or attackerFile/sensitiveFile in the model)")
    wf = _load_sql(model, require_data=True)
    knowledge, spec = parse_policy(_read(attacker, "attacker file"), _read(sensitive, "sensitive file"), wf.schemas)
    result = advantage_analysis(wf, wf.data, knowledge, spec, args.advantage, params, args.target_output)
    _emit(args, "advantage", format_report(result, args.format))
    return EXIT_OK


COMMANDS = {
    "validate": _cmd_validate,
    "disclosure": _cmd_disclosure,
    "deps": _cmd_deps,
    "leaks-when": _cmd_leaks_when,
    "sens-global": _cmd_sens_global,
    "sens-derivative": _cmd_sens_derivative,
    "advantage": _cmd_advantage,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        model = load_model_file(args.model)
    except OSError as exc:
        sys.stderr.write(f"pleak: cannot read model {args.model}: {exc.strerror}\n")
        return EXIT_USAGE
    except PleakError as exc:
        sys.stderr.write(f"pleak: {exc}\n")
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, model)
    except InfeasibleSmoothness as exc:
        sys.stderr.write(f"pleak: infeasible parameters: {exc}\n")
        return EXIT_USAGE
    except (UsageError, PleakError, ValueError) as exc:
        sys.stderr.write(f"pleak: {exc}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
