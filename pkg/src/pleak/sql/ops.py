"""Scalar semantics shared by the concrete evaluator and the DAG interpreter."""
from __future__ import annotations

import math
from fractions import Fraction

from pleak.errors import EvaluationError


def arith(op: str, a, b, result_type: str):
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    elif op == "/":
        if b == 0:
            raise EvaluationError("division by zero")
        if result_type == "INT8":
            # exact quotient truncated toward zero
            return int(Fraction(a, b))
        r = a / b
    elif op == "^":
        try:
            return math.pow(a, b)
        except (ValueError, OverflowError) as exc:
            raise EvaluationError(f"invalid power {a} ^ {b}") from exc
    else:
        raise ValueError(op)
    return float(r) if result_type == "FLOAT8" else r


def compare(op: str, a, b) -> bool:
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "=":
        return a == b
    if op == "<>":
        return a != b
    raise ValueError(op)


def builtin(name: str, args, result_type: str):
    if name == "sqrt":
        if args[0] < 0:
            raise EvaluationError(f"sqrt of negative value {args[0]}")
        return math.sqrt(args[0])
    if name == "abs":
        r = abs(args[0])
    elif name == "least":
        r = min(args)
    elif name == "greatest":
        r = max(args)
    else:
        raise ValueError(name)
    return float(r) if result_type == "FLOAT8" else r


def coerce_to(value, type_: str):
    if type_ == "FLOAT8" and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value
