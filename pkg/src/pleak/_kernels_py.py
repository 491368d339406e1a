"""Pure numpy smoothing kernels, used when the compiled extension is unavailable."""
from __future__ import annotations

import numpy as np

KINDS = ("COUNT", "SUM", "MIN", "MAX")
WEIGHT_CAP = float(np.exp(700.0))


def sigmoid(t, a: float):
    """Logistic sigmoid of ``a * t`` and its derivative with respect to ``t``."""
    t = np.asarray(t, dtype=np.float64)
    z = a * t
    s = np.empty_like(z)
    pos = z >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    s[~pos] = e / (1.0 + e)
    return s, a * s * (1.0 - s)


def smooth_reduce(kind: str, values, guards, a: float):
    """Smoothed aggregate of ``values`` weighted by guards in [0, 1].

    Returns (value, d value / d values, d value / d guards). MIN and MAX use a
    log-sum-exp with precision ``a``; the result is NaN when every guard is zero.
    """
    if kind not in KINDS:
        raise KeyError(kind)
    v = np.asarray(values, dtype=np.float64)
    s = np.asarray(guards, dtype=np.float64)
    if kind == "COUNT":
        return float(s.sum()), np.zeros_like(s), np.ones_like(s)
    if kind == "SUM":
        return float(s @ v), s.copy(), v.copy()
    sign = -1.0 if kind == "MIN" else 1.0
    live = s > 0
    if not live.any():
        return float("nan"), np.zeros_like(s), np.zeros_like(s)
    m = np.max(sign * v[live])
    # dead rows may sit far beyond m; cap their weights so the guard gradient stays finite
    e = np.exp(np.minimum(a * (sign * v - m), 700.0))
    total = float(np.sum(s[live] * e[live]))
    with np.errstate(over="ignore"):
        z = np.minimum(e / total, WEIGHT_CAP)
    return float(sign * (m + np.log(total) / a)), np.where(live, s * z, 0.0), sign * z / a
