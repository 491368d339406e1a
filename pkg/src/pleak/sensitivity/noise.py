"""Generalized Cauchy noise calibration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import integrate, optimize

from pleak.errors import InfeasibleSmoothness

DEFAULT_GAMMA = 4.0
DEFAULT_CONFIDENCE = 0.8


@dataclass(frozen=True)
class SmoothParams:
    epsilon: float = 1.0
    beta: float = 0.1
    gamma: float = DEFAULT_GAMMA
    a: float = 10.0
    confidence: float = DEFAULT_CONFIDENCE

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not self.a > 0:
            raise ValueError(f"sigmoid precision must be positive, got {self.a}")
        if not 0 < self.confidence < 1:
            raise ValueError(f"confidence must lie in (0, 1), got {self.confidence}")

    @property
    def beta_limit(self) -> float:
        return self.epsilon / (self.gamma + 1)

    @property
    def denominator(self) -> float:
        return self.epsilon - (self.gamma + 1) * self.beta

    def check_feasible(self) -> None:
        if self.beta >= self.beta_limit or self.denominator <= 0:
            raise InfeasibleSmoothness(
                f"beta = {self.beta} is too large for epsilon = {self.epsilon} and gamma = {self.gamma}: "
                f"it must stay below epsilon/(gamma+1) = {self.beta_limit:.6g}; "
                f"lower --beta or raise --epsilon")


@dataclass
class CalibrationResult:
    sensitivity: float | None
    smooth_bound: float
    epsilon: float
    beta: float
    gamma: float
    confidence: float
    noise_scale: float
    output: float
    quantile: float
    relative_error: float
    tables: dict = field(default_factory=dict)


def _normalizer(gamma: float) -> float:
    # integral of 1/(1+|z|^gamma) over the real line
    return 2.0 * (math.pi / gamma) / math.sin(math.pi / gamma)


def _half_mass(t: float, gamma: float) -> float:
    """Integral of 1/(1+z^gamma) over [0, t]."""
    f = lambda z: 1.0 / (1.0 + z ** gamma)
    if t <= 1.0:
        return integrate.quad(f, 0.0, t, epsabs=1e-14, epsrel=1e-13)[0]
    head = integrate.quad(f, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)[0]
    # substitute z = 1/u on [1, t]
    g = lambda u: u ** (gamma - 2.0) / (u ** gamma + 1.0)
    tail = integrate.quad(g, 1.0 / t, 1.0, epsabs=1e-14, epsrel=1e-13)[0]
    return head + tail


def gen_cauchy_cdf_abs(t: float, gamma: float) -> float:
    """P(|Z| <= t) for the standardized density proportional to 1/(1+|z|^gamma)."""
    if t <= 0:
        return 0.0
    if math.isinf(t):
        return 1.0
    return 2.0 * _half_mass(t, gamma) / _normalizer(gamma)


def gen_cauchy_quantile(gamma: float, conf: float) -> float:
    if not gamma > 1:
        raise ValueError("gamma must exceed 1")
    if not 0 < conf < 1:
        raise ValueError("confidence must lie in (0, 1)")
    hi = 1.0
    while gen_cauchy_cdf_abs(hi, gamma) < conf:
        hi *= 2.0
    return optimize.brentq(lambda t: gen_cauchy_cdf_abs(t, gamma) - conf, 0.0, hi, xtol=1e-13, rtol=1e-14)


def relative_error(noise_scale: float, output: float, quantile: float) -> float:
    """Half-width of the central noise interval as a percentage of the output."""
    if noise_scale == 0:
        return 0.0
    if output == 0:
        return math.inf
    return quantile * noise_scale / abs(output) * 100.0


def calibrate_noise(S: float, y: float, params: SmoothParams, sensitivity: float | None = None,
                    tables: dict | None = None) -> CalibrationResult:
    if S < 0:
        raise ValueError("smooth bound must be non-negative")
    params.check_feasible()
    lam = S / params.denominator
    q = gen_cauchy_quantile(params.gamma, params.confidence)
    return CalibrationResult(sensitivity, S, params.epsilon, params.beta, params.gamma, params.confidence,
                             lam, y, q, relative_error(lam, y, q), dict(tables or {}))
