import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from pleak.errors import InfeasibleSmoothness
from pleak.sensitivity.noise import (
    SmoothParams,
    calibrate_noise,
    gen_cauchy_cdf_abs,
    gen_cauchy_quantile,
    relative_error,
)


def simpson(f, a, b, n=1_000_000):
    x = np.linspace(a, b, n + 1)
    y = f(x)
    h = (b - a) / n
    return h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


def simpson_quantile(gamma, conf):
    """Quantile of |Z| by bisection over Simpson integrals of the unnormalized density."""
    f = lambda z: 1.0 / (1.0 + z ** gamma)
    tail = lambda u: u ** (gamma - 2.0) / (u ** gamma + 1.0)  # z = 1/u on [1, inf)
    head = simpson(f, 0.0, 1.0)
    total = head + simpson(tail, 0.0, 1.0)

    def mass(t):
        if t <= 1:
            return simpson(f, 0.0, t)
        return head + simpson(tail, 1.0 / t, 1.0)

    lo, hi = 0.0, 1.0
    while mass(hi) / total < conf:
        hi *= 2
    for _ in range(60):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if mass(mid) / total < conf else (lo, mid)
    return (lo + hi) / 2


def test_cauchy_quantile_closed_form():
    assert gen_cauchy_quantile(2, 0.8) == pytest.approx(math.tan(0.4 * math.pi), abs=1e-6)


def test_gamma_four_matches_simpson_oracle():
    assert gen_cauchy_quantile(4, 0.8) == pytest.approx(simpson_quantile(4, 0.8), abs=1e-6)


# below gamma = 2 the substituted tail is singular at 0 and Simpson cannot resolve it
@pytest.mark.parametrize("gamma", [2.5, 3.0, 6.0])
def test_other_gammas_match_simpson_oracle(gamma):
    assert gen_cauchy_quantile(gamma, 0.7) == pytest.approx(simpson_quantile(gamma, 0.7), abs=1e-6)


@settings(max_examples=80, deadline=None)
@given(st.floats(1.2, 8), st.floats(0.05, 0.95))
def test_quantile_inverts_cdf(gamma, conf):
    assert gen_cauchy_cdf_abs(gen_cauchy_quantile(gamma, conf), gamma) == pytest.approx(conf, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(1.2, 8), st.floats(0, 50), st.floats(0, 50))
def test_cdf_is_monotone(gamma, s, t):
    lo, hi = sorted((s, t))
    assert gen_cauchy_cdf_abs(lo, gamma) <= gen_cauchy_cdf_abs(hi, gamma) + 1e-15


positive = st.floats(0.01, 100)


@settings(max_examples=100, deadline=None)
@given(positive, positive, st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.5, 1000))
def test_error_decreases_in_epsilon_and_increases_in_S(s1, s2, e1, e2, y):
    beta = 0.001
    assume(abs(s1 - s2) > 1e-6 and abs(e1 - e2) > 1e-6)
    lo_s, hi_s = sorted((s1, s2))
    lo_e, hi_e = sorted((e1, e2))
    p_lo, p_hi = SmoothParams(epsilon=lo_e, beta=beta), SmoothParams(epsilon=hi_e, beta=beta)
    assert calibrate_noise(lo_s, y, p_hi).relative_error < calibrate_noise(lo_s, y, p_lo).relative_error
    assert calibrate_noise(lo_s, y, p_lo).relative_error < calibrate_noise(hi_s, y, p_lo).relative_error


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 10), st.floats(1.1, 10), st.floats(1.0, 3.0))
def test_beta_at_or_above_limit_is_rejected(eps, gamma, factor):
    p = SmoothParams(epsilon=eps, beta=factor * eps / (gamma + 1), gamma=gamma)
    with pytest.raises(InfeasibleSmoothness):
        calibrate_noise(1.0, 10.0, p)


def test_zero_sensitivity_gives_zero_error():
    res = calibrate_noise(0.0, 42.0, SmoothParams())
    assert res.noise_scale == 0 and res.relative_error == 0


def test_scale_formula():
    p = SmoothParams(epsilon=1.0, beta=0.1, gamma=4.0)
    res = calibrate_noise(2.0, 10.0, p)
    assert res.noise_scale == pytest.approx(2.0 / (1.0 - 5 * 0.1))
    assert res.relative_error == pytest.approx(res.quantile * res.noise_scale / 10.0 * 100)


def test_zero_output_error_is_infinite():
    assert relative_error(1.0, 0.0, 2.0) == math.inf


@pytest.mark.parametrize("kw", [{"epsilon": 0}, {"beta": -1}, {"gamma": 1}, {"confidence": 1}, {"a": 0}])
def test_parameter_validation(kw):
    with pytest.raises(ValueError):
        SmoothParams(**kw)
