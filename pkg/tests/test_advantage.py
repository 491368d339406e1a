import math
import random

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from helpers import scenario, scenario_analysis_inputs
from pleak.advantage import (
    Approx,
    AttackerKnowledge,
    Exact,
    LeakTarget,
    Range,
    SensitiveSpec,
    Total,
    advantage_analysis,
    advantage_to_epsilon,
    format_attacker,
    format_sensitive,
    parse_attacker,
    parse_policy,
    parse_sensitive,
    posterior_from_epsilon,
    prior_probability,
)
from pleak.errors import PolicyError
from pleak.sensitivity.noise import SmoothParams


def policy(rel="ships/count.json"):
    model = scenario(rel)
    return (model.resolve(model.attacker_file).read_text(), model.resolve(model.sensitive_file).read_text())


def run(adv, radius=5.0, rel="ships/count.json"):
    wf, _, _ = scenario_analysis_inputs(rel)
    knowledge, spec = parse_policy(*policy(rel), wf.schemas)
    spec = SensitiveSpec([LeakTarget(t.table, t.column, Approx(radius), t.cost) for t in spec.targets])
    return advantage_analysis(wf, wf.data, knowledge, spec, adv, SmoothParams())


# -- policy files --------------------------------------------------------------

def test_scenario_policy_parses():
    knowledge, spec = parse_policy(*policy())
    assert knowledge.entries[("ship", "name")] == Total(53)
    assert knowledge.entries[("ship", "latitude")] == Range(0, 300)
    assert [t.name for t in spec.targets] == ["ship.latitude", "ship.longitude"]
    assert all(t.guess == Approx(5) and t.cost == 1.0 for t in spec.targets)


def knowledge_strategy():
    name = st.sampled_from(["a", "b", "c"])
    value = st.one_of(
        st.just(Exact()),
        st.tuples(st.floats(-1e6, 1e6), st.floats(0.001, 1e6)).map(lambda t: Range(t[0], t[0] + t[1])),
        st.integers(1, 10**6).map(Total),
    )
    return st.dictionaries(st.tuples(st.just("t"), name), value)


@settings(max_examples=100, deadline=None)
@given(knowledge_strategy())
def test_attacker_round_trip(entries):
    k = AttackerKnowledge(entries)
    assert parse_attacker(format_attacker(k)).entries == entries


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["a", "b"]), st.one_of(st.just(Exact()), st.floats(0.01, 100).map(Approx)),
                          st.floats(0, 100)), max_size=4))
def test_sensitive_round_trip(items):
    spec = SensitiveSpec([LeakTarget("t", c, g, cost) for c, g, cost in items])
    assert parse_sensitive(format_sensitive(spec)).targets == spec.targets


@pytest.mark.parametrize("text", ["ship.latitude range 5 1;", "ship.name total 0;", "ship latitude exact;",
                                  "ship.latitude between 0 1;"])
def test_bad_attacker_files(text):
    with pytest.raises(PolicyError):
        parse_attacker(text)


def test_unknown_attribute_is_rejected():
    wf, _, _ = scenario_analysis_inputs("ships/count.json")
    with pytest.raises(PolicyError):
        parse_policy("ship.colour range 0 1;", "", wf.schemas)


# -- priors and the epsilon conversion -------------------------------------------

def test_priors():
    assert prior_probability(Range(0, 300), Approx(5)) == pytest.approx(10 / 300)
    assert prior_probability(Total(53), Exact()) == 1 / 53
    assert prior_probability(Exact(), Approx(1)) == 1.0
    assert prior_probability(Range(0, 4), Approx(5)) == 1.0
    with pytest.raises(PolicyError):
        prior_probability(Range(0, 1), Exact())
    with pytest.raises(PolicyError):
        prior_probability(Total(3), Approx(1))


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-4, 0.999), st.floats(1e-6, 1.0), st.floats(0.01, 50))
def test_posterior_round_trip(p, adv, r):
    assume(p + adv < 1 - 1e-9)
    eps = advantage_to_epsilon(adv, p, r)
    assert posterior_from_epsilon(eps, p, r) == pytest.approx(p + adv, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 0.5), st.floats(0.01, 5), st.floats(0.1, 10), st.floats(0.1, 10))
def test_smaller_radius_lowers_posterior_at_fixed_epsilon(eps, width, r1, r2):
    assume(abs(r1 - r2) > 1e-6)
    small, large = sorted((r1, r2))
    rng_k = Range(0, 100 * width)
    p_small, p_large = prior_probability(rng_k, Approx(small)), prior_probability(rng_k, Approx(large))
    assume(p_large < 1)  # a guess covering the whole range is certain at any radius
    assert p_small < p_large
    assert posterior_from_epsilon(eps, p_small, small) < posterior_from_epsilon(eps, p_large, large)


def test_conversion_edges():
    assert advantage_to_epsilon(0, 0.3) == 0
    assert advantage_to_epsilon(0.7, 0.3) == math.inf
    with pytest.raises(ValueError):
        advantage_to_epsilon(1.5, 0.3)


# -- pipeline ----------------------------------------------------------------------

def test_zero_advantage_means_infinite_error():
    res = run(0.0)
    assert res.epsilon == 0 and res.relative_error == math.inf


def test_full_advantage_means_zero_error():
    res = run(1.0)
    assert res.relative_error == 0 and res.noise_scale == 0


def test_reported_posterior_is_prior_plus_advantage():
    res = run(0.3)
    for tp in res.targets:
        assert tp.posterior == pytest.approx(tp.prior + 0.3, abs=1e-12)
        assert posterior_from_epsilon(res.epsilon, tp.prior, 5.0) == pytest.approx(tp.posterior, abs=1e-9)


def test_shrinking_radius_lowers_both_probabilities():
    wide, narrow = run(0.3, radius=5.0), run(0.3, radius=2.0)
    for w, n in zip(wide.targets, narrow.targets):
        assert n.prior < w.prior
        assert n.posterior < w.posterior


def test_error_decreases_with_advantage():
    errors = [run(a).relative_error for a in (0.05, 0.2, 0.3, 0.5, 0.8)]
    assert all(x > y for x, y in zip(errors, errors[1:]))


def test_exact_guess_uses_row_sensitivity():
    wf, _, _ = scenario_analysis_inputs("ships/count.json")
    knowledge, _ = parse_policy(*policy(), wf.schemas)
    spec = SensitiveSpec([LeakTarget("ship", "name", Exact(), 1.0)])
    res = advantage_analysis(wf, wf.data, knowledge, spec, 0.3, SmoothParams())
    assert res.targets[0].prior == pytest.approx(1 / 53)
    assert res.sensitivity > 0 and math.isfinite(res.relative_error)


def test_uncovered_target_is_rejected():
    wf, _, _ = scenario_analysis_inputs("ships/count.json")
    spec = SensitiveSpec([LeakTarget("port", "latitude", Approx(1.0))])
    with pytest.raises(PolicyError):
        advantage_analysis(wf, wf.data, AttackerKnowledge({}), spec, 0.3, SmoothParams())


def test_random_advantages_stay_consistent():
    rng = random.Random(1)
    for _ in range(20):
        p, adv = rng.uniform(0.01, 0.6), rng.uniform(0.01, 0.39)
        eps = advantage_to_epsilon(adv, p)
        assert eps > 0
        assert advantage_to_epsilon(adv / 2, p) < eps
