import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import conditioned_pmf_enumeration, last_success_enumeration
from stopping_lab.last_success import (
    FIRST_WHEN_NO_SAMPLES_LEFT,
    NEVER,
    AcceptSet,
    LastSuccessRule,
    SDistribution,
    conditioned_s_distribution,
    googol_rule_choice,
    googol_rule_run,
    hard_googol_instance,
    monotone_rule_success,
    optimal_accept_set,
    optimal_stop_decision,
    simulate_last_success,
    states_at_ones,
    success_upper_bound,
)
from stopping_lab.policies import AdversarialGame, adversarial_threshold_run
from stopping_lab.model import AdversarialOrder
from stopping_lab.validation import UndefinedRatio


def test_one_index_half():
    S = conditioned_s_distribution(1, 0.5)
    assert S.pmf == pytest.approx([1 / 3, 2 / 3], abs=1e-15)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("p", [Fraction(1, 5), Fraction(1, 2), Fraction(7, 10)])
def test_conditioned_law_matches_enumeration(n, p):
    exact = conditioned_pmf_enumeration(n, p)
    S = conditioned_s_distribution(n, float(p))
    assert S.pmf == pytest.approx([float(m) for m in exact], abs=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("p", [Fraction(1, 5), Fraction(1, 2), Fraction(7, 10)])
def test_monotone_formula_matches_enumeration(n, p):
    S = conditioned_s_distribution(n, float(p))
    for A in (optimal_accept_set(S), FIRST_WHEN_NO_SAMPLES_LEFT, NEVER):
        brute = last_success_enumeration(n, p, lambda a, b: bool(A(a, b)))
        assert monotone_rule_success(A, S) == pytest.approx(float(brute), abs=1e-12)


def test_small_p_concentrates_at_zero():
    assert conditioned_s_distribution(20, 1e-9).pmf[0] == pytest.approx(1.0, abs=1e-7)


def test_p_outside_range_rejected():
    for p in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            conditioned_s_distribution(5, p)


def test_stop_decision_examples():
    flat = SDistribution(np.full(10, 0.1))
    assert not optimal_stop_decision((1, 2), flat)
    assert optimal_stop_decision((1, 0), flat)
    decreasing = SDistribution(np.array([0.4, 0.3, 0.2, 0.1]))
    assert optimal_stop_decision((1, 0), decreasing)


def test_undefined_ratio():
    S = SDistribution(np.array([0.5, 0.0, 0.5]))
    with pytest.raises(UndefinedRatio):
        optimal_stop_decision((1, 0), S)
    # no mass now or later: stop
    assert optimal_stop_decision((5, 0), S)


def test_non_monotone_set_rejected():
    S = conditioned_s_distribution(20, 0.1)
    odd = AcceptSet(lambda a, b: (a + b) % 2 == 1, "odd")
    assert not odd.is_monotone(20)
    with pytest.raises(ValueError):
        monotone_rule_success(odd, S)


def test_empty_rule_scores_zero():
    assert monotone_rule_success(NEVER, conditioned_s_distribution(50, 0.05)) == 0.0


def test_stop_when_no_samples_remain():
    S = conditioned_s_distribution(200, 0.02)
    direct = math.fsum(0.5 * S.prob(a) - 0.25 * S.prob(a + 1) for a in range(1, 202))
    assert monotone_rule_success(FIRST_WHEN_NO_SAMPLES_LEFT, S) == pytest.approx(direct, abs=1e-12)


ns = st.integers(1, 400)
ps = st.floats(1e-3, 0.9)


@given(ns, ps)
def test_optimal_rule_is_monotone_and_below_bound(n, p):
    S = conditioned_s_distribution(n, p)
    A = optimal_accept_set(S)
    assert A.is_monotone(n)
    assert monotone_rule_success(A, S) <= success_upper_bound(S) + 1e-12


@given(ns, ps)
def test_ratio_is_non_increasing_along_trajectories(n, p):
    S = conditioned_s_distribution(n, p)
    lp = S.logpmf
    for s in range(min(n, 40)):
        for b in range(min(s, 8) + 1):
            for b2 in range(b + 1):
                if s + 2 > n or not np.isfinite(lp[s + 1]) or not np.isfinite(lp[s]):
                    continue
                here = math.log(b + 1) + lp[s + 1] - lp[s]
                nxt = math.log(b2 + 1) + lp[s + 2] - lp[s + 1]
                assert nxt <= here + 1e-9


@given(ns, ps)
def test_telescoping_bound(n, p):
    S = conditioned_s_distribution(n, p)
    for b in (0, 1, 5):
        total = math.fsum(abs(S.prob(a + b) - S.prob(a + b + 1)) for a in range(0, n + 1))
        assert total <= 2 * S.max_prob() + 1e-12


def test_point_mass_bound():
    assert success_upper_bound(SDistribution(np.array([0.0, 1.0]))) == 4.25


def test_states_at_ones():
    a, b = states_at_ones(np.array([1, 4]), np.array([0, 2, 5]))
    assert list(a) == [2, 4] and list(b) == [2, 1]


def test_simulation_agrees_with_formula():
    n, p = 30, 0.05
    S = conditioned_s_distribution(n, p)
    A = optimal_accept_set(S)
    rep = simulate_last_success(A, n, p, 20_000, seed=11)
    assert rep.covers(monotone_rule_success(A, S)) or abs(rep.estimate - monotone_rule_success(A, S)) < 4 * rep.sigma


def test_simulation_plain_rules():
    assert simulate_last_success(NEVER, 10, 0.2, 500, seed=1).successes == 0
    # accept the first one: wins iff exactly one X-one
    n, p = 3, Fraction(1, 2)
    exact = last_success_enumeration(n, p, lambda a, b: True)
    rep = simulate_last_success(lambda a, b: True, n, float(p), 20_000, seed=2)
    assert abs(rep.estimate - float(exact)) < 4 * rep.sigma


def test_simulation_heterogeneous_p_and_determinism():
    rule = FIRST_WHEN_NO_SAMPLES_LEFT
    a = simulate_last_success(rule, 4, [0.1, 0.3, 0.2, 0.4], 300, seed=5)
    b = simulate_last_success(rule, 4, [0.1, 0.3, 0.2, 0.4], 300, seed=5)
    assert a == b
    with pytest.raises(ValueError):
        simulate_last_success(rule, 4, [0.1, 0.3], 10)


def test_hard_instance_reduction_on_every_trial():
    sampler = hard_googol_instance(30, 0.08)
    S = conditioned_s_distribution(30, 0.08)
    A = optimal_accept_set(S)
    gen = np.random.default_rng(7)
    for _ in range(300):
        draw = sampler.draw(gen)
        down = draw.orientation.face_down_values(draw.instance)
        up = draw.orientation.face_up_values(draw.instance)
        # every nonzero value beats every perturbed zero
        assert (down[draw.x_ones].min(initial=np.inf) > 1 - 1e-12)
        assert np.all(np.delete(down, draw.x_ones) < 1) and np.all(np.delete(up, draw.y_ones) < 1)
        # the largest face-down value is the last nonzero one, when there is one
        if draw.x_ones.size:
            assert int(np.argmax(down)) == draw.x_ones[-1]
        chosen = googol_rule_run(A, draw)
        a, b = states_at_ones(draw.x_ones, draw.y_ones)
        hits = np.flatnonzero(A(a, b)) if a.size else np.array([], dtype=int)
        expect = int(draw.x_ones[hits[0]]) if hits.size else None
        assert chosen == expect
        googol_win = chosen is not None and down[chosen] == down.max()
        last_win = expect is not None and expect == draw.x_ones[-1]
        assert googol_win == last_win
        # the threshold rule on the same draw sees the same event structure
        game = AdversarialGame(draw.instance, AdversarialOrder(tuple(range(30))), draw.orientation)
        trace = adversarial_threshold_run(game)
        if trace.accepted is not None:
            assert trace.accepted in set(draw.x_ones.tolist())


def test_hard_instance_p_validation():
    with pytest.raises(ValueError):
        hard_googol_instance(2, (1.0, 1.0))
    with pytest.raises(ValueError):
        hard_googol_instance(2, 0.0)


@pytest.mark.slow
def test_cross_model_agreement():
    N = 1000
    p = N ** (-2 / 3)
    S = conditioned_s_distribution(N, p)
    A = optimal_accept_set(S)
    sampler = hard_googol_instance(N, p)
    gen = np.random.default_rng(2026)
    trials, wins = 20_000, 0
    down_all, up_all = sampler.sample_batch(gen, trials)
    for down, up in zip(down_all, up_all):
        chosen = googol_rule_choice(A, down, up)
        wins += chosen is not None and down[chosen] == down.max()
    est = wins / trials
    assert abs(est - monotone_rule_success(A, S)) < 4 * math.sqrt(est * (1 - est) / trials)


def test_last_success_rule_estimator():
    rule = LastSuccessRule(n=1000).fit()
    assert rule.p_ == pytest.approx(0.01)
    assert rule.get_params() == {"n": 1000, "p": None}
    assert rule.success_probability() <= rule.upper_bound()
    decisions = rule.predict([[40, 0], [1, 40]])
    assert decisions[0] and not decisions[1]
