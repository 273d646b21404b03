import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from oracles import threshold_integral_closed_form
from stopping_lab.bounds import (
    IID,
    InstanceBeatProbs,
    TableBeatProbs,
    block_success_term,
    f_series,
    gamma,
    grid_search_constants,
    limit_tail,
    optimal_block_thresholds,
    paper_bound,
    schedule_success,
    solve_optimal_threshold,
    threshold_integral,
    truncated_gamma,
)
from stopping_lab.ranks import PairStructure, p_value
from stopping_lab.schedule import ThresholdSchedule


@given(st.integers(0, 12), st.floats(0, 0.99))
def test_f_series_matches_coefficients(j, x):
    coeffs = [float(p_value(i + 1, j + 1)) for i in range(400)]
    series = math.fsum(c * x**i for i, c in enumerate(coeffs))
    assert f_series(j, x) == pytest.approx(series, rel=1e-9, abs=1e-12)


def test_f_series_domain():
    with pytest.raises(ValueError):
        f_series(0, 1.0)
    with pytest.raises(ValueError):
        f_series(-1, 0.5)


@pytest.mark.parametrize("j,lower,upper", [(0, 0.715598, 1.0), (1, 0.496376, 0.715598), (2, 0.301284, 0.496376), (4, 0.1, 0.3)])
def test_block_term_matches_nested_integral(j, lower, upper):
    def inner(y):
        val, _ = integrate.quad(lambda x: IID.quotient(j, x), 0.0, y, epsabs=1e-13)
        return IID.h(j, 0.0) - val

    nested, _ = integrate.quad(inner, lower, upper, epsabs=1e-13)
    assert block_success_term(j, lower, upper) == pytest.approx(nested, abs=1e-10)


def test_block_term_edge_cases():
    assert block_success_term(3, 0.4, 0.4) == 0.0
    with pytest.raises(ValueError):
        block_success_term(0, 0.6, 0.5)


def test_limit_tail_is_the_integral_of_its_kernel():
    for c in (0.1, 0.301284, 0.9):
        val, _ = integrate.quad(lambda y: 1 + math.log1p(-y), 0, c)
        assert limit_tail(c) == pytest.approx(val, abs=1e-12)
    assert limit_tail(1.0) == 0.0


def test_deep_blocks_approach_the_limit_kernel():
    # block j over (l, u] tends to int_l^u (1 + log(1 - y)) dy as j grows
    l, u = 0.2, 0.25
    target, _ = integrate.quad(lambda y: 1 + math.log1p(-y), l, u)
    gaps = [abs(block_success_term(j, l, u) - target) for j in (5, 20, 80)]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-6


def test_paper_bound_pieces():
    br = paper_bound()
    assert br.blocks == pytest.approx((0.0621, 0.0809, 0.1073), abs=5e-4)
    assert br.tail == pytest.approx(0.2504, abs=5e-4)
    assert br.total >= 0.5007
    assert br.to_dict()["total"] == pytest.approx(br.total, rel=1e-11)


def test_paper_bound_rejects_bad_constants():
    with pytest.raises(ValueError):
        paper_bound(0.5, 0.7, 0.3)
    with pytest.raises(ValueError):
        paper_bound(0.7, 0.5, 0.0)


def test_degenerate_constants():
    br = paper_bound(1.0, 1.0, 1.0)
    assert br.total == 0.0
    assert paper_bound(0.9, 0.9, 0.9).total < paper_bound().total


def test_grid_search_does_not_lose_to_its_grid():
    grid = np.linspace(0.3, 0.75, 4)
    c1, c2, c3, total = grid_search_constants(grid, grid, grid)
    assert total == pytest.approx(paper_bound(c1, c2, c3).total)
    assert total >= paper_bound(grid[-1], grid[1], grid[0]).total


def test_iid_table_provider_reproduces_closed_form():
    sch = ThresholdSchedule.default()
    table = TableBeatProbs([[float(p_value(i + 1, j + 1)) for j in range(4)] for i in range(4)])
    assert schedule_success(sch, table).total == pytest.approx(schedule_success(sch).total, abs=1e-9)


def test_pair_at_the_top_fixes_its_beat_probabilities():
    # a pair of the two largest values puts exactly one of them face-down
    paired = InstanceBeatProbs(PairStructure(2, frozenset({(1, 2)})), degree=40)
    assert paired.coefficients(1)[0] == 1.0  # X^1 > Y^2 surely
    assert paired.coefficients(0)[1] == 0.0  # X^2 > Y^1 never
    assert IID.coefficients(1)[0] == 0.75 and IID.coefficients(0)[1] == 0.25


@pytest.mark.parametrize("j", [0, 1, 2, 5, 10, 30])
def test_threshold_integral_matches_closed_form(j):
    for c in (0.01, 0.1, 0.3, 0.6):
        c = min(c, 0.9 / (j + 1))
        assert threshold_integral(c, j) == pytest.approx(threshold_integral_closed_form(c, j), rel=1e-10)


def test_threshold_roots():
    assert solve_optimal_threshold(0) == pytest.approx(1 - math.exp(-1), abs=1e-9)
    roots = [solve_optimal_threshold(j) for j in range(31)]
    assert all(a > b for a, b in zip(roots, roots[1:]))
    for j, r in enumerate(roots):
        assert threshold_integral_closed_form(r, j) == pytest.approx(1.0, abs=1e-8)
    c = optimal_block_thresholds(3)
    assert c[0] == 1.0
    assert c[1] == pytest.approx(0.715598, abs=1e-6)
    assert c[2] == pytest.approx(0.496376, abs=1e-6)


def test_gamma_value_and_convergence():
    g = gamma(60)
    assert g.value == pytest.approx(0.5024097766, abs=1e-8)
    assert abs(gamma(30).value - g.value) < 1e-6
    assert g.tail_bound == pytest.approx(g.thresholds[61])


def test_truncated_gamma_grows_to_gamma():
    values = [truncated_gamma(k) for k in (0, 2, 5, 10, 20)]
    assert all(a <= b for a, b in zip(values, values[1:]))
    assert truncated_gamma(0) == pytest.approx(math.log(2) / 2, abs=1e-9)
    assert gamma(60).value - values[-1] < 1e-5
