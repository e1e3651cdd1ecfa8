import json
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from partialsearch import schedule as sch

mp.mp.dps = 50

TH6 = sch.theta_for_uniform_stage(6)
TH9 = sch.theta_for_uniform_stage(9)


# extended-precision reference path

def mp_gammas(thetas, iterates):
    g = [mp.mpf(thetas[0])]
    for th, t in zip(thetas[1:], iterates):
        g.append(mp.asin(abs(mp.sin(2 * mp.mpf(th)) * mp.sin(2 * t * g[-1]))) / 2)
    return g


def mp_stage_success(theta, gamma, t):
    theta, gamma = mp.mpf(theta), mp.mpf(gamma)
    return (1 - mp.cos(2 * theta) / mp.cos(2 * gamma) * mp.cos(2 * (2 * t + 1) * gamma)) / 2


angles = st.floats(0.01, math.pi / 4 - 0.01)


# -- angles ---------------------------------------------------------------

def test_uniform_theta_values():
    assert sch.theta_for_uniform_stage(2) == pytest.approx(math.pi / 6, abs=1e-15)
    assert abs(TH6 - float(mp.asin(mp.mpf(1) / 8))) < 1e-15
    assert TH6 == pytest.approx(0.125328, abs=1e-6)
    assert TH9 == pytest.approx(0.0442086, abs=1e-6)
    with pytest.raises(sch.ScheduleError):
        sch.theta_for_uniform_stage(0)


def test_overlap_angle():
    psi = np.array([0.6, 0.8j])
    assert sch.overlap_angle(psi, 1) == pytest.approx(math.asin(0.8))


def test_gamma_examples():
    assert sch.gamma_schedule([0.3], []) == [0.3]
    g = sch.gamma_schedule([TH6] * 3, [1, 1])
    assert g[-1] == pytest.approx(0.0076303, abs=1e-6)
    ref = mp_gammas([TH6] * 3, [1, 1])
    assert all(abs(a - float(b)) < 1e-15 for a, b in zip(g, ref))
    g2 = sch.gamma_schedule([TH9] * 2, [1])
    assert g2[-1] == pytest.approx(0.0038988, abs=1e-6)


def test_gamma_errors():
    with pytest.raises(sch.ScheduleError):
        sch.gamma_schedule([0.1, 0.1], [])
    with pytest.raises(sch.ScheduleError):
        sch.gamma_schedule([0.1, 0.1], [0])
    with pytest.raises(sch.ScheduleError):
        sch.gamma_schedule([], [])


@given(st.lists(angles, min_size=2, max_size=5), st.data())
@settings(max_examples=60, deadline=None)
def test_gamma_recursion_invariants(thetas, data):
    its = data.draw(st.lists(st.integers(1, 40), min_size=len(thetas) - 1, max_size=len(thetas) - 1))
    g = sch.gamma_schedule(thetas, its)
    assert g[0] == thetas[0]
    for i in range(1, len(g)):
        assert 0 <= g[i] <= math.pi / 4 + 1e-15
        lhs = math.sin(2 * g[i])
        rhs = abs(math.sin(2 * thetas[i]) * math.sin(2 * its[i - 1] * g[i - 1]))
        assert abs(lhs - rhs) < 1e-12
    ref = mp_gammas(thetas, its)
    assert max(abs(a - float(b)) for a, b in zip(g, ref)) < 1e-9


@given(st.lists(st.floats(0.001, 0.6), min_size=1, max_size=6))
@settings(max_examples=60, deadline=None)
def test_unit_iterates_give_product_of_sines(thetas):
    g = sch.gamma_schedule(thetas, [1] * (len(thetas) - 1))
    prod = math.prod(math.sin(2 * t) for t in thetas)
    assert abs(math.sin(2 * g[-1]) - prod) < 1e-12
    # the gamma lower bound 2^{m-1} theta prod cos(theta_i)
    theta = math.asin(math.prod(math.sin(t) for t in thetas))
    bound = 2 ** (len(thetas) - 1) * theta * math.prod(math.cos(t) for t in thetas)
    assert g[-1] >= bound - 1e-12


@given(st.lists(st.floats(0.01, 0.5), min_size=2, max_size=4), st.data())
@settings(max_examples=40, deadline=None)
def test_doubling_an_intermediate_at_most_doubles_gamma(thetas, data):
    its = [1] * (len(thetas) - 1)
    j = data.draw(st.integers(0, len(its) - 1))
    base = sch.gamma_schedule(thetas, its)[-1]
    its[j] = 2
    doubled = sch.gamma_schedule(thetas, its)[-1]
    assert doubled <= 2 * base + 1e-12


# -- iterates ---------------------------------------------------------------

def test_optimal_final_examples():
    assert sch.optimal_final_iterations(sch.gamma_schedule([TH6] * 3, [1, 1])[-1]) == 102
    assert sch.optimal_final_iterations(sch.gamma_schedule([TH9] * 2, [1])[-1]) == 201
    assert sch.optimal_final_iterations(TH6) == 6
    assert sch.optimal_final_iterations(math.pi / 4) == 1
    with pytest.raises(sch.ScheduleError):
        sch.optimal_final_iterations(0.0)


def test_rounding_ties_go_away_from_zero():
    assert sch.round_half_away(2.5) == 3
    assert sch.round_half_away(-2.5) == -3
    assert sch.round_half_away(2.4999) == 2
    # gamma with pi/(4 gamma) - 1/2 exactly 3.5
    gamma = math.pi / 16
    assert sch.is_half_integer(math.pi / (4 * gamma) - 0.5)
    assert sch.optimal_final_iterations(gamma) == 4


def test_tie_is_flagged_in_notes():
    gamma = math.pi / 16
    theta = gamma  # single stage
    plan = sch.multi_round_plan([theta])
    assert plan.rounds[0].rounding_tie
    assert any("half-integer" in n for n in plan.notes)


def test_boosted_penultimate_examples():
    assert sch.boosted_penultimate(math.pi / 4) == 1
    assert sch.boosted_penultimate(0.0307811) == 26
    assert sch.boosted_penultimate(0.0038988) == 201


# -- success ---------------------------------------------------------------

def test_stage_success_examples():
    g2 = sch.gamma_schedule([TH9] * 2, [1])[-1]
    assert sch.stage_success(TH9, g2, 201) == pytest.approx(0.9980, abs=1e-4)
    assert sch.stage_success(0.0442086, 0.0038988, 201) == pytest.approx(0.9980, abs=1e-4)
    assert sch.stage_success(0.3, 0.1, 0) == pytest.approx(math.sin(0.3) ** 2, abs=1e-14)
    assert sch.stage_success(0.2, 0.2, 3) == pytest.approx(math.sin(7 * 0.2) ** 2, abs=1e-15)


def test_stage_success_degenerate_gamma():
    with pytest.raises(sch.ScheduleError):
        sch.stage_success(0.3, math.pi / 4, 2)
    with pytest.raises(sch.ScheduleError):
        sch.stage_success(0.3, 0.1, -1)


@given(angles, st.floats(0.001, 0.7), st.integers(0, 100_000))
@settings(max_examples=80, deadline=None)
def test_stage_success_matches_extended_precision(theta, gamma, t):
    assume(abs(math.cos(2 * gamma)) > 1e-3 and abs(gamma - theta) > 1e-9)
    got = sch.stage_success(theta, gamma, t)
    ref = mp_stage_success(theta, gamma, t)
    if 0 <= ref <= 1:
        assert abs(got - float(ref)) < 1e-9
    else:
        assert 0.0 <= got <= 1.0


def test_large_iterate_angle_reduction():
    # 2(2t+1)gamma runs to ~1e6 radians; the reduced evaluation must not drift
    gamma = 1e-3 * math.sqrt(2)
    t = 10 ** 8 + 7
    ref = mp_stage_success(0.01, gamma, t)
    assert abs(sch.stage_success(0.01, gamma, t) - float(ref)) < 1e-6


@given(st.floats(0.001, 0.7), st.integers(0, 500))
@settings(max_examples=60, deadline=None)
def test_single_stage_is_grover(theta, t):
    assert abs(sch.stage_success(theta, theta, t) - math.sin((2 * t + 1) * theta) ** 2) < 1e-12


def test_boost_monotone_ceiling():
    thetas = [TH6] * 2
    ceilings = []
    g1 = sch.gamma_schedule(thetas[:1], [])[0]
    for t_prev in range(1, sch.boosted_penultimate(g1) + 1):
        g = sch.gamma_schedule(thetas, [t_prev])[-1]
        ceiling = 0.5 * (1 + math.cos(2 * thetas[-1]) / math.cos(2 * g))
        ceilings.append(ceiling)
    assert all(b >= a - 1e-12 for a, b in zip(ceilings, ceilings[1:]))


# -- plans ---------------------------------------------------------------

def test_plan_six_six_six():
    plan = sch.multi_round_plan(sch.uniform_thetas([6, 6, 6]), n_qubits=18)
    assert plan.final_iterates == (102, 25, 6)
    assert plan.round_oracle_calls == (408, 50, 6)
    assert plan.overall_success == pytest.approx(0.9666, abs=5e-4)
    assert plan.prefix_success[1] == pytest.approx(0.9699, abs=5e-4)
    assert plan.prefix_success[0] == pytest.approx(0.9844, abs=5e-4)
    assert plan.overall_success == pytest.approx(math.prod(r.success for r in plan.rounds), abs=1e-12)


def test_plan_nine_nine():
    plan = sch.multi_round_plan(sch.uniform_thetas([9, 9]), n_qubits=18)
    assert plan.final_iterates == (201, 17)
    assert plan.round_oracle_calls == (402, 17)
    assert plan.overall_success == pytest.approx(0.9977, abs=5e-4)


def test_plan_boost_policy():
    thetas = sch.uniform_thetas([6, 6, 6])
    plan = sch.multi_round_plan(thetas, sch.BOOST_AFTER_FIRST, n_qubits=18)
    assert plan.rounds[0].iterates == [1, 1, 102]
    assert plan.rounds[1].iterates[0] == sch.boosted_penultimate(TH6)
    assert plan.overall_success > sch.multi_round_plan(thetas, n_qubits=18).overall_success
    with pytest.raises(sch.ScheduleError):
        sch.multi_round_plan(thetas, "sometimes")


def test_plan_overrides():
    thetas = sch.uniform_thetas([2, 2])
    plan = sch.multi_round_plan(thetas, iterate_overrides=[[1, 2], [1]])
    assert plan.rounds[0].iterates == [1, 2]
    with pytest.raises(sch.ScheduleError):
        sch.multi_round_plan(thetas, iterate_overrides=[[1, 2]])


def test_plan_serializes_with_stable_keys():
    d = sch.multi_round_plan(sch.uniform_thetas([3, 3])).to_dict()
    for key in ("thetas", "gammas", "iterates", "round_success", "overall_success",
                "oracle_calls", "grover_baseline", "overhead"):
        assert key in d
    json.dumps(d)


@given(st.lists(st.integers(1, 12), min_size=1, max_size=4))
@settings(max_examples=40, deadline=None)
def test_plan_invariants(sizes):
    plan = sch.multi_round_plan(sch.uniform_thetas(sizes), n_qubits=sum(sizes))
    for r in plan.rounds:
        assert 0.0 <= r.success <= 1.0
        assert r.oracle_calls == 2 ** (len(r.iterates) - 1) * math.prod(r.iterates)
    assert all(b <= a + 1e-15 for a, b in zip(plan.prefix_success, plan.prefix_success[1:]))


def test_single_stage_plan_is_textbook_grover():
    for n in (2, 4, 7, 10):
        plan = sch.multi_round_plan(sch.uniform_thetas([n]), n_qubits=n)
        theta = math.asin(2 ** (-n / 2))
        t = sch.round_half_away(math.pi / (4 * theta) - 0.5)
        assert plan.final_iterates == (max(1, t),)
        assert abs(plan.overall_success - math.sin((2 * t + 1) * theta) ** 2) < 1e-12
    assert sch.multi_round_plan(sch.uniform_thetas([4])).final_iterates == (3,)
    assert sch.multi_round_plan(sch.uniform_thetas([4])).overall_success == pytest.approx(0.9613, abs=1e-4)


# -- Grover baseline ---------------------------------------------------------------

def linear_scan(n, p):
    theta = math.asin(2 ** (-n / 2))
    t = 0
    while math.sin((2 * t + 1) * theta) ** 2 < p - 1e-12:
        t += 1
    return t


def test_grover_baseline_examples():
    b = sch.grover_baseline(18, 0.9977)
    assert abs(b.iterations - 390) <= 2 and b.reached
    assert 1.07 <= 419 / b.iterations <= 1.09
    assert abs(sch.grover_baseline(18, 0.9666).iterations - 355) <= 1
    assert sch.grover_baseline(2, 1.0).iterations == 1


@given(st.integers(2, 16), st.floats(0.01, 0.99))
@settings(max_examples=60, deadline=None)
def test_grover_baseline_matches_scan(n, p):
    b = sch.grover_baseline(n, p)
    if b.reached:
        assert b.iterations == linear_scan(n, p)


def test_grover_baseline_unreachable_flagged():
    b = sch.grover_baseline(3, 0.999999)
    assert not b.reached
    with pytest.raises(sch.ScheduleError):
        sch.grover_baseline(3, 0.0)


# -- overhead bounds ---------------------------------------------------------------

def test_overhead_bound_values():
    assert sch.overhead_bounds(4, 20).geometric_factor == pytest.approx(2.0)
    assert sch.overhead_bounds(3, 18).geometric_factor == pytest.approx(3.41, abs=5e-3)
    six = sch.overhead_bounds(6, 18)
    # the quoted "below 1.15" holds for the exact common ratio 2^{-s/2}/cos(theta_s)
    assert six.tight_geometric_factor < 1.15
    assert six.per_stage_bound == pytest.approx((1 - 2 ** -6) ** (-18 / 12))
    assert six.total_bound == pytest.approx(six.per_stage_bound * six.geometric_factor)
    with pytest.raises(sch.ScheduleError):
        sch.overhead_bounds(2, 10)


def test_per_stage_bound_exponential_sandwich():
    # x <= -log(1 - x) <= x / (1 - x): exp(n / (s 2^{s+1})) is a lower bound, and
    # the upper bound needs the extra 1 / (1 - 2^{-s}) in the exponent
    for s in range(3, 12):
        for n in (s * 2, s * 5, 60):
            b = sch.overhead_bounds(s, n)
            lower = math.exp(n / (s * 2 ** (s + 1)))
            upper = math.exp(n / (s * 2 ** (s + 1) * (1 - 2.0 ** -s)))
            assert lower - 1e-12 <= b.per_stage_bound <= upper + 1e-12


def test_near_equal_partition():
    assert sch.near_equal_partition(20, 3) == [7, 7, 6]
    assert sch.near_equal_partition(18, 2) == [9, 9]
    assert sum(sch.near_equal_partition(47, 4)) == 47
    with pytest.raises(sch.ScheduleError):
        sch.near_equal_partition(3, 4)
