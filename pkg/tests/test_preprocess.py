import dataclasses
import itertools
import logging

import numpy as np
import pytest

from hlctdp.evaluation.validation import validate
from hlctdp.instances.instance import RouteKey, make_instance
from hlctdp.solving.oracle import brute_force, configurations, enumerate_candidates
from hlctdp.solving.preprocess import (FREE, PREPROCESS_COLUMNS, RULES, FixMask, apply_assumptions, apply_c1,
                                       apply_c2, apply_c3, c1_applicable, c1a_triples, c1b_routes, preprocess,
                                       rule_code)
from hlctdp.solving.solver import SolverConfig, solve_exact

from conftest import tiny_instance, tiny_suite


def _two_hubs(demand):
    return make_instance(2, 0.5, 0.5, [[0, 1], [1, 0]], [[0, 1], [1, 0]], [(0, 1)], [[demand]], [[5.0]], [[10.0]],
                         [[10, 12], [10, 20]], [[1.0, 2.0], [1.0, 2.0]], [[1.0, 2.0], [1.0, 2.0]])


@pytest.mark.parametrize("inst", tiny_suite(6, seed=600), ids=lambda inst: inst.name)
def test_each_variable_is_tagged_with_its_first_rule(inst):
    mask, _ = preprocess(inst)
    c1, c2, c3 = apply_c1(inst), apply_c2(inst), apply_c3(inst)
    _, assumptions = apply_assumptions(inst)
    earlier = {"A1": set(), "A2": set(), "A3": set(), "C1a": assumptions, "C1b": assumptions,
               "C2": assumptions | c1, "C3": assumptions | c1 | c2}
    by_rule = {"C1a": c1, "C1b": c1, "C2": c2, "C3": c3}
    for key in mask.fixed_routes:
        rule = mask.attribution(key)
        assert key in by_rule.get(rule, assumptions)
        assert key not in earlier[rule]
    assert mask.fixed_routes == assumptions | c1 | c2 | c3


def test_c1a_grows_with_alpha():
    base = tiny_instance(31, n=5, L=1, R=1)
    previous = None
    for alpha in (0.2, 0.5, 0.8):
        triples = c1a_triples(dataclasses.replace(base, alpha=alpha, gamma=alpha))
        if previous is not None:
            assert np.all(triples[previous])
        previous = triples


def test_c1b_keeps_one_direction_of_each_pair():
    inst = tiny_instance(32, n=5, L=1, R=1)
    mask, _ = preprocess(inst)
    fixed = mask.routes_fixed[..., 0]
    for c in range(inst.num_commodities):
        for k in inst.K:
            for m in range(k + 1, inst.n):
                assert fixed[c, k, m] or fixed[c, m, k]


def test_report_percentages_add_up():
    inst = tiny_instance(33, n=5, L=2, R=2)
    mask, report = preprocess(inst)
    total = mask.route_rule.size
    assert report.pct_eliminated == pytest.approx(100.0 * mask.num_fixed_routes / total)
    assert report.pct_c1 + report.pct_c2 + report.pct_c3 + report.pct_assumptions == \
           pytest.approx(report.pct_eliminated)
    assert report.share_c1 + report.share_c2 + report.share_c3 == pytest.approx(100.0)
    assert sum(mask.rule_counts().values()) == mask.num_fixed_routes
    row = report.to_row(inst)
    assert set(row) | {"instance"} == set(PREPROCESS_COLUMNS)


def test_too_slow_routes_are_never_feasible():
    inst = tiny_instance(34, n=3, L=2, R=2, n_commodities=2)
    mask, _ = preprocess(inst)
    slow = {(key.i, key.j, key.k, key.m, key.r) for key in mask.fixed_routes if mask.attribution(key) == "C3"}
    for config in configurations(inst):
        for candidate in enumerate_candidates(inst, config):
            uses_slow = any((i, j, s.k, s.m, s.level) in slow for (i, j), s in candidate.served.items())
            if uses_slow:
                assert "timeLimit" in validate(inst, candidate).rules()


def test_demand_above_one_hub_fixes_its_routes():
    mask, _ = preprocess(_two_hubs(15.0))
    assert mask.route_rule[0, :, :, 0].tolist() == [[rule_code("A2")] * 2, [rule_code("A2"), 0]]
    assert not mask.fixed_beta


def test_demand_above_every_hub_fixes_the_commodity():
    mask, report = preprocess(_two_hubs(25.0))
    assert mask.fixed_beta == {(0, 1, 0)}
    assert mask.beta_rule[0, 0] == rule_code("A3")
    assert mask.rule_counts()["A2"] == 4
    assert report.pct_assumptions == 100.0


def test_empty_commodity_set():
    inst = make_instance(2, 0.5, 0.5, [[0, 1], [1, 0]], [[0, 1], [1, 0]], [], [], [], [],
                         [[10], [10]], [[1], [1]], [[1], [1]])
    mask, report = preprocess(inst)
    assert mask.num_fixed_routes == 0
    assert report.pct_eliminated == 0.0


def test_empty_mask_fixes_nothing(example1):
    mask = FixMask.empty(example1)
    assert mask.num_fixed_routes == 0 and not mask.fixed_beta
    assert mask.rule_counts() == dict.fromkeys(RULES, 0)


def _uniform(n):
    unit = np.ones((n, n)) - np.eye(n)
    pairs = list(itertools.permutations(range(n), 2))
    return make_instance(n, 0.5, 0.5, unit, unit.copy(), pairs, [[2.0]] * len(pairs), [[9.0]] * len(pairs),
                         [[50.0]] * len(pairs), [[100.0]] * n, [[1.0]] * n, [[1.0]] * n)


def test_c1b_ties_fix_the_reverse_orientation():
    inst = _uniform(4)
    fixed = c1b_routes(inst)
    for c, (i, j) in enumerate(inst.commodities):
        for k, m in itertools.combinations(inst.K, 2):
            assert fixed[c, k, m] != fixed[c, m, k]
        # the two other nodes cost the same in both orientations
        k, m = sorted(set(inst.K) - {i, j})
        assert fixed[c, m, k] and not fixed[c, k, m]


def test_zero_revenue_fixes_every_route():
    unit = [[0, 1, 1], [1, 0, 1], [1, 1, 0]]
    inst = make_instance(3, 0.5, 0.5, unit, unit, [(0, 1), (1, 2)], [[2, 2], [2, 2]], [[0, 0], [9, 5]],
                         [[10, 20], [10, 20]], [[10], [10], [10]], [[1], [1], [1]], [[1], [1], [1]], R=2)
    every_route = {RouteKey(0, 1, k, m, r) for k in inst.K for m in inst.K for r in range(inst.R)}
    assert every_route <= apply_c2(inst)
    mask, _ = preprocess(inst)
    assert mask.routes_fixed[0].all()
    assert not mask.routes_fixed[1].all()


def test_time_limit_reached_exactly_stays_free():
    line = [[0, 1], [1, 0]]
    inst = make_instance(2, 0.5, 0.5, line, line, [(0, 1)], [[2]], [[5.0]], [[2.0]],
                         [[10], [10]], [[1], [1]], [[1.0], [1.0]])
    slow = apply_c3(inst)
    assert RouteKey(0, 1, 0, 0, 0) not in slow and RouteKey(0, 1, 1, 1, 0) not in slow
    mask, _ = preprocess(inst)
    assert mask.route_rule[0, 0, 0, 0] == FREE and mask.route_rule[0, 1, 1, 0] == FREE
    assert mask.attribution(RouteKey(0, 1, 0, 1, 0)) == "C3"
    tighter = dataclasses.replace(inst, H=np.array([[1.999]]))
    assert RouteKey(0, 1, 0, 0, 0) in apply_c3(tighter)


def test_only_dominance_fixes_with_generous_revenues_and_limits():
    inst = tiny_instance(35, n=4, L=1, R=1)
    inst = dataclasses.replace(inst, q=np.full_like(inst.q, 1e6), H=np.full_like(inst.H, 1e6))
    _, report = preprocess(inst)
    assert report.pct_c2 == report.pct_c3 == report.pct_assumptions == 0.0
    assert report.pct_eliminated == pytest.approx(report.pct_c1) and report.pct_c1 > 0
    assert report.share_c1 == pytest.approx(100.0)


def _slow_direct_arcs():
    """ Unit costs, but every route of (1,2) except the one through hubs 4 then 3 is far too slow. """
    cost = np.ones((4, 4)) - np.eye(4)
    time = cost.copy()
    for a, b in ((0, 2), (1, 3), (0, 1)):
        time[a, b] = time[b, a] = 100.0
    return make_instance(4, 0.5, 0.5, cost, time, [(0, 1)], [[100]], [[5.0]], [[10.0]],
                         [[200]] * 4, [[50.0]] * 4, [[1.0]] * 4)


def test_dominance_is_skipped_when_times_differ_from_costs(caplog):
    inst = _slow_direct_arcs()
    # applied anyway, the first rule would drop the only fast route
    assert c1a_triples(inst)[0, 3, 2]
    assert not c1_applicable(inst)
    with caplog.at_level(logging.WARNING, logger="hlctdp.solving.preprocess"):
        mask, report = preprocess(inst)
    assert "C1 is skipped" in caplog.text
    assert report.pct_c1 == 0.0
    assert not mask.is_route_fixed(0, 3, 2, 0)
    sol = solve_exact(inst, mask, SolverConfig(gap_tol=0.0))
    assert sol.objective == pytest.approx(150.0)
    assert brute_force(inst).objective == pytest.approx(150.0)


def test_decreasing_setup_costs_disable_dominance_and_profit_rules(example1):
    inst = dataclasses.replace(example1, G=example1.G[:, ::-1].copy())
    assert c1_applicable(example1) and not c1_applicable(inst)
    _, report = preprocess(inst)
    assert report.pct_c1 == report.pct_c2 == 0.0
    exact = solve_exact(inst, preprocess(inst)[0], SolverConfig(gap_tol=0.0))
    assert exact.objective == pytest.approx(brute_force(inst).objective)
