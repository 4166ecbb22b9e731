import dataclasses

import numpy as np

from hlctdp.evaluation.validation import hub_inflows, validate
from hlctdp.solving.solution import (Service, SolveStatus, decode_solution_dict, empty_solution, encode_solution_dict,
                                     make_solution)


def test_optimal_solution_is_valid(example1, example1_optimal):
    report = validate(example1, example1_optimal)
    assert report.ok and report.violations == ()
    assert report.to_dict() == {"ok": True, "violations": []}


def test_consistency_rule(example1, example1_relaxed):
    assert validate(example1, example1_relaxed, check_consistency=False).ok
    report = validate(example1, example1_relaxed)
    assert report.rules() == ["consistency"]
    assert "origin 2" in report.violations[0].detail


def test_route_through_closed_hub(example1):
    sol = make_solution(example1, {1: 0}, {(0, 1): Service(0, 1, 2)})
    assert validate(example1, sol).rules() == ["openHubRouting"]


def test_capacity_lower_bound_is_strict(example1):
    # hub 2 at level 2 must receive more than 100
    sol = make_solution(example1, {1: 1}, {(0, 1): Service(0, 1, 1)})
    assert validate(example1, sol).rules() == ["capacityInterval"]


def test_capacity_upper_bound(example1):
    sol = make_solution(example1, {1: 0}, {(0, 1): Service(0, 1, 1), (1, 3): Service(0, 1, 1)})
    report = validate(example1, sol)
    assert report.rules() == ["capacityInterval"]
    assert "receives 200" in report.violations[0].detail


def test_time_limit(example1, example1_optimal):
    tight = dataclasses.replace(example1, H=np.full_like(example1.H, 2.0))
    report = validate(tight, example1_optimal)
    assert set(report.rules()) == {"timeLimit"}
    assert len(report.violations) == 2


def test_objective_mismatch(example1, example1_optimal):
    report = validate(example1, dataclasses.replace(example1_optimal, objective=1.0))
    assert report.rules() == ["objectiveMismatch"]


def test_unknown_commodity_and_levels(example1):
    sol = make_solution(example1, {}, {})
    sol = dataclasses.replace(sol, hub_levels={1: 5}, served={(2, 0): Service(0, 1, 1), (0, 1): Service(3, 1, 1)})
    assert sorted(validate(example1, sol).rules()) == ["oneLevelPerCommodity", "oneLevelPerCommodity",
                                                       "oneLevelPerHub"]


def test_empty_solution_is_valid(example1):
    sol = empty_solution(example1)
    assert validate(example1, sol).ok
    assert sol.status == SolveStatus.EMPTY


def test_hub_inflows_count_both_hubs(example1, example1_optimal):
    assert dict(hub_inflows(example1, example1_optimal)) == {1: 200.0, 2: 100.0}


def test_solution_record_round_trip(example1, example1_optimal):
    data = encode_solution_dict(example1_optimal)
    assert data["hubs"] == [{"hub": 2, "level": 2}, {"hub": 3, "level": 1}]
    again = decode_solution_dict(data, example1)
    assert again.same_decisions(example1_optimal) and again.objective == example1_optimal.objective
    assert decode_solution_dict(data).objective == example1_optimal.objective
