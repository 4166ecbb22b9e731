import dataclasses
import itertools
import multiprocessing
import re
import time

import numpy as np
import pytest

from hlctdp.evaluation.validation import validate
from hlctdp.milp.formulations import BuildOptions, DecodeError, Formulation, build, encode_solution
from hlctdp.milp.mps import format_solution
from hlctdp.solving.external import solve_via_export
from hlctdp.solving.oracle import best_for_config, brute_force
from hlctdp.solving.preprocess import preprocess
from hlctdp.solving.solution import SolveStatus
from hlctdp.solving import solver
from hlctdp.solving.solver import (SolverConfig, assignment_bound, candidate_options, completion_bound, hub_order,
                                   lower_bound_greedy, relative_gap, solve_exact, warm_start)

from conftest import EXAMPLE1_OPTIMUM, tiny_instance, tiny_suite

EXACT = SolverConfig(gap_tol=0.0)


def test_example1(example1, example1_optimal):
    sol = solve_exact(example1, cfg=EXACT)
    assert sol.objective == pytest.approx(EXAMPLE1_OPTIMUM)
    assert sol.same_decisions(example1_optimal)
    assert sol.status == SolveStatus.OPTIMAL
    assert sol.gap == 0.0 and sol.bound == pytest.approx(EXAMPLE1_OPTIMUM)
    assert validate(example1, sol).ok


def test_example1_with_preprocessing(example1):
    mask, _ = preprocess(example1)
    assert solve_exact(example1, mask, EXACT).objective == pytest.approx(EXAMPLE1_OPTIMUM)


def test_unprofitable_instance_is_empty():
    inst = tiny_instance(3, n=4, L=2, R=2)
    inst = dataclasses.replace(inst, q=inst.q * 1e-3)
    sol = solve_exact(inst, cfg=EXACT)
    assert sol.status == SolveStatus.EMPTY
    assert sol.objective == 0.0 and not sol.hub_levels and not sol.served


@pytest.mark.slow
@pytest.mark.parametrize("inst", tiny_suite(30), ids=lambda inst: inst.name)
def test_matches_oracle(inst):
    sol = solve_exact(inst, cfg=EXACT)
    assert validate(inst, sol).ok
    assert sol.objective == pytest.approx(brute_force(inst).objective, abs=1e-6)


@pytest.mark.parametrize("inst", tiny_suite(8, seed=300), ids=lambda inst: inst.name)
def test_preprocessing_keeps_the_optimum(inst):
    mask, _ = preprocess(inst)
    assert solve_exact(inst, mask, EXACT).objective == pytest.approx(brute_force(inst).objective, abs=1e-6)


def _completions(inst, decided):
    free = [k for k in inst.K if k not in decided]
    for choice in itertools.product(range(-1, inst.L), repeat=len(free)):
        config = {k: l for k, l in decided.items() if l is not None}
        config.update({k: l for k, l in zip(free, choice) if l >= 0})
        yield config


@pytest.mark.parametrize("seed", range(6))
def test_completion_bound_is_optimistic(seed):
    inst = tiny_instance(400 + seed, n=4, L=2, R=1 + seed % 2)
    rng = np.random.Generator(np.random.PCG64(seed))
    for _ in range(5):
        hubs = rng.choice(inst.n, size=2, replace=False)
        decided = {int(k): (None if rng.random() < 0.3 else int(rng.integers(inst.L))) for k in hubs}
        bound = completion_bound(inst, decided)
        for config in _completions(inst, decided):
            best = best_for_config(inst, config)
            if best is not None:
                assert best.objective <= bound + 1e-9


@pytest.mark.parametrize("inst", tiny_suite(6, seed=500), ids=lambda inst: inst.name)
def test_greedy_is_a_feasible_lower_bound(inst):
    greedy = lower_bound_greedy(inst, {k: inst.L - 1 for k in inst.K})
    assert validate(inst, greedy).ok
    assert greedy.objective <= brute_force(inst).objective + 1e-9
    start = warm_start(inst, candidate_options(inst))
    assert start.objective >= max(greedy.objective, 0.0) - 1e-9


def test_hub_order_prefers_large_capacity():
    inst = tiny_instance(9, n=5, L=2, R=1)
    order = hub_order(inst)
    totals = inst.W.sum(axis=1)
    assert sorted(order) == list(inst.K)
    assert all(totals[a] >= totals[b] for a, b in zip(order, order[1:]))


def test_deterministic_and_independent_of_workers():
    inst = tiny_instance(21, n=5, L=2, R=1)
    first = solve_exact(inst, cfg=EXACT)
    again = solve_exact(inst, cfg=EXACT)
    parallel = solve_exact(inst, cfg=dataclasses.replace(EXACT, workers=2))
    assert first.same_decisions(again) and first.same_decisions(parallel)
    assert first.nodes == again.nodes


def test_timeout_returns_feasible_incumbent():
    inst = tiny_instance(22, n=5, L=2, R=2)
    sol = solve_exact(inst, cfg=SolverConfig(time_limit=1e-9))
    assert sol.status == SolveStatus.FEASIBLE
    assert validate(inst, sol).ok
    assert sol.bound >= sol.objective


def test_hub_cap_is_honoured():
    inst = tiny_instance(23, n=5, L=1, R=1)
    sol = solve_exact(inst, cfg=SolverConfig(max_hubs=1))
    assert len(sol.hub_levels) <= 1
    assert sol.status == SolveStatus.FEASIBLE
    assert validate(inst, sol).ok


def test_log_rows_are_recorded():
    inst = tiny_instance(24, n=5, L=2, R=1)
    sol = solve_exact(inst, cfg=SolverConfig(log_every=1))
    assert len(sol.log) > 0
    assert all(row.incumbent <= row.bound + 1e-9 for row in sol.log)


@pytest.mark.parametrize("time_limit", [0.0, -1.0])
def test_rejects_nonpositive_time_limit(example1, time_limit):
    with pytest.raises(ValueError):
        solve_exact(example1, cfg=SolverConfig(time_limit=time_limit))


def test_rejects_negative_gap():
    with pytest.raises(ValueError):
        SolverConfig(gap_tol=-0.1)


def test_invalid_instance_is_reported_infeasible(caplog):
    inst = tiny_instance(3, n=3, L=1, R=1)
    inst = dataclasses.replace(inst, w=inst.w * 100)
    sol = solve_exact(inst)
    assert sol.status == SolveStatus.INFEASIBLE_INPUT
    assert not sol.hub_levels and not sol.served and sol.objective == 0.0
    assert "violates" in caplog.text


def test_relative_gap():
    assert relative_gap(110.0, 100.0) == pytest.approx(0.1)
    assert relative_gap(90.0, 100.0) == 0.0


@pytest.mark.parametrize("which", list(Formulation))
def test_external_solution_round_trip(example1, example1_optimal, which):
    model, index = build(example1, which)
    text = format_solution(model, encode_solution(example1, example1_optimal, which, index))
    sol = solve_via_export(example1, which, BuildOptions(), text)
    assert sol.same_decisions(example1_optimal)
    assert sol.objective == pytest.approx(EXAMPLE1_OPTIMUM)


def test_external_empty_solution(example1):
    sol = solve_via_export(example1, Formulation.F2, BuildOptions(), "")
    assert sol.status == SolveStatus.EMPTY and sol.objective == 0.0


def test_external_objective_mismatch(example1, example1_optimal):
    model, index = build(example1, Formulation.F2)
    text = format_solution(model, encode_solution(example1, example1_optimal, Formulation.F2, index))
    text = re.sub(r"# Objective value = \S+", "# Objective value = 999.0", text)
    with pytest.raises(DecodeError, match="does not match"):
        solve_via_export(example1, Formulation.F2, BuildOptions(), text)


def test_external_infeasible_solution(example1, example1_relaxed):
    relaxed = BuildOptions(include_consistency=False)
    model, index = build(example1, Formulation.F2, relaxed)
    text = format_solution(model, encode_solution(example1, example1_relaxed, Formulation.F2, index))
    assert solve_via_export(example1, Formulation.F2, relaxed, text).objective == pytest.approx(600.0)
    with pytest.raises(DecodeError, match="infeasible"):
        solve_via_export(example1, Formulation.F2, BuildOptions(), text)


@pytest.mark.parametrize("inst", tiny_suite(8, seed=700), ids=lambda inst: inst.name)
def test_loose_gap_reports_a_valid_bound(inst):
    optimum = brute_force(inst).objective
    sol = solve_exact(inst, cfg=SolverConfig(gap_tol=0.5))
    assert sol.bound >= optimum - 1e-6
    assert sol.objective >= optimum - 0.5 * abs(sol.objective) - 1e-6
    assert sol.gap == pytest.approx(relative_gap(sol.bound, sol.objective))
    assert sol.gap <= 0.5 + 1e-9


def _first_subtree(inst, cfg):
    options = candidate_options(inst)
    start = warm_start(inst, options)
    levels = [solver.UNDECIDED] * inst.n
    root = assignment_bound(inst, options, levels)
    levels[hub_order(inst)[0]] = solver.CLOSED
    return start, root, (inst, options, cfg, start, time.time() + 60.0, root, levels, 0.0, 0)


def test_subtree_publishes_its_incumbent():
    inst = tiny_instance(21, n=5, L=2, R=1)
    start, _, task = _first_subtree(inst, EXACT)
    cell = multiprocessing.Value("d", start.objective)
    solver._share_incumbent(cell)
    try:
        result = solver._search_subtree(task)
    finally:
        solver._share_incumbent(None)
    assert cell.value == pytest.approx(max(start.objective, result.best.objective))


def test_subtree_stops_at_unbeatable_shared_incumbent():
    inst = tiny_instance(21, n=5, L=2, R=1)
    start, root, task = _first_subtree(inst, EXACT)
    solver._share_incumbent(multiprocessing.Value("d", root + 1.0))
    try:
        result = solver._search_subtree(task)
    finally:
        solver._share_incumbent(None)
    assert result.nodes == 1
    assert result.best is start


def test_shared_incumbent_is_released_after_solving():
    inst = tiny_instance(21, n=5, L=2, R=1)
    solve_exact(inst, cfg=EXACT)
    assert solver._shared_best is None
