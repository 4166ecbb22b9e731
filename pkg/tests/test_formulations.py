import dataclasses
import itertools

import numpy as np
import pytest

from hlctdp.evaluation.validation import validate
from hlctdp.milp.formulations import (BuildOptions, DecodeError, Formulation, build, decode_solution, encode_solution,
                                      model_size, size_formula)
from hlctdp.solving.oracle import configurations, enumerate_candidates
from hlctdp.solving.preprocess import preprocess

from conftest import EXAMPLE1_OPTIMUM, EXAMPLE1_RELAXED_OPTIMUM, tiny_instance

SHAPES = list(itertools.product((1, 2), (1, 2)))


@pytest.mark.parametrize("which", list(Formulation))
@pytest.mark.parametrize("consistency,valid_ineq", [(True, False), (False, False), (True, True)])
def test_built_model_matches_size_formula(which, consistency, valid_ineq):
    inst = tiny_instance(11, n=4, L=2, R=2)
    model, _ = build(inst, which, BuildOptions(include_consistency=consistency, include_valid_inequality=valid_ineq))
    expected = model_size(inst, which, consistency, valid_ineq if which == Formulation.F2 else False)
    assert (model.num_binary, model.num_continuous, model.num_constraints) == tuple(expected)


def test_size_formula_for_a_large_instance():
    size = size_formula(Formulation.F2, 30, 30 * 29, 1, 1)
    assert size.binary == 783900
    assert size.continuous == 30 * 870
    f1 = size_formula(Formulation.F1, 30, 30 * 29, 1, 1)
    assert f1.binary == 870 * 900 + 3 * 870 * 30 + 30 + 870


def _check_candidates(inst, consistency):
    built = {which: build(inst, which, BuildOptions(include_consistency=consistency)) for which in Formulation}
    counts = {True: 0, False: 0}
    for config in configurations(inst):
        for candidate in enumerate_candidates(inst, config):
            ok = validate(inst, candidate, check_consistency=consistency).ok
            counts[ok] += 1
            for which, (model, index) in built.items():
                objective, violations = model.evaluate(encode_solution(inst, candidate, which, index))
                assert (not violations) == ok, (which, candidate, violations)
                if ok:
                    assert objective == pytest.approx(candidate.objective, abs=1e-7)
    return counts


@pytest.mark.parametrize("consistency", [True, False])
def test_formulations_accept_exactly_the_valid_solutions(consistency):
    totals = {True: 0, False: 0}
    for seed, (L, R) in enumerate(SHAPES * 2):
        inst = tiny_instance(100 + seed, n=3, L=L, R=R, n_commodities=2)
        for ok, count in _check_candidates(inst, consistency).items():
            totals[ok] += count
    assert totals[True] > 0 and totals[False] > 0


def test_example1_optimum_is_feasible_in_both(example1, example1_optimal):
    for which in Formulation:
        model, index = build(example1, which)
        objective, violations = model.evaluate(encode_solution(example1, example1_optimal, which, index))
        assert violations == []
        assert objective == pytest.approx(EXAMPLE1_OPTIMUM)


def test_example1_relaxed_needs_consistency_dropped(example1, example1_relaxed):
    for which in Formulation:
        model, index = build(example1, which, BuildOptions(include_consistency=False))
        objective, violations = model.evaluate(encode_solution(example1, example1_relaxed, which, index))
        assert violations == []
        assert objective == pytest.approx(EXAMPLE1_RELAXED_OPTIMUM)

        model, index = build(example1, which)
        _, violations = model.evaluate(encode_solution(example1, example1_relaxed, which, index))
        assert [v.name for v in violations] == ["cons_origin_2_4"]


def test_valid_inequality_keeps_solutions(example1, example1_optimal):
    model, index = build(example1, Formulation.F2, BuildOptions(include_valid_inequality=True))
    _, violations = model.evaluate(encode_solution(example1, example1_optimal, Formulation.F2, index))
    assert violations == []


@pytest.mark.parametrize("which", list(Formulation))
def test_decode_inverts_encode(example1, example1_optimal, which):
    model, index = build(example1, which)
    x = encode_solution(example1, example1_optimal, which, index)
    decoded = decode_solution(example1, which, index, x)
    assert decoded.same_decisions(example1_optimal)
    assert decoded.objective == pytest.approx(EXAMPLE1_OPTIMUM)


def test_decode_all_zero_is_empty(example1):
    model, index = build(example1, Formulation.F2)
    decoded = decode_solution(example1, Formulation.F2, index, np.zeros(model.num_variables))
    assert decoded.status.value == "empty" and decoded.objective == 0.0


def test_decode_rejects_two_levels_for_a_hub(example1, example1_optimal):
    model, index = build(example1, Formulation.F2)
    x = encode_solution(example1, example1_optimal, Formulation.F2, index)
    x[index.Y[1, 0]] = 1.0
    with pytest.raises(DecodeError, match="hub 2"):
        decode_solution(example1, Formulation.F2, index, x)


def test_decode_rejects_route_without_service(example1, example1_optimal):
    model, index = build(example1, Formulation.F1)
    x = encode_solution(example1, example1_optimal, Formulation.F1, index)
    x[index.beta[0]] = 0.0
    with pytest.raises(DecodeError, match="without being served"):
        decode_solution(example1, Formulation.F1, index, x)


def test_decode_rejects_service_without_route(example1, example1_optimal):
    model, index = build(example1, Formulation.F2)
    x = encode_solution(example1, example1_optimal, Formulation.F2, index)
    x[index.x[0]] = 0.0
    with pytest.raises(DecodeError, match="without a route"):
        decode_solution(example1, Formulation.F2, index, x)


def test_encode_rejects_closed_hub(example1, example1_optimal):
    _, index = build(example1, Formulation.F2)
    broken = dataclasses.replace(example1_optimal, hub_levels={1: 1})
    with pytest.raises(ValueError, match="not activated"):
        encode_solution(example1, broken, Formulation.F2, index)


def test_fix_mask_sets_upper_bounds():
    inst = tiny_instance(7, n=4, L=2, R=2)
    mask, _ = preprocess(inst)
    model, index = build(inst, Formulation.F2, BuildOptions(fix_mask=mask))
    fixed = [v for v in model.variables if v.name.startswith("x_") and v.upper == 0.0]
    assert len(fixed) == mask.num_fixed_routes
    for c, k, m, r in zip(*np.nonzero(mask.route_rule)):
        assert model.variables[index.x[c, k, m, r]].upper == 0.0

    model, index = build(inst, Formulation.F1, BuildOptions(fix_mask=mask))
    all_levels = mask.routes_fixed.all(axis=3)
    fixed = {int(index.x[c, k, m]) for c, k, m in zip(*np.nonzero(all_levels))}
    assert fixed == {v.id for v in model.variables if v.name.startswith("x_") and v.upper == 0.0}
