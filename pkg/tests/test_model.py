import math

import pytest

from hlctdp.milp.model import Model, VarKind, evaluate, split_name, var_name


def _knapsack():
    model = Model("toy")
    a = model.add_variable("x", (0,), VarKind.BINARY)
    b = model.add_variable("x", (1,), VarKind.BINARY)
    y = model.add_variable("y", (0, 2), VarKind.CONTINUOUS, upper=4.0)
    model.set_objective([(a, 3.0), (b, 2.0), (y, -1.0)], constant=1.0)
    model.add_constraint("cap", [(a, 2.0), (b, 2.0), (a, 1.0)], "<=", 4.0)
    model.add_constraint("link[lo]", [(y, 1.0), (a, -1.0)], ">=", 0.0)
    model.add_constraint("link[up]", [(y, 1.0), (a, -2.0)], "<=", 0.0)
    return model.freeze(), (a, b, y)


def test_names_are_one_based_and_reversible():
    assert var_name("x", (0, 1, 2, 3, 0)) == "x_1_2_3_4_1"
    assert split_name("x_1_2_3_4_1") == ("x", (0, 1, 2, 3, 0))
    assert split_name("not a name") is None


def test_lookup_by_family_and_name():
    model, (a, b, y) = _knapsack()
    assert model.var("y", 0, 2) == y
    assert model.var_by_name("x_2") == b
    assert model.var_by_name("z") is None


def test_counts():
    model, _ = _knapsack()
    assert (model.num_variables, model.num_binary, model.num_continuous) == (3, 2, 1)
    assert model.num_rows == 3
    assert model.num_constraints == 2


def test_duplicate_terms_are_aggregated():
    model, (a, b, _) = _knapsack()
    assert dict(model.constraints[0].terms) == {a: 3.0, b: 2.0}


def test_evaluate_feasible_assignment():
    model, (a, b, y) = _knapsack()
    objective, violations = model.evaluate({a: 1.0, b: 0.0, y: 1.5})
    assert objective == pytest.approx(3.0 - 1.5 + 1.0)
    assert violations == []


def test_evaluate_reports_rows_and_bounds():
    model, (a, b, y) = _knapsack()
    _, violations = evaluate(model, [1.0, 1.0, 5.0])
    names = {v.name for v in violations}
    assert names == {"cap", "link[up]", "bound:y_1_3"}
    residual = {v.name: v.residual for v in violations}
    assert residual["cap"] == pytest.approx(1.0)
    assert residual["bound:y_1_3"] == pytest.approx(1.0)


def test_evaluate_rejects_partial_assignment():
    model, (a, _, _) = _knapsack()
    with pytest.raises(ValueError):
        model.evaluate({a: 1.0})


def test_frozen_model_is_immutable():
    model, _ = _knapsack()
    with pytest.raises(AssertionError):
        model.add_variable("z", (0,), VarKind.BINARY)


def test_default_bounds():
    model = Model()
    b = model.add_variable("b", (0,), VarKind.BINARY)
    c = model.add_variable("c", (0,), VarKind.CONTINUOUS)
    assert model.variables[b].upper == 1.0
    assert math.isinf(model.variables[c].upper)


def test_unknown_sense():
    model = Model()
    b = model.add_variable("b", (0,), VarKind.BINARY)
    with pytest.raises(ValueError):
        model.add_constraint("r", [(b, 1.0)], "<", 1.0)
