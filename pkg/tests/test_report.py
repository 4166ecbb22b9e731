import json
import math
import os

import pandas as pd
import pytest

from hlctdp.evaluation.report import (RunRecord, best_known, best_table, find_run_records, load_run_record,
                                      observations, preprocess_table, runs_table, save_run_record, write_report)
from hlctdp.instances.encode_decode import save_instance
from hlctdp.instances.generator import GenParams, load_cab, load_hub_costs, sweep
from hlctdp.solving.preprocess import preprocess
from hlctdp.solving.solution import Service, SolveStatus, make_solution
from hlctdp.solving.solver import SolverConfig, solve_exact


@pytest.fixture
def records(example1, example1_optimal):
    _, fix_report = preprocess(example1)
    weaker = make_solution(example1, {1: 0}, {(0, 1): Service(0, 1, 1)}, status=SolveStatus.FEASIBLE)
    return [RunRecord("example1", "example1.json", "solve", example1_optimal, fix_report.to_row(example1)),
            RunRecord("example1", "example1.json", "greedy", weaker)]


def test_record_round_trip(tmp_path, example1, records):
    save_instance(example1, str(tmp_path / "example1.json"))
    os.makedirs(tmp_path / "runs")
    path = str(tmp_path / "runs" / "example1.solve.solution.json")
    save_run_record(RunRecord("example1", os.path.join("..", "example1.json"), "solve", records[0].solution), path)
    again = load_run_record(path)
    assert again.solution.same_decisions(records[0].solution)
    assert os.path.normpath(again.instance_path) == os.path.normpath(str(tmp_path / "example1.json"))
    assert find_run_records([str(tmp_path)]) == [path]


def test_best_known_and_deviation(example1, records):
    assert best_known(records) == {"example1": pytest.approx(550.0)}
    df = runs_table(records, {"example1": example1})
    assert list(df.run) == ["greedy", "solve"]
    deviations = dict(zip(df.run, df.pctDev))
    assert deviations["solve"] == 0.0
    assert deviations["greedy"] == pytest.approx(100.0 * 200 / 550)


def test_best_table_marks_unproven_instances(example1, records):
    df = best_table(records, {"example1": example1})
    assert len(df) == 1
    row = df.iloc[0]
    assert row.profit == pytest.approx(550.0) and not row.notOptimal
    assert best_table(records[1:], {"example1": example1}).iloc[0].notOptimal


def test_preprocess_table_and_observations(example1, records):
    pre = preprocess_table(records)
    assert len(pre) == 1 and pre.iloc[0].instance == "example1"
    result = observations(pre, best_table(records, {"example1": example1}))
    assert result["two_hub_share_by_alpha"] == {"0.5": 50.0}
    assert result["two_hub_share_decreasing_in_alpha"]
    assert isinstance(result["c1_dominant"], bool)
    assert set(result["c1_strictly_largest_by_alpha"]) == {"0.5"}


def test_observations_on_empty_tables():
    assert observations(pd.DataFrame(columns=["pctC1", "pctC2", "pctC3", "pctE"]),
                        pd.DataFrame(columns=["pctServed", "alpha", "pctTwoHub"])) == {}


def test_write_report(tmp_path, example1, records):
    paths = write_report(records, {"example1": example1}, str(tmp_path))
    assert sorted(os.path.basename(p) for p in paths.values()) == ["observations.json", "preprocess.csv", "runs.csv",
                                                                   "table5.csv"]
    runs = pd.read_csv(paths["runs.csv"])
    assert len(runs) == 2
    with open(paths["observations.json"], encoding="utf-8") as f:
        assert not math.isnan(json.load(f)["min_pct_eliminated"])


def _read(path):
    with open(path, encoding="utf-8") as f:
        return f.read()


@pytest.mark.slow
def test_sweep_tables(tmp_path, cab_path, hub_costs_path):
    raw = load_cab(_read(cab_path))
    params = GenParams(hub_cost_base=load_hub_costs(_read(hub_costs_path)))
    records, instances = [], {}
    for inst in sweep(raw, params):
        mask, fix_report = preprocess(inst)
        sol = solve_exact(inst, mask, SolverConfig(time_limit=2.0))
        instances[inst.name] = inst
        records.append(RunRecord(inst.name, f"{inst.name}.json", "solve", sol, fix_report.to_row(inst)))
    paths = write_report(records, instances, str(tmp_path))

    table, pre = pd.read_csv(paths["table5.csv"]), pd.read_csv(paths["preprocess.csv"])
    assert len(table) == len(pre) == 54
    assert sorted(set(table.n)) == [8, 10, 12] and sorted(set(pre.alpha)) == [0.2, 0.5, 0.8]
    assert (table.profit > 0).any()
    assert (table.profit >= 0).all()
    assert (pre.pctE > 0).all()
    with open(paths["observations.json"], encoding="utf-8") as f:
        result = json.load(f)
    # directional only: at a high discount most instances owe the bulk of their fixings to dominance
    assert result["c1_strictly_largest_by_alpha"]["0.8"] >= 0.5
