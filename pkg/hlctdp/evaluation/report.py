"""
Aggregation of solve runs into experiment tables: per-run results with the deviation from the best-known
objective, the best-known-solutions table, the preprocessing table and directional observations.
"""
import glob
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from hlctdp.evaluation.stats import STATS_COLUMNS, deviation, stats
from hlctdp.instances.instance import Instance
from hlctdp.solving.preprocess import PREPROCESS_COLUMNS
from hlctdp.solving.solution import Solution, SolveStatus, decode_solution_dict, encode_solution_dict
from hlctdp.utils import read_json, write_csv, write_json

logger = logging.getLogger(__name__)

RUN_RECORD_SUFFIX = ".solution.json"
COMPARE_TABLE = "compare_preprocess.csv"
RUN_COLUMNS = ["instance", "run", "alpha", "n", "L", "R", "status", "objective", "bound", "gap", "nodes", "elapsed",
               "pctDev"]
GRID = ["alpha", "n", "L", "R", "instance"]


@dataclass(frozen=True)
class RunRecord:
    """ One solve of one instance, as written next to the solution by the solve and oracle commands. """
    instance: str
    instance_path: str
    run: str
    solution: Solution
    preprocess: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"instance": self.instance, "instance_path": self.instance_path, "run": self.run,
                "solution": encode_solution_dict(self.solution), "preprocess": self.preprocess}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunRecord':
        return cls(instance=data["instance"], instance_path=data["instance_path"], run=data.get("run", ""),
                   solution=decode_solution_dict(data["solution"]), preprocess=data.get("preprocess"))


def save_run_record(record: RunRecord, path: str) -> None:
    write_json(record.to_dict(), path)


def find_run_records(paths: Iterable[str]) -> List[str]:
    """ Run record files among `paths`, searching directories recursively. """
    found = []
    for path in paths:
        if os.path.isdir(path):
            found.extend(glob.glob(os.path.join(path, "**", "*" + RUN_RECORD_SUFFIX), recursive=True))
        else:
            found.append(path)
    return sorted(found)


def find_compare_tables(paths: Iterable[str]) -> List[str]:
    """ Preprocessing comparison tables in the directories among `paths` (recursively) or next to the given run
    record files. """
    found = set()
    for path in paths:
        if os.path.isdir(path):
            found.update(glob.glob(os.path.join(path, "**", COMPARE_TABLE), recursive=True))
        elif os.path.exists(os.path.join(os.path.dirname(path), COMPARE_TABLE)):
            found.add(os.path.join(os.path.dirname(path), COMPARE_TABLE))
    return sorted(found)


def load_run_record(path: str) -> RunRecord:
    record = RunRecord.from_dict(read_json(path))
    if not os.path.isabs(record.instance_path):
        # relative instance paths are relative to the record file
        record = RunRecord(record.instance, os.path.join(os.path.dirname(path), record.instance_path), record.run,
                           record.solution, record.preprocess)
    return record


def best_known(records: Iterable[RunRecord]) -> Dict[str, float]:
    best: Dict[str, float] = {}
    for record in records:
        objective = record.solution.objective
        best[record.instance] = max(best.get(record.instance, objective), objective)
    return best


def _deviation_or_nan(found: float, best: float) -> float:
    if best == 0:
        return 0.0 if found >= 0 else np.nan
    return deviation(found, best)


def runs_table(records: List[RunRecord], instances: Dict[str, Instance]) -> pd.DataFrame:
    best = best_known(records)
    rows = []
    for record in records:
        inst, sol = instances[record.instance], record.solution
        rows.append({"instance": record.instance, "run": record.run,
                     "alpha": inst.alpha, "n": inst.n, "L": inst.L, "R": inst.R,
                     "status": sol.status.value, "objective": sol.objective, "bound": sol.bound, "gap": sol.gap,
                     "nodes": sol.nodes, "elapsed": sol.elapsed,
                     "pctDev": _deviation_or_nan(sol.objective, best[record.instance])})
    return pd.DataFrame(rows, columns=RUN_COLUMNS).sort_values(GRID + ["run"], kind="stable", ignore_index=True)


def best_table(records: List[RunRecord], instances: Dict[str, Instance]) -> pd.DataFrame:
    """ One row per instance describing its best-known solution; `notOptimal` is set unless some run proved
    optimality of that objective. """
    by_instance: Dict[str, List[RunRecord]] = {}
    for record in records:
        by_instance.setdefault(record.instance, []).append(record)
    rows = []
    for name, runs in by_instance.items():
        best = None
        for record in runs:
            if record.solution.beats(best.solution if best else None):
                best = record
        inst = instances[name]
        row = stats(inst, best.solution).to_row(inst, best.solution)
        proven = [r for r in runs if r.solution.status in (SolveStatus.OPTIMAL, SolveStatus.EMPTY)]
        row["notOptimal"] = not any(r.solution.objective >= best.solution.objective - 1e-6 for r in proven)
        rows.append(row)
    return pd.DataFrame(rows, columns=STATS_COLUMNS).sort_values(GRID, kind="stable", ignore_index=True)


def preprocess_table(records: List[RunRecord]) -> pd.DataFrame:
    rows = {}
    for record in records:
        if record.preprocess:
            rows.setdefault(record.instance, {"instance": record.instance, **record.preprocess})
    return pd.DataFrame(list(rows.values()), columns=PREPROCESS_COLUMNS).sort_values(GRID, kind="stable",
                                                                                     ignore_index=True)


def observations(preprocess_df: pd.DataFrame, best_df: pd.DataFrame) -> Dict[str, Any]:
    """ Directional checks on the tables. They are reported, never enforced: small instances are noisy. """
    result: Dict[str, Any] = {}
    if len(preprocess_df):
        dominant = preprocess_df.pctC1 >= preprocess_df[["pctC2", "pctC3"]].max(axis=1)
        result["c1_dominant_share"] = float(dominant.mean())
        result["c1_dominant"] = bool(dominant.mean() >= 0.5)
        result["min_pct_eliminated"] = float(preprocess_df.pctE.min())
        strict = preprocess_df.pctC1 > preprocess_df[["pctC2", "pctC3"]].max(axis=1)
        by_alpha = strict.groupby(preprocess_df.alpha).mean().sort_index()
        result["c1_strictly_largest_by_alpha"] = {f"{alpha:g}": float(share) for alpha, share in by_alpha.items()}
    served = best_df[best_df.pctServed > 0]
    if len(served):
        by_alpha = served.groupby("alpha").pctTwoHub.mean().sort_index()
        result["two_hub_share_by_alpha"] = {f"{alpha:g}": float(share) for alpha, share in by_alpha.items()}
        result["two_hub_share_decreasing_in_alpha"] = bool(np.all(np.diff(by_alpha.values) <= 1e-9))
    for key, value in result.items():
        logger.info(f"observation {key}: {value}")
    return result


def write_report(records: List[RunRecord], instances: Dict[str, Instance], out_dir: str) -> Dict[str, str]:
    """ Write runs.csv, table5.csv, preprocess.csv and observations.json into `out_dir`; return their paths. """
    paths = {name: os.path.join(out_dir, name) for name in ("runs.csv", "table5.csv", "preprocess.csv",
                                                            "observations.json")}
    best_df = best_table(records, instances)
    preprocess_df = preprocess_table(records)
    write_csv(runs_table(records, instances).to_dict("records"), paths["runs.csv"], RUN_COLUMNS)
    write_csv(best_df.to_dict("records"), paths["table5.csv"], STATS_COLUMNS)
    write_csv(preprocess_df.to_dict("records"), paths["preprocess.csv"], PREPROCESS_COLUMNS)
    write_json(observations(preprocess_df, best_df), paths["observations.json"])
    return paths
