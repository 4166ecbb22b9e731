import hashlib
import json
import logging
import os
from typing import Any, Dict, Iterable, List, Optional, Union

import pandas as pd

logger = logging.getLogger(__name__)


def as_percent(part: float, whole: float) -> float:
    """ 100*part/whole, or 0 when `whole` is zero. """
    if not whole:
        return 0.0
    return 100.0 * part / whole


def as_relative_percent(distribution: Union[List[float], Dict[Any, float]]):
    # get a list\dict of numbers (a distribution), return the relative distribution in percents
    if isinstance(distribution, dict):
        sm = float(sum(distribution.values()))
        return {k: as_percent(v, sm) for k, v in distribution.items()}
    sm = float(sum(distribution))
    return [as_percent(v, sm) for v in distribution]


def write_json(obj: Any, path: str) -> None:
    """ Write `obj` as indented UTF-8 JSON with sorted keys, so that identical inputs give identical bytes. """
    dirname = os.path.dirname(path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path: str) -> Any:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def config_hash(config: Dict[str, Any]) -> str:
    """ Stable sha256 digest of a JSON-serializable configuration dict. """
    encoded = json.dumps(config, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(encoded).hexdigest()


def write_csv(rows: Iterable[Dict[str, Any]], path: str, columns: Optional[List[str]] = None) -> pd.DataFrame:
    df = pd.DataFrame(list(rows), columns=columns)
    dirname = os.path.dirname(path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    df.to_csv(path, index=False, encoding="utf-8")
    logger.info(f"exported DataFrame with shape {df.shape} to {path}")
    return df


def concat_csvs(csv_fn_list: List[str], output_fn: str, columns: List[str] = None) -> pd.DataFrame:
    inp_dfs = [pd.read_csv(fn) for fn in csv_fn_list]
    if not inp_dfs:
        concatenated_df = pd.DataFrame(columns=columns)
    else:
        concatenated_df = pd.concat(inp_dfs, ignore_index=True, sort=False)
    # `columns` can determine subset (and order) of output columns
    if columns:
        concatenated_df = concatenated_df.reindex(columns=columns)
    concatenated_df.to_csv(output_fn, index=False, encoding="utf-8")
    logger.info(f"exported DataFrame with shape {concatenated_df.shape} to {output_fn}")
    return concatenated_df
