"""
We use the terms "encoding" and "decoding" for the path between the JSON instance file format
and the in-memory `Instance`.
 * encoded: 1-based node ids, hubs as a list of {id, W, G, h}, commodities as a list of {i, j, levels: [{w, q, H}, ...]}.
 * decoded: 0-based indices, per-level numpy arrays (see `hlctdp.instances.instance`).
"""
import json
from typing import Any, Dict

import numpy as np

from hlctdp.instances.instance import Instance, make_instance


class InstanceFormatError(ValueError):
    pass


def _matrix(data: Dict[str, Any], key: str, n: int) -> np.ndarray:
    rows = data.get(key)
    if not isinstance(rows, list) or len(rows) != n:
        raise InstanceFormatError(f"'{key}' must be a list of {n} rows")
    for idx, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise InstanceFormatError(f"ragged matrix '{key}': row {idx + 1} does not have {n} entries")
    arr = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InstanceFormatError(f"matrix '{key}' contains non-finite entries")
    return arr


def decode_instance(data: Dict[str, Any]) -> Instance:
    try:
        n = int(data["n"])
        alpha, gamma = float(data["alpha"]), float(data["gamma"])
    except (KeyError, TypeError, ValueError) as e:
        raise InstanceFormatError(f"missing or invalid header field: {e}")
    cost = _matrix(data, "cost", n)
    time = _matrix(data, "time", n)

    hubs = data.get("hubs")
    if not isinstance(hubs, list):
        raise InstanceFormatError("'hubs' must be a list")
    hub_levels = {}
    for record in hubs:
        if not isinstance(record, dict) or "id" not in record:
            raise InstanceFormatError(f"hub record without id: {record!r}")
        k = int(record["id"]) - 1
        if not 0 <= k < n or k in hub_levels:
            raise InstanceFormatError(f"hub id {k + 1} is out of range or duplicated")
        if not all(isinstance(record.get(key), list) for key in ("W", "G", "h")) \
                or not len(record["W"]) == len(record["G"]) == len(record["h"]):
            raise InstanceFormatError(f"hub {k + 1}: W, G and h must be lists of equal length")
        try:
            hub_levels[k] = [[float(a), float(b), float(c)] for a, b, c in zip(record["W"], record["G"], record["h"])]
        except (TypeError, ValueError) as e:
            raise InstanceFormatError(f"hub {k + 1}: non-numeric level data ({e})")
    if len(hub_levels) != n:
        raise InstanceFormatError(f"'hubs' must describe every node exactly once (got {len(hub_levels)} of {n})")
    level_counts = {len(v) for v in hub_levels.values()}
    if len(level_counts) != 1:
        raise InstanceFormatError(f"ragged hub levels: hubs have {sorted(level_counts)} service levels")
    hub_arr = np.asarray([hub_levels[k] for k in range(n)], dtype=float).reshape(n, level_counts.pop(), 3)

    commodities, levels = [], []
    for record in data.get("commodities", []):
        try:
            i, j = int(record["i"]) - 1, int(record["j"]) - 1
            lv = [[float(x["w"]), float(x["q"]), float(x["H"])] for x in record["levels"]]
        except (KeyError, TypeError, ValueError) as e:
            raise InstanceFormatError(f"malformed commodity record {record!r}: {e}")
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise InstanceFormatError(f"commodity ({i + 1},{j + 1}) must join two distinct existing nodes")
        commodities.append((i, j))
        levels.append(lv)
    if len({len(lv) for lv in levels}) > 1:
        raise InstanceFormatError("ragged demand levels: commodities have different numbers of levels")
    R = len(levels[0]) if levels else int(data.get("R", 1))
    dem_arr = np.asarray(levels, dtype=float).reshape(len(levels), R, 3)
    if not (np.all(np.isfinite(dem_arr)) and np.all(np.isfinite(hub_arr))):
        raise InstanceFormatError("level data contains non-finite entries")

    return make_instance(n, alpha, gamma, cost, time, commodities,
                         w=dem_arr[:, :, 0], q=dem_arr[:, :, 1], H=dem_arr[:, :, 2],
                         W=hub_arr[:, :, 0], G=hub_arr[:, :, 1], h=hub_arr[:, :, 2],
                         demand_level_names=data.get("demand_level_names", ()),
                         service_level_names=data.get("service_level_names", ()),
                         city_ids=data.get("city_ids", ()), name=data.get("name", ""), R=R)


def encode_instance(inst: Instance) -> Dict[str, Any]:
    return {
        "name": inst.name,
        "n": inst.n,
        "alpha": inst.alpha,
        "gamma": inst.gamma,
        "R": inst.R,
        "cost": inst.cost.tolist(),
        "time": inst.time.tolist(),
        "hubs": [{"id": k + 1, "W": inst.W[k].tolist(), "G": inst.G[k].tolist(), "h": inst.h[k].tolist()}
                 for k in inst.K],
        "commodities": [{"i": i + 1, "j": j + 1,
                         "levels": [{"w": float(inst.w[c][r]), "q": float(inst.q[c][r]), "H": float(inst.H[c][r])}
                                    for r in range(inst.R)]}
                        for c, (i, j) in enumerate(inst.commodities)],
        "demand_level_names": list(inst.demand_level_names),
        "service_level_names": list(inst.service_level_names),
        "city_ids": list(inst.city_ids),
    }


def load_instance(path: str) -> Instance:
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise InstanceFormatError(f"{path}: not valid JSON ({e})")
    return decode_instance(data)


def save_instance(inst: Instance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(encode_instance(inst), f, indent=1, sort_keys=True)
        f.write("\n")
