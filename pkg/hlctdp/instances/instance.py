"""
Problem data of the Hub Location with Congestion and Time-sensitive Demand Problem (HLCTDP),
and the derived quantities every other module relies on.

Conventions:
 * nodes, hubs, service levels and demand levels are 0-based inside the code, and 1-based in files and reports.
 * every node is a potential hub (K = V).
 * per-commodity data (w, q, H) is stored by commodity *position* in `Instance.commodities`;
   use `Instance.position(i, j)` to go from an (origin, destination) pair to that position.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Tuple

import numpy as np

from hlctdp.config import VALIDATION_TOL

Commodity = Tuple[int, int]

DEMAND_LEVEL_NAMES = {1: ("Med",), 2: ("High", "Med"), 3: ("High", "Med", "Low")}
SERVICE_LEVEL_NAMES = {1: ("Med",), 2: ("Med", "High")}


def default_demand_level_names(n_levels: int) -> Tuple[str, ...]:
    """ Demand levels are stored sorted by increasing max service time, so the most urgent ("High") comes first. """
    return DEMAND_LEVEL_NAMES.get(n_levels, tuple(f"r{r + 1}" for r in range(n_levels)))


def default_service_level_names(n_levels: int) -> Tuple[str, ...]:
    return SERVICE_LEVEL_NAMES.get(n_levels, tuple(f"l{l + 1}" for l in range(n_levels)))


def all_commodities(n: int) -> Tuple[Commodity, ...]:
    """ All ordered pairs (i,j), i != j, in lexicographic order. """
    return tuple((i, j) for i in range(n) for j in range(n) if i != j)


@dataclass(frozen=True)
class RouteKey:
    """ One routing variable: commodity (i,j) served at demand level r through hubs k (first) and m (second). """
    i: int
    j: int
    k: int
    m: int
    r: int

    def is_single_hub(self) -> bool:
        return self.k == self.m

    def __str__(self):
        return f"x_{self.i + 1}_{self.j + 1}_{self.k + 1}_{self.m + 1}_{self.r + 1}"


@dataclass(frozen=True, eq=False)
class BaseInstance:
    """ Single-level data of a base instance, before expansion into demand and service levels. """
    n: int
    alpha: float
    gamma: float
    dist: np.ndarray
    cost: np.ndarray
    time: np.ndarray
    demand: np.ndarray      # w~[i][j]
    revenue: np.ndarray     # q~[i][j]
    max_time: np.ndarray    # H~[i][j]
    hub_cost: np.ndarray    # G~[k]
    hub_transit: np.ndarray  # h~[k]
    hub_cap: np.ndarray     # W~[k]
    city_ids: Tuple[int, ...] = ()

    def equals(self, other: 'BaseInstance') -> bool:
        """ Bit-for-bit equality of all fields. """
        if (self.n, self.alpha, self.gamma, self.city_ids) != (other.n, other.alpha, other.gamma, other.city_ids):
            return False
        arrays = ("dist", "cost", "time", "demand", "revenue", "max_time", "hub_cost", "hub_transit", "hub_cap")
        return all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)


@dataclass(frozen=True, eq=False)
class Instance:
    """ Full multi-level HLCTDP instance.

    w, q, H have shape (|C|, R); W, G, h have shape (n, L). Levels are sorted by increasing H (demand)
    and increasing W (service). """
    n: int
    alpha: float
    gamma: float
    cost: np.ndarray
    time: np.ndarray
    commodities: Tuple[Commodity, ...]
    w: np.ndarray
    q: np.ndarray
    H: np.ndarray
    W: np.ndarray
    G: np.ndarray
    h: np.ndarray
    demand_level_names: Tuple[str, ...] = ()
    service_level_names: Tuple[str, ...] = ()
    city_ids: Tuple[int, ...] = ()
    name: str = ""
    _positions: Dict[Commodity, int] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_positions", {c: p for p, c in enumerate(self.commodities)})
        if not self.demand_level_names:
            object.__setattr__(self, "demand_level_names", default_demand_level_names(self.R))
        if not self.service_level_names:
            object.__setattr__(self, "service_level_names", default_service_level_names(self.L))

    @property
    def K(self) -> range:
        return range(self.n)

    @property
    def L(self) -> int:
        return self.W.shape[1]

    @property
    def R(self) -> int:
        return self.w.shape[1]

    @property
    def num_commodities(self) -> int:
        return len(self.commodities)

    def position(self, i: int, j: int) -> int:
        try:
            return self._positions[(i, j)]
        except KeyError:
            raise IndexError(f"commodity ({i + 1},{j + 1}) is not part of the instance")

    def has_commodity(self, i: int, j: int) -> bool:
        return (i, j) in self._positions

    def lower_capacity(self, k: int, l: int) -> float:
        """ W_k^{l-1}, with the implicit W_k^0 = 0. """
        return float(self.W[k][l - 1]) if l > 0 else 0.0

    @cached_property
    def route_costs(self) -> np.ndarray:
        """ C_ijkm for every commodity position: array of shape (|C|, n, n). """
        return _route_tensor(self.cost, self.alpha, self.commodities)

    @cached_property
    def route_times(self) -> np.ndarray:
        """ T_ijkm for every commodity position: array of shape (|C|, n, n). """
        return _route_tensor(self.time, self.gamma, self.commodities)

    @cached_property
    def min_transits(self) -> np.ndarray:
        return self.h.min(axis=1) if self.L else np.zeros(self.n)


def _route_tensor(matrix: np.ndarray, discount: float, commodities: Tuple[Commodity, ...]) -> np.ndarray:
    n = matrix.shape[0]
    if not commodities:
        return np.zeros((0, n, n))
    origins = np.array([i for i, _ in commodities])
    destinations = np.array([j for _, j in commodities])
    # first leg depends on k, last leg on m
    first = matrix[origins, :][:, :, None]
    last = matrix[:, destinations].T[:, None, :]
    return first + discount * matrix[None, :, :] + last


def _check_nodes(inst: Instance, *nodes: int):
    for v in nodes:
        if not 0 <= v < inst.n:
            raise IndexError(f"node index {v} out of range for an instance with {inst.n} nodes")


def route_cost(inst: Instance, i: int, j: int, k: int, m: int) -> float:
    """ C_ijkm = c_ik + alpha*c_km + c_mj. For k == m the middle term vanishes (zero diagonal). """
    _check_nodes(inst, i, j, k, m)
    return float(inst.cost[i][k] + inst.alpha * inst.cost[k][m] + inst.cost[m][j])


def route_time(inst: Instance, i: int, j: int, k: int, m: int) -> float:
    """ T_ijkm = t_ik + gamma*t_km + t_mj, hub transit times excluded. """
    _check_nodes(inst, i, j, k, m)
    return float(inst.time[i][k] + inst.gamma * inst.time[k][m] + inst.time[m][j])


def net_profit(inst: Instance, i: int, j: int, k: int, m: int, r: int) -> float:
    """ w_ij^r * (q_ij^r - C_ijkm) """
    c = inst.position(i, j)
    if not 0 <= r < inst.R:
        raise IndexError(f"demand level {r} out of range (R={inst.R})")
    return float(inst.w[c][r] * (inst.q[c][r] - route_cost(inst, i, j, k, m)))


def min_transit(inst: Instance, k: int) -> float:
    _check_nodes(inst, k)
    return float(inst.h[k].min())


def setup_nondecreasing(inst: Instance) -> bool:
    """ Whether every hub's setup cost grows (weakly) with its service level. """
    return bool(np.all(np.diff(inst.G, axis=1) >= 0))


@dataclass(frozen=True)
class InstanceViolation:
    rule: str   # A1 | A2 | A3 | monotonicity | nonnegativity | diagonal | shape
    indices: Tuple[int, ...]
    detail: str

    def __str__(self):
        return f"{self.rule}{tuple(v + 1 for v in self.indices)}: {self.detail}"


def validate_instance(inst: Instance) -> List[InstanceViolation]:
    """ Check the level semantics and assumptions A1-A3. Returns an empty list iff the instance is valid. """
    violations: List[InstanceViolation] = []
    n, L, R, nc = inst.n, inst.L, inst.R, inst.num_commodities

    expected = {"cost": (n, n), "time": (n, n), "W": (n, L), "G": (n, L), "h": (n, L),
                "w": (nc, R), "q": (nc, R), "H": (nc, R)}
    for attr, shape in expected.items():
        if getattr(inst, attr).shape != shape:
            violations.append(InstanceViolation("shape", (), f"{attr} has shape {getattr(inst, attr).shape}, expected {shape}"))
    if violations:
        return violations
    if L == 0:
        violations.append(InstanceViolation("shape", (), "no service levels"))
    if nc and R == 0:
        violations.append(InstanceViolation("shape", (), "no demand levels"))
    for c, (i, j) in enumerate(inst.commodities):
        if i == j or not (0 <= i < n and 0 <= j < n):
            violations.append(InstanceViolation("shape", (i, j), "commodity endpoints must be distinct existing nodes"))
    if len(set(inst.commodities)) != nc:
        violations.append(InstanceViolation("shape", (), "duplicate commodities"))

    for attr in ("cost", "time", "q", "G", "h"):
        arr = getattr(inst, attr)
        for idx in zip(*np.nonzero(~(arr >= 0))):
            violations.append(InstanceViolation("nonnegativity", tuple(int(v) for v in idx), f"{attr} is negative or not a number"))
    for attr in ("cost", "time"):
        diag = np.diag(getattr(inst, attr))
        for k in np.nonzero(np.abs(diag) > VALIDATION_TOL)[0]:
            violations.append(InstanceViolation("diagonal", (int(k),), f"{attr}[k][k] must be 0"))

    for k in range(n):
        caps = np.concatenate(([0.0], inst.W[k]))
        if np.any(np.diff(caps) <= 0):
            violations.append(InstanceViolation("monotonicity", (k,), f"capacities {list(inst.W[k])} must be positive and strictly increasing"))
        if np.any(np.diff(inst.h[k]) < 0):
            violations.append(InstanceViolation("monotonicity", (k,), f"transit times {list(inst.h[k])} must be nondecreasing"))
    for c, (i, j) in enumerate(inst.commodities):
        limits = np.concatenate(([0.0], inst.H[c]))
        if np.any(np.diff(limits) <= 0):
            violations.append(InstanceViolation("monotonicity", (i, j), f"time limits {list(inst.H[c])} must be positive and strictly increasing"))
        if np.any(np.diff(inst.q[c]) > 0):
            violations.append(InstanceViolation("monotonicity", (i, j), f"revenues {list(inst.q[c])} must be nonincreasing"))

    top_caps = inst.W[:, -1] if L else np.zeros(n)
    for c, (i, j) in enumerate(inst.commodities):
        for r in range(R):
            demand = inst.w[c][r]
            if not demand > 0:
                violations.append(InstanceViolation("A1", (i, j, r), f"demand {demand} must be positive"))
                continue
            too_small = [k for k in range(n) if demand > top_caps[k]]
            if n and len(too_small) == n:
                violations.append(InstanceViolation("A3", (i, j, r), f"demand {demand} exceeds every hub's largest capacity"))
            else:
                for k in too_small:
                    violations.append(InstanceViolation("A2", (i, j, r, k), f"demand {demand} exceeds capacity {top_caps[k]} of hub {k + 1}"))
    return violations


def make_instance(n: int, alpha: float, gamma: float, cost, time, commodities, w, q, H, W, G, h,
                  demand_level_names=(), service_level_names=(), city_ids=(), name: str = "", R: int = 1) -> Instance:
    """ Convenience constructor converting nested sequences to float arrays.
    `R` is only used to shape the level arrays when there are no commodities. """
    nc = len(commodities)
    w_arr = np.asarray(w, dtype=float).reshape(nc, -1) if nc else np.zeros((0, R))
    return Instance(n=n, alpha=float(alpha), gamma=float(gamma),
                    cost=np.asarray(cost, dtype=float), time=np.asarray(time, dtype=float),
                    commodities=tuple((int(i), int(j)) for i, j in commodities),
                    w=w_arr,
                    q=np.asarray(q, dtype=float).reshape(w_arr.shape),
                    H=np.asarray(H, dtype=float).reshape(w_arr.shape),
                    W=np.asarray(W, dtype=float).reshape(n, -1),
                    G=np.asarray(G, dtype=float).reshape(n, -1),
                    h=np.asarray(h, dtype=float).reshape(n, -1),
                    demand_level_names=tuple(demand_level_names), service_level_names=tuple(service_level_names),
                    city_ids=tuple(city_ids), name=name)


class InvalidInstanceError(ValueError):
    def __init__(self, violations: List[InstanceViolation]):
        self.violations = violations
        shown = "; ".join(str(v) for v in violations[:5])
        super().__init__(f"invalid instance ({len(violations)} violations): {shown}")


def require_valid(inst: Instance) -> None:
    violations = validate_instance(inst)
    if violations:
        raise InvalidInstanceError(violations)
