"""
Combinatorial solutions: which hubs are open at which service level, and which commodities are served
at which demand level along which route.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Mapping, Optional, Tuple

from hlctdp.config import TIE_TOL
from hlctdp.instances.instance import Commodity, Instance

# hub -> service level (0-based); absent hubs are closed
HubConfig = Dict[int, int]


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE_INPUT = "infeasibleInput"
    EMPTY = "empty"


@dataclass(frozen=True)
class Service:
    """ How a served commodity is served: demand level r along the route through hubs k (first) and m (second). """
    level: int
    k: int
    m: int

    def hubs(self) -> Tuple[int, ...]:
        return (self.k,) if self.k == self.m else (self.k, self.m)


@dataclass(frozen=True)
class SolveLogRow:
    nodes: int
    incumbent: float
    bound: float
    gap: float
    elapsed: float


@dataclass(frozen=True)
class Solution:
    hub_levels: Dict[int, int]
    served: Dict[Commodity, Service]
    objective: float
    revenue_total: float
    routing_cost: float
    setup_cost: float
    status: SolveStatus
    gap: float = 0.0
    bound: Optional[float] = None
    nodes: int = field(default=0, compare=False)
    elapsed: float = field(default=0.0, compare=False)
    log: Tuple[SolveLogRow, ...] = field(default=(), compare=False, repr=False)

    def key(self) -> Tuple[int, Tuple[int, ...]]:
        """ Tie-breaking key: fewer hubs first, then lexicographically lower hub indices. """
        return len(self.hub_levels), tuple(sorted(self.hub_levels))

    def beats(self, other: Optional['Solution']) -> bool:
        if other is None:
            return True
        if self.objective > other.objective + TIE_TOL:
            return True
        return abs(self.objective - other.objective) <= TIE_TOL and self.key() < other.key()

    def same_decisions(self, other: 'Solution') -> bool:
        return self.hub_levels == other.hub_levels and self.served == other.served

    def __str__(self):
        hubs = ", ".join(f"{k + 1}:l{l + 1}" for k, l in sorted(self.hub_levels.items()))
        return f"Solution({self.status.value}, objective={self.objective:.6g}, hubs={{{hubs}}}, served={len(self.served)})"


def make_solution(inst: Instance, hub_levels: Mapping[int, int], served: Mapping[Commodity, Service],
                  status: Optional[SolveStatus] = None, **extra) -> Solution:
    """ Build a Solution, recomputing revenue, routing cost and setup cost from the instance data. """
    revenue = routing = 0.0
    for (i, j), service in served.items():
        c = inst.position(i, j)
        demand = inst.w[c][service.level]
        revenue += demand * inst.q[c][service.level]
        routing += demand * inst.route_costs[c][service.k][service.m]
    setup = float(sum(inst.G[k][l] for k, l in hub_levels.items()))
    if status is None:
        status = SolveStatus.EMPTY if not hub_levels and not served else SolveStatus.FEASIBLE
    return Solution(hub_levels=dict(sorted(hub_levels.items())), served=dict(sorted(served.items())),
                    objective=float(revenue - routing - setup), revenue_total=float(revenue),
                    routing_cost=float(routing), setup_cost=setup, status=status, **extra)


def empty_solution(inst: Instance, status: SolveStatus = SolveStatus.EMPTY, **extra) -> Solution:
    return make_solution(inst, {}, {}, status=status, **extra)


def encode_solution_dict(sol: Solution) -> Dict[str, Any]:
    return {
        "objective": sol.objective,
        "revenue_total": sol.revenue_total,
        "routing_cost": sol.routing_cost,
        "setup_cost": sol.setup_cost,
        "status": sol.status.value,
        "gap": sol.gap,
        "bound": sol.bound,
        "nodes": sol.nodes,
        "elapsed": sol.elapsed,
        "hubs": [{"hub": k + 1, "level": l + 1} for k, l in sorted(sol.hub_levels.items())],
        "served": [{"i": i + 1, "j": j + 1, "r": s.level + 1, "k": s.k + 1, "m": s.m + 1}
                   for (i, j), s in sorted(sol.served.items())],
    }


def decode_solution_dict(data: Dict[str, Any], inst: Optional[Instance] = None) -> Solution:
    """ Read a solution JSON record. With `inst`, the objective decomposition is recomputed from the instance. """
    try:
        hub_levels = {int(h["hub"]) - 1: int(h["level"]) - 1 for h in data.get("hubs", [])}
        served = {(int(s["i"]) - 1, int(s["j"]) - 1): Service(int(s["r"]) - 1, int(s["k"]) - 1, int(s["m"]) - 1)
                  for s in data.get("served", [])}
        status = SolveStatus(data.get("status", SolveStatus.FEASIBLE.value))
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"malformed solution record: {e}")
    extra = dict(gap=float(data.get("gap", 0.0)), bound=data.get("bound"),
                 nodes=int(data.get("nodes", 0)), elapsed=float(data.get("elapsed", 0.0)))
    if inst is not None:
        return make_solution(inst, hub_levels, served, status=status, **extra)
    return Solution(hub_levels=hub_levels, served=served, objective=float(data["objective"]),
                    revenue_total=float(data.get("revenue_total", 0.0)), routing_cost=float(data.get("routing_cost", 0.0)),
                    setup_cost=float(data.get("setup_cost", 0.0)), status=status, **extra)
