"""
Reporting metrics of a validated solution: hub usage, commodity service and the cost decomposition,
laid out as one row of the best-known-solutions table.
"""
from dataclasses import dataclass, field
from typing import Any, Dict

from hlctdp.evaluation.validation import hub_inflows, validate
from hlctdp.instances.instance import Instance, default_demand_level_names
from hlctdp.solving.solution import Solution, SolveStatus, make_solution
from hlctdp.utils import as_percent, as_relative_percent

# the revenue levels reported as separate columns, in table order
REPORTED_DEMAND_LEVELS = ("High", "Med", "Low")

STATS_COLUMNS = ["instance", "alpha", "n", "L", "R", "notOptimal",
                 "H", "pctM", "pctH", "pctOc",
                 "pctServed", "servedH", "servedM", "servedL",
                 "profit", "pctT", "pctI", "pctTwoHub"]


class InvalidSolutionError(ValueError):
    pass


@dataclass(frozen=True)
class SolutionStats:
    num_hubs: int
    pct_medium: float
    pct_high: float
    occupancy: float
    pct_served: float
    pct_served_by_level: Dict[str, float] = field(default_factory=dict)
    profit: float = 0.0
    pct_travel_cost: float = 0.0
    pct_install_cost: float = 0.0
    pct_two_hub_routes: float = 0.0

    def to_row(self, inst: Instance, sol: Solution) -> Dict[str, Any]:
        """ Row with the columns of STATS_COLUMNS; `notOptimal` plays the role of the table's asterisk. """
        row = {"instance": inst.name, "alpha": inst.alpha, "n": inst.n, "L": inst.L, "R": inst.R,
               "notOptimal": sol.status not in (SolveStatus.OPTIMAL, SolveStatus.EMPTY),
               "H": self.num_hubs, "pctM": self.pct_medium, "pctH": self.pct_high, "pctOc": self.occupancy,
               "pctServed": self.pct_served,
               "profit": self.profit, "pctT": self.pct_travel_cost, "pctI": self.pct_install_cost,
               "pctTwoHub": self.pct_two_hub_routes}
        for name in REPORTED_DEMAND_LEVELS:
            row[f"served{name[0]}"] = self.pct_served_by_level.get(name, 0.0)
        return row


def stats(inst: Instance, sol: Solution, check_consistency: bool = True) -> SolutionStats:
    report = validate(inst, sol, check_consistency=check_consistency)
    if not report.ok:
        raise InvalidSolutionError(f"statistics need a valid solution: {'; '.join(map(str, report.violations))}")
    recomputed = make_solution(inst, sol.hub_levels, sol.served)

    # the top service level is high, every lower one medium
    level_counts = [0] * inst.L
    for l in sol.hub_levels.values():
        level_counts[l] += 1
    level_shares = as_relative_percent(level_counts)
    pct_high = level_shares[-1] if inst.L > 1 else 0.0
    num_hubs = len(sol.hub_levels)
    installed = sum(float(inst.W[k, l]) for k, l in sol.hub_levels.items())
    used = sum(hub_inflows(inst, sol).values())

    # revenue levels go by position, not by their configured names
    positional = default_demand_level_names(inst.R)
    served_levels: Dict[str, int] = {}
    for s in sol.served.values():
        served_levels[positional[s.level]] = served_levels.get(positional[s.level], 0) + 1
    num_served = len(sol.served)
    two_hub = sum(1 for s in sol.served.values() if s.k != s.m)

    total_cost = recomputed.routing_cost + recomputed.setup_cost
    return SolutionStats(
        num_hubs=num_hubs,
        pct_medium=sum(level_shares) - pct_high,
        pct_high=pct_high,
        occupancy=as_percent(used, installed),
        pct_served=as_percent(num_served, inst.num_commodities),
        pct_served_by_level=as_relative_percent(served_levels),
        profit=recomputed.objective,
        pct_travel_cost=as_percent(recomputed.routing_cost, total_cost),
        pct_install_cost=as_percent(recomputed.setup_cost, total_cost),
        pct_two_hub_routes=as_percent(two_hub, num_served))


def deviation(found: float, best_known: float) -> float:
    """ Percent deviation of `found` from the best-known objective, relative to |best_known|; 0 when found is at
    least as good. """
    if best_known == 0:
        raise ValueError("deviation from a zero best-known objective is undefined")
    return max(0.0, 100.0 * (best_known - found) / abs(best_known))
