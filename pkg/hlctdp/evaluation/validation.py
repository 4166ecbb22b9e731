"""
First-principles feasibility check of a Solution against an Instance.
This is the semantic reference for the solver, the oracle and decoded external solutions.
"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

from hlctdp.config import VALIDATION_TOL
from hlctdp.instances.instance import Instance
from hlctdp.solving.solution import Solution, make_solution

logger = logging.getLogger(__name__)

RULES = ("oneLevelPerHub", "oneLevelPerCommodity", "openHubRouting", "capacityInterval", "timeLimit",
         "consistency", "objectiveMismatch")


@dataclass(frozen=True)
class Violation:
    rule: str
    detail: str

    def __str__(self):
        return f"{self.rule}: {self.detail}"


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: Tuple[Violation, ...]

    @classmethod
    def of(cls, violations: List[Violation]) -> 'ValidationReport':
        return cls(ok=not violations, violations=tuple(violations))

    def rules(self) -> List[str]:
        return [v.rule for v in self.violations]

    def to_dict(self) -> Dict[str, Any]:
        return {"ok": self.ok, "violations": [{"rule": v.rule, "detail": v.detail} for v in self.violations]}


def hub_inflows(inst: Instance, sol: Solution) -> Dict[int, float]:
    """ Flow entering each hub; a two-hub route enters both of its hubs. """
    inflow = defaultdict(float)
    for (i, j), service in sol.served.items():
        demand = inst.w[inst.position(i, j)][service.level]
        for hub in service.hubs():
            inflow[hub] += demand
    return inflow


def validate(inst: Instance, sol: Solution, check_consistency: bool = True) -> ValidationReport:
    violations: List[Violation] = []
    valid_hubs = {}
    for k, l in sol.hub_levels.items():
        if not (0 <= k < inst.n and 0 <= l < inst.L):
            violations.append(Violation("oneLevelPerHub", f"hub {k + 1} has no service level {l + 1}"))
        else:
            valid_hubs[k] = l

    routed = {}
    for (i, j), service in sol.served.items():
        if not inst.has_commodity(i, j):
            violations.append(Violation("oneLevelPerCommodity", f"({i + 1},{j + 1}) is not a commodity of the instance"))
            continue
        if not 0 <= service.level < inst.R:
            violations.append(Violation("oneLevelPerCommodity", f"({i + 1},{j + 1}) has no demand level {service.level + 1}"))
            continue
        closed = [hub for hub in (service.k, service.m) if hub not in valid_hubs]
        if closed:
            violations.append(Violation("openHubRouting",
                                        f"({i + 1},{j + 1}) is routed through closed hub(s) {sorted({h + 1 for h in closed})}"))
            continue
        routed[(i, j)] = service

    for (i, j), service in routed.items():
        c, r, k, m = inst.position(i, j), service.level, service.k, service.m
        elapsed = inst.route_times[c][k][m] + sum(inst.h[hub][valid_hubs[hub]] for hub in service.hubs())
        if elapsed > inst.H[c][r] + VALIDATION_TOL:
            violations.append(Violation("timeLimit", f"({i + 1},{j + 1}) via ({k + 1},{m + 1}) takes {elapsed:.6g} "
                                                     f"> {inst.H[c][r]:.6g}"))
        if check_consistency:
            if i in valid_hubs and k != i:
                violations.append(Violation("consistency", f"origin {i + 1} of ({i + 1},{j + 1}) is an open hub "
                                                           f"but the first hub is {k + 1}"))
            if j in valid_hubs and m != j:
                violations.append(Violation("consistency", f"destination {j + 1} of ({i + 1},{j + 1}) is an open hub "
                                                           f"but the second hub is {m + 1}"))

    inflow = defaultdict(float)
    for (i, j), service in routed.items():
        for hub in service.hubs():
            inflow[hub] += inst.w[inst.position(i, j)][service.level]
    for k, l in sorted(valid_hubs.items()):
        flow, lower, upper = inflow[k], inst.lower_capacity(k, l), float(inst.W[k][l])
        if flow > upper + VALIDATION_TOL or (l > 0 and flow - lower <= VALIDATION_TOL):
            low_bracket = "[0" if l == 0 else f"({lower:.6g}"
            violations.append(Violation("capacityInterval", f"hub {k + 1} at level {l + 1} receives {flow:.6g}, "
                                                            f"outside {low_bracket}, {upper:.6g}]"))

    if len(routed) == len(sol.served) and len(valid_hubs) == len(sol.hub_levels):
        expected = make_solution(inst, sol.hub_levels, sol.served).objective
        if abs(expected - sol.objective) > 1e-6 * max(1.0, abs(expected)):
            violations.append(Violation("objectiveMismatch", f"reported {sol.objective:.9g}, recomputed {expected:.9g}"))
    return ValidationReport.of(violations)
