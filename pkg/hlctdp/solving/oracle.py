"""
Brute-force enumeration of tiny instances, used as ground truth for the solver, the formulations and preprocessing.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterator, List, Optional

from hlctdp.config import VALIDATION_TOL
from hlctdp.instances.instance import Instance
from hlctdp.solving.solution import HubConfig, Service, Solution, SolveStatus, make_solution

logger = logging.getLogger(__name__)


class OracleLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleLimits:
    max_configs: int = field(default=10 ** 6, metadata={"help": "largest number of hub configurations to enumerate"})
    max_assignments: int = field(default=10 ** 7, metadata={"help": "largest number of commodity assignments per configuration"})

    def __post_init__(self):
        if self.max_configs <= 0 or self.max_assignments <= 0:
            raise ValueError("oracle limits must be positive")


def configurations(inst: Instance) -> Iterator[HubConfig]:
    """ Every hub configuration: each hub closed or open at one service level. """
    for choice in itertools.product(range(-1, inst.L), repeat=inst.n):
        yield {k: l for k, l in enumerate(choice) if l >= 0}


def _route_options(inst: Instance, config: HubConfig, c: int, check_time: bool, consistency: bool) -> List[Service]:
    i, j = inst.commodities[c]
    options = []
    for r in range(inst.R):
        for k in sorted(config):
            if consistency and i in config and k != i:
                continue
            for m in sorted(config):
                if consistency and j in config and m != j:
                    continue
                if check_time:
                    transit = inst.h[k][config[k]] + (inst.h[m][config[m]] if m != k else 0.0)
                    if inst.route_times[c][k][m] + transit > inst.H[c][r] + VALIDATION_TOL:
                        continue
                options.append(Service(r, k, m))
    return options


def _check_product(options: List[List[Service]], limits: OracleLimits):
    product = 1
    for opts in options:
        product *= 1 + len(opts)
        if product > limits.max_assignments:
            raise OracleLimitError(f"more than {limits.max_assignments} commodity assignments for one configuration")


def enumerate_candidates(inst: Instance, config: HubConfig, limits: OracleLimits = OracleLimits()) -> Iterator[Solution]:
    """ Every assignment of the commodities (skip, or any level and route over open hubs) for a fixed configuration,
    without time, consistency or capacity filtering. """
    options = [_route_options(inst, config, c, check_time=False, consistency=False) for c in range(inst.num_commodities)]
    _check_product(options, limits)
    for choice in itertools.product(*[[None] + opts for opts in options]):
        served = {inst.commodities[c]: s for c, s in enumerate(choice) if s is not None}
        yield make_solution(inst, config, served)


def _best_assignment(inst: Instance, config: HubConfig, options: List[List[Service]]):
    """ Exact capacity-feasible maximum over all assignments by depth-first enumeration. """
    upper = {k: float(inst.W[k][l]) for k, l in config.items()}
    lower = {k: inst.lower_capacity(k, l) for k, l in config.items() if l > 0}
    flows = dict.fromkeys(config, 0.0)
    chosen: List[Optional[Service]] = [None] * len(options)
    best = [None, None]  # value, assignment

    def profit(c, s):
        return inst.w[c][s.level] * (inst.q[c][s.level] - inst.route_costs[c][s.k][s.m])

    def visit(c, value):
        if c == len(options):
            if all(flows[k] - lw > VALIDATION_TOL for k, lw in lower.items()):
                if best[0] is None or value > best[0] + VALIDATION_TOL:
                    best[0], best[1] = value, list(chosen)
            return
        visit(c + 1, value)
        for s in options[c]:
            demand = inst.w[c][s.level]
            hubs = s.hubs()
            if any(flows[h] + demand > upper[h] + VALIDATION_TOL for h in hubs):
                continue
            for h in hubs:
                flows[h] += demand
            chosen[c] = s
            visit(c + 1, value + profit(c, s))
            chosen[c] = None
            for h in hubs:
                flows[h] -= demand

    visit(0, 0.0)
    return best


def best_for_config(inst: Instance, config: HubConfig, limits: OracleLimits = OracleLimits(),
                    enforce_consistency: bool = True) -> Optional[Solution]:
    """ Best feasible assignment for exactly the hub configuration `config`, or None if none meets the
    capacity lower bounds. """
    options = [_route_options(inst, config, c, check_time=True, consistency=enforce_consistency)
               for c in range(inst.num_commodities)]
    _check_product(options, limits)
    _, choice = _best_assignment(inst, config, options)
    if choice is None:
        return None
    served = {inst.commodities[c]: s for c, s in enumerate(choice) if s is not None}
    return make_solution(inst, config, served, status=SolveStatus.OPTIMAL)


def brute_force(inst: Instance, limits: OracleLimits = OracleLimits(), enforce_consistency: bool = True) -> Solution:
    """ Exact optimum by full enumeration. `enforce_consistency=False` drops the rule that an open origin
    (destination) hub must be its commodity's first (second) hub. """
    n_configs = (inst.L + 1) ** inst.n
    if n_configs > limits.max_configs:
        raise OracleLimitError(f"{n_configs} hub configurations exceed the limit of {limits.max_configs}")
    best: Optional[Solution] = None
    for config in configurations(inst):
        candidate = best_for_config(inst, config, limits, enforce_consistency)
        if candidate is not None and candidate.beats(best):
            best = candidate
    if not best.hub_levels and not best.served:
        return make_solution(inst, {}, {}, status=SolveStatus.EMPTY)
    logger.debug(f"oracle optimum {best}")
    return best
