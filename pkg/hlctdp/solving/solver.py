"""
Exact two-tier branch-and-bound for desk-scale instances.

The outer search fixes hubs one at a time (closed, or open at one service level), visiting hubs in decreasing
total capacity. A node is pruned when the sum over commodities of the best optimistic route profit, minus the
setup cost already committed, cannot beat the incumbent. At a leaf, the hub configuration is complete and the
commodity assignment is solved exactly by a second branch-and-bound over commodities, bounded by a fractional
knapsack on the capacity of hubs shared by all routes of a commodity.

The outer tree is split into the subtrees of the first hub; each subtree is searched from the same greedy warm
start, optionally in a process pool. Subtrees publish their incumbent objective to a shared cell and prune nodes
that cannot even tie it; the final answer is the best of the subtrees' answers, so with a zero gap tolerance it
does not depend on the number of workers.
"""
import logging
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from hlctdp.config import TIE_TOL, VALIDATION_TOL, worker_count
from hlctdp.instances.instance import Instance, setup_nondecreasing, validate_instance
from hlctdp.solving.preprocess import FixMask
from hlctdp.solving.solution import (HubConfig, Service, Solution, SolveLogRow, SolveStatus, empty_solution,
                                     make_solution)

logger = logging.getLogger(__name__)

UNDECIDED, CLOSED = -2, -1

# objective cell shared by the subtree searches of one solve
_shared_best = None


def _share_incumbent(cell) -> None:
    global _shared_best
    _shared_best = cell


@dataclass(frozen=True)
class SolverConfig:
    time_limit: float = field(default=7200.0, metadata={"help": "wall-clock limit in seconds"})
    gap_tol: float = field(default=1e-5, metadata={"help": "relative optimality tolerance used for pruning"})
    seed: int = field(default=0, metadata={"help": "recorded for reproducibility; the search itself is deterministic"})
    max_hubs: Optional[int] = field(default=None, metadata={"help": "heuristic cap on simultaneously open hubs"})
    workers: Optional[int] = field(default=None, metadata={"help": "worker processes (default: HLCTDP_THREADS or 1)"})
    log_every: int = field(default=1000, metadata={"help": "emit a solve log row every this many outer nodes"})

    def __post_init__(self):
        if self.gap_tol < 0:
            raise ValueError(f"gap_tol must be nonnegative, got {self.gap_tol}")


class Option(NamedTuple):
    profit: float
    r: int
    k: int
    m: int
    demand: float
    route_time: float
    time_limit: float


class _Timeout(Exception):
    pass


def relative_gap(bound: float, incumbent: float) -> float:
    return max(0.0, bound - incumbent) / (1e-10 + abs(incumbent))


def candidate_options(inst: Instance, mask: Optional[FixMask] = None) -> List[List[Option]]:
    """ Per commodity, the routes that can be used in some hub configuration: unmasked, within the largest
    capacity of both hubs and within the time limit at the smallest transit times. Sorted by decreasing profit.
    Unprofitable routes are only kept when setup costs are not monotone in the service level, since otherwise
    dropping such a commodity and lowering hub levels never hurts. """
    keep_unprofitable = not setup_nondecreasing(inst)
    top = inst.W[:, -1]
    hmin = inst.min_transits
    transit = hmin[:, None] + hmin[None, :] - np.diag(hmin)
    fits = lambda demand: (demand <= top[:, None] + VALIDATION_TOL) & (demand <= top[None, :] + VALIDATION_TOL)
    options = []
    for c in range(inst.num_commodities):
        found = []
        for r in range(inst.R):
            demand, limit = float(inst.w[c, r]), float(inst.H[c, r])
            profit = demand * (inst.q[c, r] - inst.route_costs[c])
            ok = fits(demand) & (inst.route_times[c] + transit <= limit + VALIDATION_TOL)
            if not keep_unprofitable:
                ok &= profit > 0
            if mask is not None:
                ok &= ~mask.routes_fixed[c, :, :, r]
            for k, m in np.argwhere(ok):
                found.append(Option(float(profit[k, m]), r, int(k), int(m), demand, float(inst.route_times[c, k, m]), limit))
        found.sort(key=lambda o: (-o.profit, o.r, o.k, o.m))
        options.append(found)
    return options


def _fits_config(inst: Instance, levels: Sequence[int], i: int, j: int, o: Option) -> bool:
    """ Whether option `o` of commodity (i,j) is usable when every hub of `levels` is decided. """
    lk, lm = levels[o.k], levels[o.m]
    if lk < 0 or lm < 0:
        return False
    if (levels[i] >= 0 and o.k != i) or (levels[j] >= 0 and o.m != j):
        return False
    if o.demand > inst.W[o.k, lk] + VALIDATION_TOL or o.demand > inst.W[o.m, lm] + VALIDATION_TOL:
        return False
    elapsed = o.route_time + inst.h[o.k, lk] + (inst.h[o.m, lm] if o.m != o.k else 0.0)
    return elapsed <= o.time_limit + VALIDATION_TOL


def feasible_options(inst: Instance, options: List[List[Option]], levels: Sequence[int]) -> List[List[Option]]:
    return [[o for o in opts if _fits_config(inst, levels, i, j, o)]
            for (i, j), opts in zip(inst.commodities, options)]


def _levels_of(inst: Instance, config: HubConfig) -> List[int]:
    levels = [CLOSED] * inst.n
    for k, l in config.items():
        levels[k] = l
    return levels


def _solution(inst: Instance, levels: Sequence[int], choice: Dict[int, Option], **extra) -> Solution:
    hub_levels = {k: l for k, l in enumerate(levels) if l >= 0}
    served = {inst.commodities[c]: Service(o.r, o.k, o.m) for c, o in choice.items()}
    return make_solution(inst, hub_levels, served, **extra)


def _greedy(inst: Instance, options: List[List[Option]], levels: Sequence[int]) -> Solution:
    feasible = feasible_options(inst, options, levels)
    flows = np.zeros(inst.n)
    choice: Dict[int, Option] = {}
    order = sorted((c for c in range(len(feasible)) if feasible[c] and feasible[c][0].profit > 0),
                   key=lambda c: (-feasible[c][0].profit, c))
    for c in order:
        for o in feasible[c]:
            if o.profit <= 0:
                break
            hubs = (o.k,) if o.k == o.m else (o.k, o.m)
            if all(flows[h] + o.demand <= inst.W[h, levels[h]] + VALIDATION_TOL for h in hubs):
                for h in hubs:
                    flows[h] += o.demand
                choice[c] = o
                break
    # lower each hub to the smallest level holding its flow, close unused hubs
    final = list(levels)
    for k, l in enumerate(levels):
        if l < 0:
            continue
        if flows[k] <= VALIDATION_TOL:
            final[k] = CLOSED
            continue
        final[k] = next(lv for lv in range(inst.L) if flows[k] <= inst.W[k, lv] + VALIDATION_TOL)
    return _solution(inst, final, choice)


def lower_bound_greedy(inst: Instance, config: HubConfig, mask: Optional[FixMask] = None) -> Solution:
    """ Feasible solution for (at most) the hubs of `config`: commodities are inserted by decreasing best profit
    whenever capacities and time limits allow; hubs then drop to the level matching their flow. """
    return _greedy(inst, candidate_options(inst, mask), _levels_of(inst, config))


def warm_start(inst: Instance, options: List[List[Option]], max_hubs: Optional[int] = None) -> Solution:
    configs = [{}, {k: inst.L - 1 for k in inst.K}]
    configs += [{k: l} for k in inst.K for l in range(inst.L)]
    best = None
    for config in configs:
        candidate = _greedy(inst, options, _levels_of(inst, config))
        if max_hubs is not None and len(candidate.hub_levels) > max_hubs:
            continue
        if candidate.beats(best):
            best = candidate
    return best


class _AssignmentSearch:
    """ Exact commodity assignment for a complete hub configuration. """

    def __init__(self, inst: Instance, levels: Sequence[int], feasible: List[List[Option]], check_time):
        self.inst = inst
        self.check_time = check_time
        self.capacity = np.array([inst.W[k, l] if l >= 0 else 0.0 for k, l in enumerate(levels)])
        self.lower = {k: inst.lower_capacity(k, l) for k, l in enumerate(levels) if l > 0}
        self.items = sorted((c for c in range(len(feasible)) if feasible[c]), key=lambda c: (-feasible[c][0].profit, c))
        self.options = [feasible[c] for c in self.items]
        self.flows = np.zeros(inst.n)
        self.nodes = 0
        self.best_value = -math.inf
        self.best_choice: Optional[Dict[int, Option]] = None
        # suffix_flow[t][k]: most flow items t.. can still send into hub k
        self.suffix_flow = np.zeros((len(self.items) + 1, inst.n))
        for t in range(len(self.items) - 1, -1, -1):
            most = np.zeros(inst.n)
            for o in self.options[t]:
                for h in {o.k, o.m}:
                    most[h] = max(most[h], o.demand)
            self.suffix_flow[t] = self.suffix_flow[t + 1] + most

    def relaxation(self, t: int) -> float:
        residual = self.capacity - self.flows
        total = 0.0
        groups: Dict[int, List[Tuple[float, float]]] = {}
        for opts in self.options[t:]:
            value, weight, common = 0.0, math.inf, None
            for o in opts:
                if o.profit <= 0:
                    break
                if o.demand > residual[o.k] + VALIDATION_TOL or o.demand > residual[o.m] + VALIDATION_TOL:
                    continue
                value = max(value, o.profit)
                weight = min(weight, o.demand)
                hubs = {o.k, o.m}
                common = hubs if common is None else common & hubs
            if value <= 0:
                continue
            if common:
                hub = min(common, key=lambda h: (residual[h], h))
                groups.setdefault(hub, []).append((value, weight))
            else:
                total += value
        for hub, items in groups.items():
            room = residual[hub]
            for value, weight in sorted(items, key=lambda vw: -vw[0] / vw[1] if vw[1] > 0 else -math.inf):
                if weight <= room + VALIDATION_TOL:
                    total += value
                    room -= weight
                else:
                    total += value * max(room, 0.0) / weight
                    break
        return total

    def _visit(self, t: int, value: float, choice: Dict[int, Option]):
        self.nodes += 1
        if self.nodes % 256 == 0:
            self.check_time()
        if value + self.relaxation(t) <= self.best_value:
            return
        if t == len(self.items):
            if all(self.flows[k] - lw > VALIDATION_TOL for k, lw in self.lower.items()):
                self.best_value, self.best_choice = value, dict(choice)
            return
        for k, lw in self.lower.items():
            if self.flows[k] + self.suffix_flow[t][k] - lw <= VALIDATION_TOL:
                return
        c = self.items[t]
        for o in self.options[t]:
            hubs = (o.k,) if o.k == o.m else (o.k, o.m)
            if any(self.flows[h] + o.demand > self.capacity[h] + VALIDATION_TOL for h in hubs):
                continue
            for h in hubs:
                self.flows[h] += o.demand
            choice[c] = o
            self._visit(t + 1, value + o.profit, choice)
            del choice[c]
            for h in hubs:
                self.flows[h] -= o.demand
        self._visit(t + 1, value, choice)

    def solve(self, threshold: float) -> Optional[Tuple[float, Dict[int, Option]]]:
        """ Best assignment whose value exceeds `threshold`, or None. """
        self.best_value = threshold
        # unconstrained best: optimal whenever it is capacity feasible
        choice = {c: opts[0] for c, opts in zip(self.items, self.options) if opts[0].profit > 0}
        value = sum(o.profit for o in choice.values())
        flows = np.zeros(self.inst.n)
        for o in choice.values():
            for h in {o.k, o.m}:
                flows[h] += o.demand
        if np.all(flows <= self.capacity + VALIDATION_TOL) and all(flows[k] - lw > VALIDATION_TOL for k, lw in self.lower.items()):
            return (value, choice) if value > threshold else None
        self._visit(0, 0.0, {})
        return (self.best_value, self.best_choice) if self.best_choice is not None else None


class _SubtreeResult(NamedTuple):
    best: Solution
    nodes: int
    timed_out: bool
    open_bound: float
    tolerance_bound: float
    log: Tuple[SolveLogRow, ...]


class _OuterSearch:

    def __init__(self, inst: Instance, options: List[List[Option]], cfg: SolverConfig, incumbent: Solution,
                 time_budget: float, root_bound: float):
        self.inst = inst
        self.options = options
        self.cfg = cfg
        self.best = incumbent
        self.start = time.perf_counter()
        self.deadline = self.start + time_budget
        self.root_bound = root_bound
        self.order = hub_order(inst)
        self.nodes = 0
        self.timed_out = False
        self.open_bound = -math.inf
        # best bound among nodes pruned only thanks to the gap tolerance
        self.tolerance_bound = -math.inf
        self.log: List[SolveLogRow] = []

    def check_time(self):
        if time.perf_counter() > self.deadline:
            raise _Timeout()

    def bound(self, levels: Sequence[int], committed: float) -> float:
        return assignment_bound(self.inst, self.options, levels) - committed

    def prune_threshold(self) -> float:
        incumbent = self.best.objective
        return incumbent + max(self.cfg.gap_tol * abs(incumbent), TIE_TOL)

    @staticmethod
    def shared_objective() -> float:
        return _shared_best.value if _shared_best is not None else -math.inf

    @staticmethod
    def publish(objective: float):
        if _shared_best is None:
            return
        with _shared_best.get_lock():
            if objective > _shared_best.value:
                _shared_best.value = objective

    def _log(self):
        incumbent = self.best.objective
        row = SolveLogRow(self.nodes, incumbent, self.root_bound, relative_gap(self.root_bound, incumbent),
                          time.perf_counter() - self.start)
        self.log.append(row)
        logger.info(f"nodes={row.nodes} incumbent={row.incumbent:.6g} bound={row.bound:.6g} gap={row.gap:.3%} "
                    f"elapsed={row.elapsed:.1f}s")

    def visit(self, levels: List[int], depth: int, committed: float, n_open: int):
        self.nodes += 1
        if self.cfg.log_every and self.nodes % self.cfg.log_every == 0:
            self._log()
        bound = self.bound(levels, committed)
        if self.timed_out or time.perf_counter() > self.deadline:
            self.timed_out = True
            self.open_bound = max(self.open_bound, bound)
            return
        if bound <= self.prune_threshold():
            if bound > self.best.objective + TIE_TOL:
                self.tolerance_bound = max(self.tolerance_bound, bound)
            return
        # another subtree already holds a solution this node cannot even tie
        if bound < self.shared_objective() - TIE_TOL:
            return
        if depth == len(self.order):
            self.leaf(levels, committed, bound)
            return
        hub = self.order[depth]
        choices = list(range(self.inst.L)) if self.cfg.max_hubs is None or n_open < self.cfg.max_hubs else []
        for l in choices + [CLOSED]:
            levels[hub] = l
            opened = l >= 0
            self.visit(levels, depth + 1, committed + (self.inst.G[hub, l] if opened else 0.0), n_open + opened)
        levels[hub] = UNDECIDED

    def leaf(self, levels: List[int], committed: float, bound: float):
        inst = self.inst
        config_key = (sum(1 for l in levels if l >= 0), tuple(k for k, l in enumerate(levels) if l >= 0))
        margin = -TIE_TOL if config_key < self.best.key() else TIE_TOL
        search = _AssignmentSearch(inst, levels, feasible_options(inst, self.options, levels), self.check_time)
        try:
            threshold = max(self.best.objective + margin, self.shared_objective() - TIE_TOL)
            found = search.solve(threshold + committed)
        except _Timeout:
            self.timed_out = True
            self.open_bound = max(self.open_bound, bound)
            found = (search.best_value, search.best_choice) if search.best_choice is not None else None
        if found is None:
            return
        candidate = _solution(inst, levels, found[1])
        if candidate.beats(self.best):
            logger.debug(f"new incumbent {candidate}")
            self.best = candidate
            self.publish(candidate.objective)

    def run(self, levels: List[int], depth: int, committed: float, n_open: int) -> _SubtreeResult:
        self.visit(levels, depth, committed, n_open)
        return _SubtreeResult(self.best, self.nodes, self.timed_out, self.open_bound, self.tolerance_bound,
                              tuple(self.log))


def hub_order(inst: Instance) -> List[int]:
    return sorted(inst.K, key=lambda k: (-float(inst.W[k].sum()), k))


def assignment_bound(inst: Instance, options: List[List[Option]], levels: Sequence[int]) -> float:
    """ Upper bound on the assignment profit of any completion of a partial configuration. Undecided hubs
    (UNDECIDED) count with their smallest transit time and largest capacity, closed hubs (CLOSED) are unusable,
    and consistency is only enforced for hubs already decided open. """
    total = 0.0
    for (i, j), opts in zip(inst.commodities, options):
        for o in opts:
            if o.profit <= 0:
                break
            lk, lm = levels[o.k], levels[o.m]
            if lk == CLOSED or lm == CLOSED:
                continue
            if (levels[i] >= 0 and o.k != i) or (levels[j] >= 0 and o.m != j):
                continue
            if (lk >= 0 and o.demand > inst.W[o.k, lk] + VALIDATION_TOL) or (lm >= 0 and o.demand > inst.W[o.m, lm] + VALIDATION_TOL):
                continue
            hk = inst.h[o.k, lk] if lk >= 0 else inst.min_transits[o.k]
            hm = 0.0 if o.m == o.k else (inst.h[o.m, lm] if lm >= 0 else inst.min_transits[o.m])
            if o.route_time + hk + hm > o.time_limit + VALIDATION_TOL:
                continue
            total += o.profit
            break
    return total


def completion_bound(inst: Instance, decided: Dict[int, Optional[int]], mask: Optional[FixMask] = None) -> float:
    """ Outer node bound for a partial configuration: `decided` maps hubs to a level, or to None when closed;
    hubs not in `decided` are undecided. """
    levels = [UNDECIDED] * inst.n
    for k, l in decided.items():
        levels[k] = CLOSED if l is None else l
    committed = sum(inst.G[k, l] for k, l in decided.items() if l is not None)
    return assignment_bound(inst, candidate_options(inst, mask), levels) - committed


def _search_subtree(args) -> _SubtreeResult:
    inst, options, cfg, incumbent, deadline, root_bound, levels, committed, n_open = args
    # wall-clock deadline, shared by all worker processes
    search = _OuterSearch(inst, options, cfg, incumbent, deadline - time.time(), root_bound)
    return search.run(list(levels), 1, committed, n_open)


def solve_exact(inst: Instance, mask: Optional[FixMask] = None, cfg: SolverConfig = SolverConfig()) -> Solution:
    if cfg.time_limit <= 0:
        raise ValueError(f"time limit must be positive, got {cfg.time_limit}")
    start = time.perf_counter()
    violations = validate_instance(inst)
    if violations:
        logger.warning(f"{inst.name or 'instance'} violates {len(violations)} level or assumption conditions, "
                       f"first: {violations[0]}")
        return empty_solution(inst, status=SolveStatus.INFEASIBLE_INPUT, elapsed=time.perf_counter() - start)
    if not inst.num_commodities:
        return empty_solution(inst, elapsed=time.perf_counter() - start)

    options = candidate_options(inst, mask)
    incumbent = warm_start(inst, options, cfg.max_hubs)
    root_levels = [UNDECIDED] * inst.n
    root_bound = assignment_bound(inst, options, root_levels)
    logger.info(f"solving {inst.name or 'instance'}: warm start {incumbent.objective:.6g}, root bound {root_bound:.6g}")

    first = hub_order(inst)[0]
    choices = list(range(inst.L)) if cfg.max_hubs is None or cfg.max_hubs > 0 else []
    deadline = time.time() + cfg.time_limit - (time.perf_counter() - start)
    tasks = []
    for l in choices + [CLOSED]:
        levels = list(root_levels)
        levels[first] = l
        committed = inst.G[first, l] if l >= 0 else 0.0
        tasks.append((inst, options, cfg, incumbent, deadline, root_bound, levels, committed, int(l >= 0)))

    workers = min(cfg.workers or worker_count(), len(tasks))
    cell = multiprocessing.Value("d", incumbent.objective)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_share_incumbent, initargs=(cell,)) as pool:
            results = list(pool.map(_search_subtree, tasks))
    else:
        _share_incumbent(cell)
        try:
            results = [_search_subtree(task) for task in tasks]
        finally:
            _share_incumbent(None)

    best = incumbent
    for result in results:
        if result.best.beats(best):
            best = result.best
    nodes = 1 + sum(r.nodes for r in results)
    timed_out = any(r.timed_out for r in results)
    log = tuple(sorted((row for r in results for row in r.log), key=lambda row: row.elapsed))
    elapsed = time.perf_counter() - start

    if timed_out:
        bound = max([best.objective] + [max(r.open_bound, r.tolerance_bound) for r in results])
        status = SolveStatus.FEASIBLE
    elif cfg.max_hubs is not None and cfg.max_hubs < inst.n:
        bound = max(best.objective, root_bound)
        status = SolveStatus.FEASIBLE
    else:
        bound = max([best.objective] + [r.tolerance_bound for r in results])
        status = SolveStatus.EMPTY if not best.hub_levels and not best.served else SolveStatus.OPTIMAL
    gap = relative_gap(bound, best.objective)
    solution = make_solution(inst, best.hub_levels, best.served, status=status, gap=gap, bound=bound,
                             nodes=nodes, elapsed=elapsed, log=log)
    logger.info(f"solved {inst.name or 'instance'}: {solution} gap={gap:.3%} nodes={nodes} in {elapsed:.2f}s")
    return solution
