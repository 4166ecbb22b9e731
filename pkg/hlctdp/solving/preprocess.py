"""
Variable fixing by optimality conditions.

Every routing variable x[i][j][k][m][r] (and demand-level variable beta[i][j][r]) that some rule proves to be
zero in an optimal solution is tagged with the first rule that fixed it, in the order
A1, A2, A3 (assumption checks), C1a, C1b (dominated routes), C2 (unprofitable routes), C3 (too slow routes).

C1 relies on symmetric costs, on times equal to costs with gamma == alpha and on setup costs nondecreasing
in the service level; C2 only needs the nondecreasing setup costs and C3 holds for any valid instance.
`preprocess` skips a rule (with a warning) on instances that lack its preconditions.
"""
import logging
import time
from dataclasses import dataclass
from typing import Dict, Set, Tuple

import numpy as np

from hlctdp.config import VALIDATION_TOL
from hlctdp.instances.instance import Instance, RouteKey, setup_nondecreasing
from hlctdp.utils import as_percent

logger = logging.getLogger(__name__)

RULES = ("A1", "A2", "A3", "C1a", "C1b", "C2", "C3")
FREE = 0


def rule_code(rule: str) -> int:
    return RULES.index(rule) + 1


@dataclass(frozen=True, eq=False)
class FixMask:
    """ route_rule[c][k][m][r] and beta_rule[c][r] hold 0 for free variables, otherwise 1 + index of the fixing rule in RULES. """
    commodities: Tuple[Tuple[int, int], ...]
    route_rule: np.ndarray
    beta_rule: np.ndarray

    @classmethod
    def empty(cls, inst: Instance) -> 'FixMask':
        return cls(inst.commodities, np.zeros((inst.num_commodities, inst.n, inst.n, inst.R), dtype=np.int8),
                   np.zeros((inst.num_commodities, inst.R), dtype=np.int8))

    @property
    def routes_fixed(self) -> np.ndarray:
        return self.route_rule != FREE

    def is_route_fixed(self, c: int, k: int, m: int, r: int) -> bool:
        return self.route_rule[c, k, m, r] != FREE

    def is_beta_fixed(self, c: int, r: int) -> bool:
        return self.beta_rule[c, r] != FREE

    def attribution(self, key: RouteKey) -> str:
        code = self.route_rule[self.commodities.index((key.i, key.j)), key.k, key.m, key.r]
        return RULES[code - 1] if code else ""

    @property
    def fixed_routes(self) -> Set[RouteKey]:
        return {RouteKey(*self.commodities[c], k, m, r) for c, k, m, r in zip(*np.nonzero(self.route_rule))}

    @property
    def fixed_beta(self) -> Set[Tuple[int, int, int]]:
        return {(*self.commodities[c], int(r)) for c, r in zip(*np.nonzero(self.beta_rule))}

    def rule_counts(self) -> Dict[str, int]:
        counts = np.bincount(self.route_rule.ravel(), minlength=len(RULES) + 1)
        return {rule: int(counts[rule_code(rule)]) for rule in RULES}

    @property
    def num_fixed_routes(self) -> int:
        return int(np.count_nonzero(self.route_rule))


@dataclass(frozen=True)
class FixReport:
    pct_eliminated: float
    pct_c1: float
    pct_c2: float
    pct_c3: float
    pct_assumptions: float
    elapsed: float
    # each rule's share of the eliminated variables
    share_c1: float = 0.0
    share_c2: float = 0.0
    share_c3: float = 0.0

    def to_row(self, inst: Instance) -> Dict[str, float]:
        return {"alpha": inst.alpha, "n": inst.n, "L": inst.L, "R": inst.R,
                "pctE": self.pct_eliminated, "pctC1": self.pct_c1, "pctC2": self.pct_c2, "pctC3": self.pct_c3,
                "elapsed_ms": 1000.0 * self.elapsed,
                "pctA": self.pct_assumptions, "shareC1": self.share_c1, "shareC2": self.share_c2, "shareC3": self.share_c3}


PREPROCESS_COLUMNS = ["instance", "alpha", "n", "L", "R", "pctE", "pctC1", "pctC2", "pctC3", "elapsed_ms",
                      "pctA", "shareC1", "shareC2", "shareC3"]


def _endpoints(inst: Instance):
    origins = np.array([i for i, _ in inst.commodities], dtype=int)
    destinations = np.array([j for _, j in inst.commodities], dtype=int)
    return origins, destinations


def c1_applicable(inst: Instance) -> bool:
    """ Whether the route-cost dominance rules C1a and C1b are sound on `inst`. """
    return (np.allclose(inst.cost, inst.cost.T, rtol=0.0, atol=VALIDATION_TOL)
            and np.allclose(inst.time, inst.cost, rtol=0.0, atol=VALIDATION_TOL)
            and abs(inst.gamma - inst.alpha) <= VALIDATION_TOL
            and setup_nondecreasing(inst))


def c1a_triples(inst: Instance) -> np.ndarray:
    """ dominated[i][k][m]: k != m and cost[i][m] <= cost[i][k] + alpha*cost[k][m], i.e. going straight to m
    beats collecting at k first. """
    cost = inst.cost
    dominated = cost[:, None, :] <= cost[:, :, None] + inst.alpha * cost[None, :, :]
    dominated &= ~np.eye(inst.n, dtype=bool)[None, :, :]
    return dominated


def _c1a(inst: Instance) -> np.ndarray:
    if not inst.num_commodities:
        return np.zeros((0, inst.n, inst.n), dtype=bool)
    triples = c1a_triples(inst)
    origins, destinations = _endpoints(inst)
    # x[i][j][k][m] through the origin's triple, and x[j][i][m][k] through the destination's one
    return triples[origins] | triples[destinations].transpose(0, 2, 1)


def c1b_routes(inst: Instance) -> np.ndarray:
    """ fixed[c][k][m]: for each unordered hub pair exactly one orientation, the (m,k) one on ties. """
    if not inst.num_commodities:
        return np.zeros((0, inst.n, inst.n), dtype=bool)
    origins, destinations = _endpoints(inst)
    cost = inst.cost
    # keep_km[c][k][m] = cost[i][k] + cost[j][m]
    keep_km = cost[origins][:, :, None] + cost[destinations][:, None, :]
    keep_mk = keep_km.transpose(0, 2, 1)
    upper = np.triu(np.ones((inst.n, inst.n), dtype=bool), k=1)[None, :, :]
    fix_mk = upper & (keep_km <= keep_mk)
    fix_km = upper & (keep_km > keep_mk)
    return fix_mk.transpose(0, 2, 1) | fix_km


def _c2(inst: Instance) -> np.ndarray:
    return inst.q[:, None, None, :] - inst.route_costs[:, :, :, None] <= 0


def _c3(inst: Instance) -> np.ndarray:
    hmin = inst.min_transits
    transit = hmin[:, None] + hmin[None, :] - np.diag(hmin)
    return inst.route_times[:, :, :, None] + transit[None, :, :, None] > inst.H[:, None, None, :]


def _as_keys(inst: Instance, fixed: np.ndarray) -> Set[RouteKey]:
    if fixed.ndim == 3:
        fixed = np.broadcast_to(fixed[..., None], fixed.shape + (inst.R,))
    return {RouteKey(*inst.commodities[c], int(k), int(m), int(r)) for c, k, m, r in zip(*np.nonzero(fixed))}


def apply_c1(inst: Instance) -> Set[RouteKey]:
    return _as_keys(inst, _c1a(inst) | c1b_routes(inst))


def apply_c2(inst: Instance) -> Set[RouteKey]:
    return _as_keys(inst, _c2(inst))


def apply_c3(inst: Instance) -> Set[RouteKey]:
    return _as_keys(inst, _c3(inst))


def _assumption_arrays(inst: Instance):
    """ (route arrays, beta arrays) of A1, A2 and A3. """
    C, n, R = inst.num_commodities, inst.n, inst.R
    top = inst.W[:, -1]
    a1_beta = inst.w <= 0
    a3_beta = inst.w > top.max() if n else np.zeros((C, R), dtype=bool)
    too_big = inst.w[:, None, :] > top[None, :, None]   # (C, k, R)
    a2 = too_big[:, :, None, :] | too_big[:, None, :, :]
    a1 = np.broadcast_to(a1_beta[:, None, None, :], (C, n, n, R))
    a3 = np.broadcast_to(a3_beta[:, None, None, :], (C, n, n, R))
    return (a1, a2, a3), (a1_beta, a3_beta)


def apply_assumptions(inst: Instance) -> Tuple[Set[Tuple[int, int, int]], Set[RouteKey]]:
    (a1, a2, a3), (a1_beta, a3_beta) = _assumption_arrays(inst)
    fixed_beta = {(*inst.commodities[c], int(r)) for c, r in zip(*np.nonzero(a1_beta | a3_beta))}
    return fixed_beta, _as_keys(inst, a1 | a2 | a3)


def preprocess(inst: Instance) -> Tuple[FixMask, FixReport]:
    start = time.perf_counter()
    mask = FixMask.empty(inst)
    (a1, a2, a3), (a1_beta, a3_beta) = _assumption_arrays(inst)
    R = inst.R
    stages = [("A1", a1), ("A2", a2), ("A3", a3)]
    if c1_applicable(inst):
        stages += [("C1a", _c1a(inst)[..., None]), ("C1b", c1b_routes(inst)[..., None])]
    else:
        logger.warning(f"{inst.name or 'instance'}: costs are not symmetric, times differ from costs or setup costs "
                       f"decrease with the level; C1 is skipped")
    if setup_nondecreasing(inst):
        stages.append(("C2", _c2(inst)))
    else:
        logger.warning(f"{inst.name or 'instance'}: setup costs decrease with the level; C2 is skipped")
    stages.append(("C3", _c3(inst)))
    for rule, fixed in stages:
        fixed = np.broadcast_to(fixed, mask.route_rule.shape)
        mask.route_rule[fixed & (mask.route_rule == FREE)] = rule_code(rule)
    mask.beta_rule[a1_beta] = rule_code("A1")
    mask.beta_rule[a3_beta & (mask.beta_rule == FREE)] = rule_code("A3")
    elapsed = time.perf_counter() - start

    total = mask.route_rule.size
    counts = mask.rule_counts()
    eliminated = sum(counts.values())
    c1 = counts["C1a"] + counts["C1b"]
    report = FixReport(pct_eliminated=as_percent(eliminated, total),
                       pct_c1=as_percent(c1, total), pct_c2=as_percent(counts["C2"], total),
                       pct_c3=as_percent(counts["C3"], total),
                       pct_assumptions=as_percent(counts["A1"] + counts["A2"] + counts["A3"], total),
                       elapsed=elapsed,
                       share_c1=as_percent(c1, eliminated), share_c2=as_percent(counts["C2"], eliminated),
                       share_c3=as_percent(counts["C3"], eliminated))
    logger.info(f"preprocessing {inst.name or 'instance'}: {report.pct_eliminated:.2f}% of {total} x-variables fixed "
                f"(C1 {report.pct_c1:.2f}%, C2 {report.pct_c2:.2f}%, C3 {report.pct_c3:.2f}%) in {elapsed:.3f}s; R={R}")
    return mask, report
