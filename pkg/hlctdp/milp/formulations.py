"""
The two MILP formulations of the HLCTDP.

F1 uses route variables x[i][j][k][m] without demand level plus leg variables f/s/o (first hub, second hub,
single hub) per service level and continuous route flows g. F2 uses level-indexed route variables
x[i][j][k][m][r] and continuous per-hub transit times t.

Both objectives maximize revenue minus routing cost minus setup cost; in F1 the routing cost is charged
on the flows g.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Tuple

import numpy as np

from hlctdp.instances.instance import Instance, require_valid
from hlctdp.milp.model import Model, VarKind, var_name
from hlctdp.solving.preprocess import FixMask
from hlctdp.solving.solution import Service, Solution, SolveStatus, make_solution

logger = logging.getLogger(__name__)

BINARY, CONTINUOUS = VarKind.BINARY, VarKind.CONTINUOUS


class Formulation(str, Enum):
    F1 = "f1"
    F2 = "f2"


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class BuildOptions:
    include_consistency: bool = field(default=True, metadata={"help": "add the origin/destination consistency constraints"})
    include_valid_inequality: bool = field(default=False, metadata={"help": "F2 only: bound each transit time by the used-hub indicator"})
    fix_mask: Optional[FixMask] = field(default=None, metadata={"help": "variables fixed to zero by preprocessing (upper bound 0)"})


@dataclass(frozen=True, eq=False)
class F1VarIndex:
    """ Variable ids by commodity position c: Y[k][l], beta[c][r], x[c][k][m], f/s/o[c][k][l], g[c][k][m]. """
    Y: np.ndarray
    beta: np.ndarray
    x: np.ndarray
    f: np.ndarray
    s: np.ndarray
    o: np.ndarray
    g: np.ndarray
    size: int


@dataclass(frozen=True, eq=False)
class F2VarIndex:
    """ Variable ids by commodity position c: Y[k][l], beta[c][r], x[c][k][m][r], tbar[c][k]. """
    Y: np.ndarray
    beta: np.ndarray
    x: np.ndarray
    tbar: np.ndarray
    size: int


class ModelSize(NamedTuple):
    binary: int
    continuous: int
    constraints: int


def size_formula(which: Formulation, n_hubs: int, n_commodities: int, L: int, R: int,
                 include_consistency: bool = True, valid_inequality: bool = False) -> ModelSize:
    K, C = n_hubs, n_commodities
    consistency = 0 if include_consistency else 2 * C
    if Formulation(which) == Formulation.F1:
        return ModelSize(binary=C * K * K + 3 * C * K * L + K * L + C * R,
                         continuous=C * K * K,
                         constraints=2 * K + C * (6 + 4 * K + K * L + K * K) - consistency)
    return ModelSize(binary=C * K * K * R + K * L + C * R,
                     continuous=C * K,
                     constraints=2 * K + C * (4 + 3 * K + R) - consistency + (C * K if valid_inequality else 0))


def model_size(inst: Instance, which: Formulation, include_consistency: bool = True,
               valid_inequality: bool = False) -> ModelSize:
    """ Structural (mask-independent) variable and constraint counts of a formulation. """
    return size_formula(which, inst.n, inst.num_commodities, inst.L, inst.R, include_consistency, valid_inequality)


def _name(family: str, *indices: int) -> str:
    return var_name(family, indices)


def _add_hub_variables(model: Model, inst: Instance) -> np.ndarray:
    Y = np.empty((inst.n, inst.L), dtype=np.int64)
    for k in inst.K:
        for l in range(inst.L):
            Y[k, l] = model.add_variable("Y", (k, l), BINARY)
    return Y


def _add_beta_variables(model: Model, inst: Instance, mask: Optional[FixMask]) -> np.ndarray:
    beta = np.empty((inst.num_commodities, inst.R), dtype=np.int64)
    for c, (i, j) in enumerate(inst.commodities):
        for r in range(inst.R):
            fixed = mask is not None and mask.is_beta_fixed(c, r)
            beta[c, r] = model.add_variable("beta", (i, j, r), BINARY, upper=0.0 if fixed else 1.0)
    return beta


def _add_capacity_constraints(model: Model, inst: Instance, Y: np.ndarray, inflow, lower_offset: float):
    """ Two rows per hub: inflow within (W^{l-1} [+ offset for l > 1], W^l] of the activated level. """
    for k in inst.K:
        flow = inflow(k)
        lower = [(Y[k, l], -(inst.lower_capacity(k, l) + (lower_offset if l > 0 else 0.0))) for l in range(inst.L)]
        upper = [(Y[k, l], -float(inst.W[k, l])) for l in range(inst.L)]
        model.add_constraint(_name("cap", k) + "[lo]", flow + lower, ">=", 0.0)
        model.add_constraint(_name("cap", k) + "[up]", flow + upper, "<=", 0.0)


def build_f1(inst: Instance, opts: BuildOptions = BuildOptions()) -> Tuple[Model, F1VarIndex]:
    require_valid(inst)
    n, L, R, C = inst.n, inst.L, inst.R, inst.num_commodities
    mask = opts.fix_mask
    model = Model(f"{inst.name or 'hlctdp'}_f1")

    Y = _add_hub_variables(model, inst)
    beta = _add_beta_variables(model, inst, mask)
    x = np.empty((C, n, n), dtype=np.int64)
    for c, (i, j) in enumerate(inst.commodities):
        for k in range(n):
            for m in range(n):
                fixed = mask is not None and bool(mask.routes_fixed[c, k, m].all())
                x[c, k, m] = model.add_variable("x", (i, j, k, m), BINARY, upper=0.0 if fixed else 1.0)
    legs = {}
    for family in ("f", "s", "o"):
        legs[family] = np.empty((C, n, L), dtype=np.int64)
        for c, (i, j) in enumerate(inst.commodities):
            for k in range(n):
                for l in range(L):
                    legs[family][c, k, l] = model.add_variable(family, (i, j, k, l), BINARY)
    f, s, o = legs["f"], legs["s"], legs["o"]
    g = np.empty((C, n, n), dtype=np.int64)
    for c, (i, j) in enumerate(inst.commodities):
        for k in range(n):
            for m in range(n):
                g[c, k, m] = model.add_variable("g", (i, j, k, m), CONTINUOUS)

    costs = inst.route_costs
    times = inst.route_times
    objective = [(beta[c, r], inst.q[c, r] * inst.w[c, r]) for c in range(C) for r in range(R)]
    objective += [(Y[k, l], -inst.G[k, l]) for k in range(n) for l in range(L)]
    objective += [(g[c, k, m], -costs[c, k, m]) for c in range(C) for k in range(n) for m in range(n)]
    model.set_objective(objective)

    for k in range(n):
        model.add_constraint(_name("hub_level", k), [(Y[k, l], 1.0) for l in range(L)], "<=", 1.0)
    for c, (i, j) in enumerate(inst.commodities):
        model.add_constraint(_name("dem_level", i, j), [(beta[c, r], 1.0) for r in range(R)], "<=", 1.0)
        model.add_constraint(_name("route", i, j),
                             [(beta[c, r], 1.0) for r in range(R)] + [(x[c, k, m], -1.0) for k in range(n) for m in range(n)],
                             "=", 0.0)
        for k in range(n):
            others = [m for m in range(n) if m != k]
            model.add_constraint(_name("first", i, j, k),
                                 [(f[c, k, l], 1.0) for l in range(L)] + [(x[c, k, m], -1.0) for m in others], "=", 0.0)
            model.add_constraint(_name("second", i, j, k),
                                 [(s[c, k, l], 1.0) for l in range(L)] + [(x[c, m, k], -1.0) for m in others], "=", 0.0)
            model.add_constraint(_name("single", i, j, k),
                                 [(o[c, k, l], 1.0) for l in range(L)] + [(x[c, k, k], -1.0)], "=", 0.0)
            model.add_constraint(_name("open", i, j, k),
                                 [(x[c, k, k], 1.0)] + [(x[c, k, m], 1.0) for m in others] + [(x[c, m, k], 1.0) for m in others]
                                 + [(Y[k, l], -1.0) for l in range(L)], "<=", 0.0)
            for l in range(L):
                model.add_constraint(_name("leg", i, j, k, l),
                                     [(f[c, k, l], 1.0), (s[c, k, l], 1.0), (o[c, k, l], 1.0), (Y[k, l], -1.0)], "<=", 0.0)
        big_m = float(inst.w[c].max())
        for k in range(n):
            for m in range(n):
                model.add_constraint(_name("flow_cap", i, j, k, m), [(g[c, k, m], 1.0), (x[c, k, m], -big_m)], "<=", 0.0)
        model.add_constraint(_name("flow", i, j),
                             [(g[c, k, m], 1.0) for k in range(n) for m in range(n)] + [(beta[c, r], -inst.w[c, r]) for r in range(R)],
                             "=", 0.0)
        model.add_constraint(_name("time", i, j),
                             [(x[c, k, m], times[c, k, m]) for k in range(n) for m in range(n)]
                             + [(leg[c, k, l], inst.h[k, l]) for leg in (f, s, o) for k in range(n) for l in range(L)]
                             + [(beta[c, r], -inst.H[c, r]) for r in range(R)], "<=", 0.0)
        if opts.include_consistency:
            model.add_constraint(_name("cons_origin", i, j),
                                 [(x[c, k, m], 1.0) for k in range(n) if k != i for m in range(n)]
                                 + [(Y[i, l], 1.0) for l in range(L)], "<=", 1.0)
            model.add_constraint(_name("cons_destination", i, j),
                                 [(x[c, k, m], 1.0) for k in range(n) for m in range(n) if m != j]
                                 + [(Y[j, l], 1.0) for l in range(L)], "<=", 1.0)

    def inflow(k):
        terms = []
        for c in range(C):
            terms.append((g[c, k, k], 1.0))
            terms.extend((g[c, k, m], 1.0) for m in range(n) if m != k)
            terms.extend((g[c, m, k], 1.0) for m in range(n) if m != k)
        return terms

    _add_capacity_constraints(model, inst, Y, inflow, lower_offset=0.0)
    model.freeze()
    logger.info(f"built {model}")
    return model, F1VarIndex(Y=Y, beta=beta, x=x, f=f, s=s, o=o, g=g, size=model.num_variables)


def build_f2(inst: Instance, opts: BuildOptions = BuildOptions()) -> Tuple[Model, F2VarIndex]:
    require_valid(inst)
    n, L, R, C = inst.n, inst.L, inst.R, inst.num_commodities
    mask = opts.fix_mask
    model = Model(f"{inst.name or 'hlctdp'}_f2")

    Y = _add_hub_variables(model, inst)
    beta = _add_beta_variables(model, inst, mask)
    x = np.empty((C, n, n, R), dtype=np.int64)
    for c, (i, j) in enumerate(inst.commodities):
        for k in range(n):
            for m in range(n):
                for r in range(R):
                    fixed = mask is not None and mask.is_route_fixed(c, k, m, r)
                    x[c, k, m, r] = model.add_variable("x", (i, j, k, m, r), BINARY, upper=0.0 if fixed else 1.0)
    tbar = np.empty((C, n), dtype=np.int64)
    for c, (i, j) in enumerate(inst.commodities):
        for k in range(n):
            tbar[c, k] = model.add_variable("t", (i, j, k), CONTINUOUS)

    costs = inst.route_costs
    times = inst.route_times
    objective = [(x[c, k, m, r], inst.w[c, r] * (inst.q[c, r] - costs[c, k, m]))
                 for c in range(C) for k in range(n) for m in range(n) for r in range(R)]
    objective += [(Y[k, l], -inst.G[k, l]) for k in range(n) for l in range(L)]
    model.set_objective(objective)

    def uses(c, k, weight=lambda r: 1.0):
        """ Terms of sum_r weight(r) * (x_kk + sum_{m != k} (x_km + x_mk)). """
        terms = []
        for r in range(R):
            terms.append((x[c, k, k, r], weight(r)))
            terms.extend((x[c, k, m, r], weight(r)) for m in range(n) if m != k)
            terms.extend((x[c, m, k, r], weight(r)) for m in range(n) if m != k)
        return terms

    for k in range(n):
        model.add_constraint(_name("hub_level", k), [(Y[k, l], 1.0) for l in range(L)], "<=", 1.0)
    for c, (i, j) in enumerate(inst.commodities):
        model.add_constraint(_name("dem_level", i, j), [(beta[c, r], 1.0) for r in range(R)], "<=", 1.0)
        for r in range(R):
            model.add_constraint(_name("route", i, j, r),
                                 [(beta[c, r], 1.0)] + [(x[c, k, m, r], -1.0) for k in range(n) for m in range(n)], "=", 0.0)
        for k in range(n):
            model.add_constraint(_name("open", i, j, k), uses(c, k) + [(Y[k, l], -1.0) for l in range(L)], "<=", 0.0)
        model.add_constraint(_name("time", i, j),
                             [(x[c, k, m, r], times[c, k, m]) for k in range(n) for m in range(n) for r in range(R)]
                             + [(tbar[c, k], 1.0) for k in range(n)]
                             + [(beta[c, r], -inst.H[c, r]) for r in range(R)], "<=", 0.0)
        for k in range(n):
            h_top = float(inst.h[k, L - 1])
            transit = [(Y[k, l], -inst.h[k, l]) for l in range(L)]
            model.add_constraint(_name("transit_lb", i, j, k),
                                 [(tbar[c, k], 1.0)] + transit + [(vid, -h_top * w) for vid, w in uses(c, k)], ">=", -h_top)
            model.add_constraint(_name("transit_ub", i, j, k), [(tbar[c, k], 1.0)] + transit, "<=", 0.0)
            if opts.include_valid_inequality:
                model.add_constraint(_name("transit_use", i, j, k),
                                     [(tbar[c, k], 1.0)] + [(vid, -h_top * w) for vid, w in uses(c, k)], "<=", 0.0)
        if opts.include_consistency:
            model.add_constraint(_name("cons_origin", i, j),
                                 [(x[c, k, m, r], 1.0) for k in range(n) if k != i for m in range(n) for r in range(R)]
                                 + [(Y[i, l], 1.0) for l in range(L)], "<=", 1.0)
            model.add_constraint(_name("cons_destination", i, j),
                                 [(x[c, k, m, r], 1.0) for k in range(n) for m in range(n) if m != j for r in range(R)]
                                 + [(Y[j, l], 1.0) for l in range(L)], "<=", 1.0)

    def inflow(k):
        terms = []
        for c in range(C):
            terms.extend(uses(c, k, weight=lambda r, c=c: float(inst.w[c, r])))
        return terms

    _add_capacity_constraints(model, inst, Y, inflow, lower_offset=1.0)
    model.freeze()
    logger.info(f"built {model}")
    return model, F2VarIndex(Y=Y, beta=beta, x=x, tbar=tbar, size=model.num_variables)


def build(inst: Instance, which: Formulation, opts: BuildOptions = BuildOptions()):
    if Formulation(which) == Formulation.F1:
        return build_f1(inst, opts)
    return build_f2(inst, opts)


def encode_solution(inst: Instance, sol: Solution, which: Formulation, index) -> np.ndarray:
    """ Dense assignment of the formulation's variables representing `sol`. """
    which = Formulation(which)
    x = np.zeros(index.size)
    for k, l in sol.hub_levels.items():
        x[index.Y[k, l]] = 1.0
    for (i, j), service in sol.served.items():
        c, r, k, m = inst.position(i, j), service.level, service.k, service.m
        for hub in (k, m):
            if hub not in sol.hub_levels:
                raise ValueError(f"route of commodity ({i + 1},{j + 1}) uses hub {hub + 1}, which is not activated")
        x[index.beta[c, r]] = 1.0
        if which == Formulation.F1:
            x[index.x[c, k, m]] = 1.0
            x[index.g[c, k, m]] = inst.w[c, r]
            if k == m:
                x[index.o[c, k, sol.hub_levels[k]]] = 1.0
            else:
                x[index.f[c, k, sol.hub_levels[k]]] = 1.0
                x[index.s[c, m, sol.hub_levels[m]]] = 1.0
        else:
            x[index.x[c, k, m, r]] = 1.0
            for hub in service.hubs():
                x[index.tbar[c, hub]] = inst.h[hub, sol.hub_levels[hub]]
    return x


def _chosen(values: np.ndarray, what: str) -> Optional[Tuple[int, ...]]:
    picked = np.argwhere(values > 0.5)
    if len(picked) > 1:
        raise DecodeError(f"{what} takes several values: {[tuple(int(v) + 1 for v in p) for p in picked]}")
    return tuple(int(v) for v in picked[0]) if len(picked) else None


def decode_solution(inst: Instance, which: Formulation, index, assignment: np.ndarray,
                    status: SolveStatus = SolveStatus.FEASIBLE) -> Solution:
    """ Inverse of `encode_solution` on integral assignments. """
    which = Formulation(which)
    values = np.asarray(assignment, dtype=float)
    hub_levels = {}
    for k in inst.K:
        level = _chosen(values[index.Y[k]], f"the level of hub {k + 1}")
        if level is not None:
            hub_levels[k] = level[0]
    served = {}
    for c, (i, j) in enumerate(inst.commodities):
        level = _chosen(values[index.beta[c]], f"the demand level of commodity ({i + 1},{j + 1})")
        routes = values[index.x[c]]
        if level is None:
            if np.any(routes > 0.5):
                raise DecodeError(f"commodity ({i + 1},{j + 1}) is routed without being served")
            continue
        r = level[0]
        if which == Formulation.F2 and np.any(np.delete(routes, r, axis=2) > 0.5):
            raise DecodeError(f"commodity ({i + 1},{j + 1}) is routed at a demand level it is not served at")
        route = _chosen(routes if which == Formulation.F1 else routes[:, :, r], f"the route of commodity ({i + 1},{j + 1})")
        if route is None:
            raise DecodeError(f"commodity ({i + 1},{j + 1}) is served without a route")
        served[(i, j)] = Service(r, route[0], route[1])
    if not hub_levels and not served:
        status = SolveStatus.EMPTY
    return make_solution(inst, hub_levels, served, status=status)
