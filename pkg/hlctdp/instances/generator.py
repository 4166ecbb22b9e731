"""
Benchmark instance generation from CAB-style raw data.

A *base instance* holds one (w, q, H) triple per commodity and one (W, G, h) triple per hub.
`expand` multiplies these by the delta-factors of the selected demand and service levels.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from hlctdp.instances.instance import BaseInstance, Instance, all_commodities, make_instance, validate_instance

logger = logging.getLogger(__name__)

# level name -> (delta_w, delta_q, delta_H)
DemandDelta = Tuple[str, float, float, float]
# level name -> (delta_W, delta_G, delta_h)
ServiceDelta = Tuple[str, float, float, float]

DEMAND_LEVEL_SETS = {1: ("Med",), 2: ("Med", "High"), 3: ("Low", "Med", "High")}
SERVICE_LEVEL_SETS = {1: ("Med",), 2: ("Med", "High")}

DEFAULT_SIZES = (8, 10, 12)
DEFAULT_ALPHAS = (0.2, 0.5, 0.8)


class CabFormatError(ValueError):
    pass


@dataclass(frozen=True)
class RawCab:
    city_count: int
    dist: np.ndarray
    flow: np.ndarray


@dataclass(frozen=True)
class GenParams:
    beta_q: float = field(default=2.5, metadata={"help": "scale of unit revenues relative to the average route cost"})
    phi_low: float = field(default=0.25, metadata={"help": "lower end of the uniform revenue noise factor"})
    phi_high: float = field(default=0.35, metadata={"help": "upper end of the uniform revenue noise factor"})
    beta_H: float = field(default=0.4, metadata={"help": "scale of service-time limits relative to the average route time"})
    beta_G: float = field(default=3000.0, metadata={"help": "multiplier applied to the hub cost base"})
    beta_h: float = field(default=0.04, metadata={"help": "scale of hub transit times relative to access/distribution times"})
    beta_W: float = field(default=0.15, metadata={"help": "hub capacity as a share of the total demand"})
    seed: int = field(default=0, metadata={"help": "seed of the PCG64 stream used for the revenue noise factors"})
    hub_cost_base: Tuple[float, ...] = field(default=(), metadata={"help": "pre-scaling setup cost per CAB city (or per selected node)"})
    phi_fixed: Optional[float] = field(default=None, metadata={"help": "use this constant instead of drawing the revenue noise factors"})

    def __post_init__(self):
        betas = (self.beta_q, self.beta_H, self.beta_G, self.beta_h, self.beta_W)
        if any(b <= 0 for b in betas):
            raise ValueError(f"all beta parameters must be positive, got {betas}")
        if not self.phi_low < self.phi_high:
            raise ValueError(f"phi_low ({self.phi_low}) must be smaller than phi_high ({self.phi_high})")


@dataclass(frozen=True)
class DeltaTable:
    demand_levels: Tuple[DemandDelta, ...] = field(
        default=(("Low", 0.6, 0.8, 1.5), ("Med", 1.0, 1.0, 1.0), ("High", 0.4, 3.0, 0.5)),
        metadata={"help": "(name, delta_w, delta_q, delta_H) per demand level"})
    service_levels: Tuple[ServiceDelta, ...] = field(
        default=(("Med", 1.0, 1.0, 1.0), ("High", 2.0, 1.7, 1.25)),
        metadata={"help": "(name, delta_W, delta_G, delta_h) per service level"})

    def demand_row(self, name: str) -> DemandDelta:
        return _row(self.demand_levels, name)

    def service_row(self, name: str) -> ServiceDelta:
        return _row(self.service_levels, name)


def _row(rows, name):
    for row in rows:
        if row[0] == name:
            return tuple(row)
    raise ValueError(f"no delta row named {name!r}")


def _tokens(text: str):
    for line_no, line in enumerate(text.splitlines(), start=1):
        col = 0
        for token in line.split():
            col = line.index(token, col) + 1
            yield token, line_no, col
            col += len(token) - 1


def load_cab(text: str) -> RawCab:
    """ Parse a CAB-style text: an optional first line holding the city count N, then the N x N distance
    matrix followed by the N x N flow matrix, all whitespace separated. Without the header, N is inferred. """
    tokens = list(_tokens(text))
    values = []
    for token, line, col in tokens:
        try:
            values.append(float(token))
        except ValueError:
            raise CabFormatError(f"line {line}, column {col}: not a number: {token!r}")
    if values and tokens[0][1] not in {t[1] for t in tokens[1:]} and values[0].is_integer() \
            and len(values) - 1 == 2 * int(values[0]) ** 2:
        size, offset = int(values[0]), 1
    else:
        size, offset = int(round((len(values) / 2) ** 0.5)), 0
        if size == 0 or 2 * size * size != len(values):
            raise CabFormatError(f"dimension mismatch: {len(values)} numbers do not form two square matrices")
    block = size * size
    dist = np.asarray(values[offset:offset + block]).reshape(size, size)
    flow = np.asarray(values[offset + block:offset + 2 * block]).reshape(size, size)
    for name, matrix, start in (("dist", dist, offset), ("flow", flow, offset + block)):
        negative = np.argwhere(matrix < 0)
        if len(negative):
            i, j = negative[0]
            _, line, col = tokens[start + i * size + j]
            raise CabFormatError(f"negative {name}[{i + 1}][{j + 1}] at line {line}, column {col}")
    return RawCab(city_count=size, dist=dist, flow=flow)


def load_hub_costs(text: str) -> Tuple[float, ...]:
    costs = []
    for token, line, col in _tokens(text):
        try:
            costs.append(float(token))
        except ValueError:
            raise CabFormatError(f"line {line}, column {col}: not a number: {token!r}")
    return tuple(costs)


def select_cities(raw: RawCab, n: int) -> Tuple[int, ...]:
    """ The n cities with the largest inbound + outbound flow (ties to the lower index), in index order. """
    total = raw.flow.sum(axis=0) + raw.flow.sum(axis=1)
    ranked = sorted(range(raw.city_count), key=lambda i: (-total[i], i))
    return tuple(sorted(ranked[:n]))


def route_sums(matrix: np.ndarray, discount: float) -> np.ndarray:
    """ S[i][j] = sum over all hub pairs (k,m) of matrix[i][k] + discount*matrix[k][m] + matrix[m][j]. """
    n = matrix.shape[0]
    return n * matrix.sum(axis=1)[:, None] + discount * matrix.sum() + n * matrix.sum(axis=0)[None, :]


def make_base(raw: RawCab, n: int, alpha: float, params: GenParams) -> BaseInstance:
    if n > raw.city_count:
        raise ValueError(f"n={n} exceeds the {raw.city_count} cities available in the CAB data")
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if not params.hub_cost_base:
        raise ValueError("missing hub cost base: GenParams.hub_cost_base is empty")
    cities = select_cities(raw, n)
    idx = np.ix_(cities, cities)
    dist = raw.dist[idx].copy()
    if not np.allclose(dist, dist.T) or np.any(np.diag(dist) != 0):
        raise ValueError("distances of the selected cities must be symmetric with a zero diagonal")

    off_diagonal = ~np.eye(n, dtype=bool)
    n_arcs = n * n - n
    demand = np.where(off_diagonal, raw.flow[idx], 0.0)

    if params.phi_fixed is not None:
        phi = np.full((n, n), float(params.phi_fixed))
    else:
        rng = np.random.Generator(np.random.PCG64(params.seed))
        phi = np.zeros((n, n))
        # drawn in lexicographic (i,j) order
        phi[off_diagonal] = rng.uniform(params.phi_low, params.phi_high, size=n_arcs)
    revenue = np.where(off_diagonal, phi * params.beta_q / n_arcs * route_sums(dist, alpha), 0.0)
    max_time = np.where(off_diagonal, params.beta_H / n_arcs * route_sums(dist, alpha), 0.0)

    base_costs = np.asarray(params.hub_cost_base, dtype=float)
    if len(base_costs) == raw.city_count:
        base_costs = base_costs[list(cities)]
    elif len(base_costs) != n:
        raise ValueError(f"hub cost base has {len(base_costs)} entries, expected {raw.city_count} (per city) or {n}")
    hub_cost = params.beta_G * base_costs

    row, col = dist.sum(axis=1), dist.sum(axis=0)
    access_sum = (row[:, None] + col[None, :])[off_diagonal].sum()
    hub_transit = np.full(n, params.beta_h * access_sum / (n * n_arcs))
    hub_cap = np.full(n, params.beta_W * demand.sum())

    return BaseInstance(n=n, alpha=float(alpha), gamma=float(alpha), dist=dist, cost=dist.copy(), time=dist.copy(),
                        demand=demand, revenue=revenue, max_time=max_time, hub_cost=hub_cost,
                        hub_transit=hub_transit, hub_cap=hub_cap, city_ids=tuple(c + 1 for c in cities))


def expand(base: BaseInstance, L: int, R: int, deltas: DeltaTable = DeltaTable()) -> Instance:
    if L not in SERVICE_LEVEL_SETS:
        raise ValueError(f"unsupported service level count {L}; expected one of {sorted(SERVICE_LEVEL_SETS)}")
    if R not in DEMAND_LEVEL_SETS:
        raise ValueError(f"unsupported demand level count {R}; expected one of {sorted(DEMAND_LEVEL_SETS)}")
    demand_rows = sorted((deltas.demand_row(name) for name in DEMAND_LEVEL_SETS[R]), key=lambda row: row[3])
    service_rows = sorted((deltas.service_row(name) for name in SERVICE_LEVEL_SETS[L]), key=lambda row: row[1])

    commodities = all_commodities(base.n)
    origins = [i for i, _ in commodities]
    destinations = [j for _, j in commodities]
    w, q, H = (np.outer(matrix[origins, destinations], [row[f] for row in demand_rows])
               for f, matrix in ((1, base.demand), (2, base.revenue), (3, base.max_time)))
    W, G, h = (np.outer(vector, [row[f] for row in service_rows])
               for f, vector in ((1, base.hub_cap), (2, base.hub_cost), (3, base.hub_transit)))

    inst = make_instance(base.n, base.alpha, base.gamma, base.cost, base.time, commodities, w, q, H, W, G, h,
                         demand_level_names=[row[0] for row in demand_rows],
                         service_level_names=[row[0] for row in service_rows],
                         city_ids=base.city_ids, name=instance_name(base.alpha, base.n, L, R), R=R)
    broken = [v for v in validate_instance(inst) if v.rule == "monotonicity"]
    assert not broken, f"expanded instance breaks level monotonicity: {broken[:3]}"
    return inst


def instance_name(alpha: float, n: int, L: int, R: int) -> str:
    return f"hlctdp_a{alpha:g}_n{n}_L{L}_R{R}"


def sweep(raw: RawCab, params: GenParams, sizes: Sequence[int] = DEFAULT_SIZES, alphas: Sequence[float] = DEFAULT_ALPHAS,
          level_counts: Sequence[int] = (1, 2), demand_level_counts: Sequence[int] = (1, 2, 3),
          deltas: DeltaTable = DeltaTable()) -> Iterator[Instance]:
    """ Yield the full alpha x n x L x R grid of instances (54 with the defaults). """
    for alpha, n in itertools.product(alphas, sizes):
        base = make_base(raw, n, alpha, params)
        logger.info(f"base instance n={n} alpha={alpha:g} built from cities {base.city_ids}")
        for L, R in itertools.product(level_counts, demand_level_counts):
            yield expand(base, L, R, deltas)
