import itertools
import math
import os

import numpy as np
import pytest

from hlctdp.config import example1_instance_path
from hlctdp.instances.encode_decode import load_instance
from hlctdp.instances.instance import Instance, make_instance
from hlctdp.solving.solution import Service, SolveStatus, make_solution

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")

EXAMPLE1_OPTIMUM = 550.0
EXAMPLE1_RELAXED_OPTIMUM = 600.0

# leaves the oracle may visit on one tiny instance
ORACLE_BUDGET = 2 * 10 ** 5


def oracle_effort(n: int, L: int, R: int, n_commodities: int) -> int:
    return sum(math.comb(n, o) * L ** o * (1 + R * o * o) ** n_commodities for o in range(n + 1))


def tiny_instance(seed: int, n: int, L: int, R: int, alpha: float = 0.5, n_commodities: int = None) -> Instance:
    """ Random instance on distinct grid points with Euclidean costs, time == cost, gamma == alpha, nondecreasing
    setup and transit costs, even demands and odd capacities (so no flow ever equals a capacity). """
    rng = np.random.Generator(np.random.PCG64(seed))
    cells = rng.choice(64, size=n, replace=False)
    points = np.stack([cells // 8, cells % 8], axis=1).astype(float)
    cost = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)

    pairs = [(i, j) for i, j in itertools.permutations(range(n), 2)]
    if n_commodities is None:
        n_commodities = max(c for c in range(1, 5) if c == 1 or oracle_effort(n, L, R, c) <= ORACLE_BUDGET)
    n_commodities = min(n_commodities, len(pairs))
    chosen = sorted(rng.choice(len(pairs), size=n_commodities, replace=False))
    commodities = [pairs[p] for p in chosen]

    w = 2 * rng.integers(1, 3, size=(n_commodities, R))
    q = np.sort(rng.uniform(4.0, 14.0, size=(n_commodities, R)), axis=1)[:, ::-1]
    H = np.cumsum(rng.uniform(6.0, 14.0, size=(n_commodities, R)), axis=1)

    if L == 1:
        W = 2 * rng.integers(2, 5, size=(n, 1)) + 1
    else:
        low = 2 * rng.integers(1, 3, size=(n, 1)) + 1
        W = np.hstack([low, low + 2 * rng.integers(1, 4, size=(n, 1))])
    G = np.cumsum(rng.uniform(1.0, 10.0, size=(n, L)), axis=1)
    h = np.cumsum(rng.uniform(0.0, 2.0, size=(n, L)), axis=1)
    return make_instance(n, alpha, alpha, cost, cost.copy(), commodities, w, q, H, W, G, h, R=R,
                         name=f"tiny_s{seed}_n{n}_L{L}_R{R}")


def tiny_suite(count: int, seed: int = 0, sizes=(3, 4, 5)):
    """ `count` deterministic tiny instances cycling through sizes and level counts. """
    shapes = list(itertools.product(sizes, (1, 2), (1, 2)))
    return [tiny_instance(seed + t, *shapes[t % len(shapes)]) for t in range(count)]


@pytest.fixture
def example1() -> Instance:
    return load_instance(example1_instance_path)


@pytest.fixture
def example1_optimal(example1):
    """ Hub 2 at level 2, hub 3 at level 1; (1,2) via hub 2 only and (2,4) via hubs 2 then 3. """
    return make_solution(example1, {1: 1, 2: 0}, {(0, 1): Service(0, 1, 1), (1, 3): Service(0, 1, 2)},
                         status=SolveStatus.OPTIMAL)


@pytest.fixture
def example1_relaxed(example1):
    """ Hubs 2 and 3 at level 1 with (2,4) bypassing its open origin hub 2. """
    return make_solution(example1, {1: 0, 2: 0}, {(0, 1): Service(0, 1, 1), (1, 3): Service(0, 2, 2)})


@pytest.fixture
def cab_path():
    return os.path.join(DATA_DIR, "cab12.txt")


@pytest.fixture
def hub_costs_path():
    return os.path.join(DATA_DIR, "hub_costs12.txt")
