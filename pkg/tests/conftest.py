import itertools
import math

import pytest

from fsta.model import DistanceMode, Instance, Node, Solution, Variant


def make_instance(variant, coords, demands, capacity, *, services=None, tws=None,
                  backhauls=None, mode=DistanceMode.EUCLIDEAN):
    """Build an instance from parallel per-customer attribute lists; index 0
    is the depot."""
    n = len(coords) - 1
    services = services or [0.0] * (n + 1)
    tws = tws or [(0.0, math.inf)] * (n + 1)
    backhauls = backhauls or [False] * (n + 1)
    nodes = [
        Node(coords[i][0], coords[i][1], demands[i], services[i],
             tws[i][0], tws[i][1], backhauls[i])
        for i in range(n + 1)
    ]
    return Instance(variant, nodes, capacity, mode, id="test")


def brute_force_cvrp(instance):
    """Exact CVRP optimum via permutations with an optimal-split DP.

    Every solution is a concatenation of its routes, so minimizing over all
    customer permutations with capacity-respecting consecutive splits covers
    the full solution space. Usable up to ~7 customers.
    """
    n = instance.n_customers
    d = [[instance.distance(i, j) for j in range(n + 1)] for i in range(n + 1)]
    dem = [instance.nodes[i].demand for i in range(n + 1)]
    best = math.inf
    best_routes = None
    for perm in itertools.permutations(range(1, n + 1)):
        # dp[i]: cheapest cost covering perm[:i]
        dp = [math.inf] * (n + 1)
        choice = [0] * (n + 1)
        dp[0] = 0.0
        for j in range(1, n + 1):
            load = 0.0
            path = 0.0
            for i in range(j - 1, -1, -1):
                load += dem[perm[i]]
                if load > instance.capacity:
                    break
                if i < j - 1:
                    path += d[perm[i]][perm[i + 1]]
                cost = d[0][perm[i]] + path + d[perm[j - 1]][0]
                if dp[i] + cost < dp[j]:
                    dp[j] = dp[i] + cost
                    choice[j] = i
        if dp[n] < best:
            best = dp[n]
            routes = []
            j = n
            while j > 0:
                i = choice[j]
                routes.append(tuple(perm[i:j]))
                j = i
            best_routes = Solution(tuple(reversed(routes)))
    return best, best_routes


@pytest.fixture
def square_cvrp():
    """Four customers on a unit square around a central depot."""
    coords = [(0.5, 0.5), (0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    return make_instance(Variant.CVRP, coords, [0, 1, 1, 1, 1], 4.0)
