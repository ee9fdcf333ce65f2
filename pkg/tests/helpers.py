"""Shared test fixtures: tiny graphs, random instances, and brute-force oracles.

Every oracle here is written independently of the production search/solver
code paths: plain enumeration over permutations, power sets, and column
combinations.
"""

from __future__ import annotations

import itertools
import math
import random

from vgadispatch.model import (
    DROPOFF,
    PICKUP,
    Plan,
    Request,
    Stop,
    VehicleState,
    dropoff,
    evaluate_plan,
    pickup,
)
from vgadispatch.network import RoadNetwork, grid_network


def diamond_network() -> RoadNetwork:
    """4-node diamond with asymmetric times: 0 -> {1,2} -> 3 plus a slow direct arc."""
    nodes = [(0, 0.0, 0.0), (1, 0.0, 1.0), (2, 1.0, 0.0), (3, 1.0, 1.0)]
    edges = [
        (0, 1, 300.0, 30.0),
        (0, 2, 500.0, 60.0),
        (1, 3, 400.0, 30.0),
        (2, 3, 100.0, 60.0),
        (0, 3, 1500.0, 50.0),
        (3, 0, 700.0, 70.0),
        (1, 0, 300.0, 15.0),
    ]
    return RoadNetwork(nodes, edges)


def line_network(n: int, edge_len: float = 100.0, speed: float = 36.0) -> RoadNetwork:
    nodes = [(i, 0.0, float(i)) for i in range(n)]
    edges = []
    for i in range(n - 1):
        edges.append((i, i + 1, edge_len, speed))
        edges.append((i + 1, i, edge_len, speed))
    return RoadNetwork(nodes, edges)


def floyd_warshall(net: RoadNetwork, metric: str = "time"):
    """All-pairs oracle, independent of the Dijkstra implementation."""
    ids = net.node_ids
    dist = {a: {b: math.inf for b in ids} for a in ids}
    for a in ids:
        dist[a][a] = 0.0
    for u, v, length_m, time_s in net.edges():
        w = time_s if metric == "time" else length_m
        dist[u][v] = min(dist[u][v], w)
    for k in ids:
        for i in ids:
            dik = dist[i][k]
            if dik == math.inf:
                continue
            for j in ids:
                alt = dik + dist[k][j]
                if alt < dist[i][j]:
                    dist[i][j] = alt
    return dist


def make_request(net: RoadNetwork, rid: int, t: int, o: int, d: int) -> Request:
    return Request(rid, t, o, d, int(net.duration(o, d)))


def chain_schedule(net, start_node, start_t, onboard_count, stops):
    """Independent schedule evaluator: returns (cost, {rid: delay}, max_occupancy)
    or None when occupancy goes negative (bad ordering is the caller's concern)."""
    t = start_t
    pos = start_node
    occ = onboard_count
    max_occ = occ
    cost = 0.0
    delays = {}
    for stop in stops:
        dur = net.duration(pos, stop.node)
        dist = net.distance(pos, stop.node)
        if dur == math.inf:
            return None
        t += dur
        cost += dist
        pos = stop.node
        if stop.kind == PICKUP:
            t = max(t, stop.request.announce_s)
            occ += 1
            max_occ = max(max_occ, occ)
        else:
            delays[stop.request.id] = t - stop.request.announce_s - stop.request.baseline_s
            occ -= 1
    return cost, delays, max_occ


def oracle_group_plan(net, vehicle: VehicleState, group, now: int, q_max: int):
    """Enumeration oracle for the single-vehicle problem.

    Walks every pickup-before-dropoff ordering, abandoning a prefix only
    once it has already violated a constraint (a drop-off past its
    deadline, or the capacity).  No look-ahead and no cost bounding, so it
    stays independent of the production search.  Returns (cost, stops) of
    the best feasible ordering or None.
    """
    onboard_ids = set(vehicle.onboard)
    stops = []
    for r in sorted(group, key=lambda r: r.id):
        if r.id not in onboard_ids:
            stops.append(pickup(r))
        stops.append(dropoff(r))
    n = len(stops)
    best = [None]

    def extend(seq, used, pos, t, occ, cost):
        if len(seq) == n:
            key = (cost, tuple(s.sort_key() for s in seq))
            if best[0] is None or key < best[0][0]:
                best[0] = (key, list(seq))
            return
        for i in range(n):
            if used[i]:
                continue
            s = stops[i]
            rid = s.request.id
            if s.kind == DROPOFF and rid not in onboard_ids:
                pick = next(j for j, x in enumerate(stops)
                            if x.request.id == rid and x.kind == PICKUP)
                if not used[pick]:
                    continue
            dur = net.duration(pos, s.node)
            dist = net.distance(pos, s.node)
            if math.isinf(dur):
                continue
            t2 = t + dur
            occ2 = occ
            if s.kind == PICKUP:
                t2 = max(t2, s.request.announce_s)
                occ2 += 1
                if occ2 > vehicle.capacity:
                    continue
            else:
                if t2 - s.request.announce_s - s.request.baseline_s > q_max:
                    continue  # this prefix already violated the deadline
                occ2 -= 1
            used[i] = True
            seq.append(s)
            extend(seq, used, s.node, t2, occ2, cost + dist)
            seq.pop()
            used[i] = False

    extend([], [False] * n, vehicle.position, max(now, vehicle.ready_s), len(onboard_ids), 0.0)
    if best[0] is None:
        return None
    return best[0][0][0], tuple(best[0][1])


def oracle_feasible_groups(net, vehicle: VehicleState, waiting, now: int, q_max: int):
    """Power-set oracle: every feasible group (with onboard included) and its cost."""
    onboard = sorted(vehicle.onboard.values(), key=lambda r: r.id)
    onboard_ids = tuple(r.id for r in onboard)
    out = {}
    waiting = sorted(waiting, key=lambda r: r.id)
    for k in range(len(waiting) + 1):
        for combo in itertools.combinations(waiting, k):
            group = onboard + list(combo)
            if not group:
                out[()] = 0.0
                continue
            got = oracle_group_plan(net, vehicle, group, now, q_max)
            if got is not None:
                key = tuple(sorted(onboard_ids + tuple(r.id for r in combo)))
                out[key] = got[0]
    return out


def oracle_assignment_optimum(groupsets_costs, waiting_ids, station_stock=None):
    """Exhaustive set-partitioning oracle.

    groupsets_costs: list of (kind, rhs, {group_key: cost}) where kind is
    'vehicle' (exactly one group) or 'station' (up to rhs columns).
    Returns the minimum total cost covering every waiting id exactly once,
    or None when impossible.
    """
    waiting = frozenset(waiting_ids)

    def station_selections(groups, rhs):
        keys = [k for k in sorted(groups) if k and set(k) & waiting]
        for n in range(0, rhs + 1):
            for combo in itertools.combinations(keys, n):
                yield combo

    def rec(i, covered, total, best):
        if best is not None and total >= best:
            return best
        if i == len(groupsets_costs):
            if covered == waiting:
                return total
            return best
        kind, rhs, groups = groupsets_costs[i]
        if kind == "vehicle":
            for key in sorted(groups):
                add = frozenset(key) & waiting
                if covered & add:
                    continue
                best = rec(i + 1, covered | add, total + groups[key], best)
        else:
            for combo in station_selections(groups, rhs):
                add = frozenset()
                ok = True
                extra = 0.0
                for key in combo:
                    cov = frozenset(key) & waiting
                    if cov & add or cov & covered:
                        ok = False
                        break
                    add |= cov
                    extra += groups[key]
                if ok:
                    best = rec(i + 1, covered | add, total + extra, best)
        return best

    return rec(0, frozenset(), 0.0, None)


def random_instance(seed: int, rows=4, cols=4, n_vehicles=3, n_requests=5,
                    capacity=3, q_max=100000, with_onboard=False, now=0):
    """Random consistent fleet snapshot on a small grid."""
    rng = random.Random(seed)
    net = grid_network(rows, cols)
    node_count = rows * cols
    rid = 1
    vehicles = []
    for vid in range(n_vehicles):
        v = VehicleState(id=vid, position=rng.randrange(node_count), capacity=capacity,
                         ready_s=now)
        if with_onboard and rng.random() < 0.5:
            o = rng.randrange(node_count)
            d = rng.randrange(node_count)
            while d == o:
                d = rng.randrange(node_count)
            past = max(0, now - rng.randint(0, 60))
            r = make_request(net, 900 + rid, past, o, d)
            v.onboard[r.id] = r
            rid += 1
        vehicles.append(v)
    waiting = []
    for _ in range(n_requests):
        o = rng.randrange(node_count)
        d = rng.randrange(node_count)
        while d == o:
            d = rng.randrange(node_count)
        waiting.append(make_request(net, rid, max(0, now - rng.randint(0, 30)), o, d))
        rid += 1
    return net, vehicles, waiting
