"""Fleet design and stock keeping: station positioning, sizing, rebalancing.

Stations are positioned by a minimum-cardinality covering program so that
every serviced node is reachable from some station within a time limit.
Fleet sizing starts from one dedicated vehicle per request at its nearest
station and shrinks all stocks by a common factor until a shortage appears.
Rebalancing periodically ships surplus vehicles to depleted stations by
solving a min-cost transportation problem, which is integral by
construction.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .assignment import BinaryProgram, solve_binary_program
from .model import DataError, Request
from .network import RoadNetwork


class UncoverableNodeError(ValueError):
    """Some serviced nodes cannot be reached from any candidate within the limit."""

    def __init__(self, nodes: Sequence[int]):
        self.nodes = sorted(nodes)
        super().__init__(f"nodes unreachable within the limit: {self.nodes}")


@dataclass
class Station:
    """A parking facility with a vehicle stock stabilized around its initial value."""

    id: int
    node: int
    initial_stock: int
    stock: int
    threshold: int  # rebalancing tops the station up whenever stock falls below this

    @classmethod
    def create(cls, sid: int, node: int, initial_stock: int, tau_fraction: float = 0.85) -> "Station":
        return cls(
            id=sid,
            node=node,
            initial_stock=initial_stock,
            stock=initial_stock,
            threshold=math.floor(tau_fraction * initial_stock),
        )


@dataclass(frozen=True)
class RebalancingOrder:
    from_station: int
    to_station: int
    count: int
    trip_distance_m: float


# -- station positioning -----------------------------------------------------


def position_stations(net: RoadNetwork, serviced_nodes: Sequence[int], reach_s: float = 210.0) -> list[int]:
    """Minimum set of station nodes covering every serviced node within reach_s.

    Candidates are the serviced nodes themselves; the covering integer
    program is solved exactly by the shared branch-and-bound solver.
    """
    nodes = sorted(set(serviced_nodes))
    if not nodes:
        return []
    index = {nid: i for i, nid in enumerate(nodes)}
    rows: list[list[int]] = []
    uncoverable: list[int] = []
    for n in nodes:
        sources = net.nodes_reaching(n, reach_s) & set(nodes)
        if not sources:
            uncoverable.append(n)
        rows.append(sorted(index[s] for s in sources))
    if uncoverable:
        raise UncoverableNodeError(uncoverable)
    program = BinaryProgram(costs=[1.0] * len(nodes))
    for cols in rows:
        program.ge_rows.append((cols, 1.0))
    solution = solve_binary_program(program, gap=0.0)
    return [nodes[i] for i, v in enumerate(solution.x) if v]


# -- fleet sizing -------------------------------------------------------------


def nearest_station_id(net: RoadNetwork, station_nodes: Mapping[int, int], origin: int) -> int:
    """Station with smallest travel time to the origin; ties pick the lower id."""
    best = min(
        sorted(station_nodes),
        key=lambda sid: (net.duration(station_nodes[sid], origin), sid),
    )
    return best


def initial_dedicated_stocks(
    net: RoadNetwork, requests: Sequence[Request], station_nodes: Mapping[int, int]
) -> dict[int, int]:
    """One dedicated vehicle per request, parked at the request's nearest station."""
    stocks = {sid: 0 for sid in station_nodes}
    for r in requests:
        stocks[nearest_station_id(net, station_nodes, r.origin)] += 1
    return stocks


def size_fleet(
    net: RoadNetwork,
    requests: Sequence[Request],
    station_nodes: Mapping[int, int],
    shortage_oracle: Callable[[Mapping[int, int]], int],
    step: float = 0.05,
) -> dict[int, int]:
    """Shrink the dedicated fleet uniformly until the first shortage event.

    Every iteration multiplies all stocks by (1 - step) with ceiling
    rounding and re-simulates; the last shortage-free stock vector wins.
    Stocks of 1 cannot shrink further, so the loop also stops when the
    rounding makes no progress.
    """
    if not 0 < step < 1:
        raise ValueError("step must be in (0, 1)")
    current = initial_dedicated_stocks(net, requests, station_nodes)
    if not requests:
        return current
    if shortage_oracle(current) > 0:
        raise RuntimeError("dedicated one-vehicle-per-request fleet already has shortages")
    while True:
        candidate = {sid: (math.ceil(v * (1.0 - step)) if v > 0 else 0) for sid, v in current.items()}
        if candidate == current:
            return current
        if shortage_oracle(candidate) > 0:
            return current
        current = candidate


# -- rebalancing ---------------------------------------------------------------


def min_cost_transport(
    supplies: Sequence[int],
    demands: Sequence[int],
    costs: Sequence[Sequence[float]],
) -> dict[tuple[int, int], int]:
    """Integral min-cost shipment of min(sum supplies, sum demands) units.

    Successive shortest augmenting paths with potentials; all arc costs must
    be nonnegative.  Pairs with infinite cost are treated as unusable.
    """
    m, k = len(supplies), len(demands)
    target = min(sum(supplies), sum(demands))
    flows: dict[tuple[int, int], int] = {}
    if target == 0 or m == 0 or k == 0:
        return flows

    # node layout: 0 = source, 1..m supply points, m+1..m+k demand points, m+k+1 = sink
    s, t = 0, m + k + 1
    n = m + k + 2
    cap: dict[tuple[int, int], int] = {}
    cost: dict[tuple[int, int], float] = {}

    def add(u: int, v: int, c: int, w: float) -> None:
        cap[(u, v)] = c
        cost[(u, v)] = w
        cap.setdefault((v, u), 0)
        cost[(v, u)] = -w

    for i in range(m):
        add(s, 1 + i, int(supplies[i]), 0.0)
    for j in range(k):
        add(m + 1 + j, t, int(demands[j]), 0.0)
    for i in range(m):
        for j in range(k):
            w = float(costs[i][j])
            if math.isinf(w):
                continue
            add(1 + i, m + 1 + j, target, w)

    adjacency: dict[int, list[int]] = {u: [] for u in range(n)}
    for (u, v) in cap:
        adjacency[u].append(v)
    for u in adjacency:
        adjacency[u].sort()

    potential = [0.0] * n
    shipped = 0
    while shipped < target:
        dist = [math.inf] * n
        parent: list[int | None] = [None] * n
        dist[s] = 0.0
        heap: list[tuple[float, int]] = [(0.0, s)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u] + 1e-12:
                continue
            for v in adjacency[u]:
                if cap[(u, v)] <= 0:
                    continue
                reduced = max(0.0, cost[(u, v)] + potential[u] - potential[v])
                nd = d + reduced
                if nd < dist[v] - 1e-12:
                    dist[v] = nd
                    parent[v] = u
                    heapq.heappush(heap, (nd, v))
        if math.isinf(dist[t]):
            break  # disconnected pairs; ship what is possible
        for u in range(n):
            if not math.isinf(dist[u]):
                potential[u] += dist[u]
        # bottleneck along the augmenting path
        bottleneck = target - shipped
        v = t
        while parent[v] is not None:
            u = parent[v]
            bottleneck = min(bottleneck, cap[(u, v)])
            v = u
        v = t
        while parent[v] is not None:
            u = parent[v]
            cap[(u, v)] -= bottleneck
            cap[(v, u)] += bottleneck
            v = u
        shipped += bottleneck

    for i in range(m):
        for j in range(k):
            back = cap.get((m + 1 + j, 1 + i), 0)
            if back > 0:
                flows[(i, j)] = back
    return flows


def rebalance(
    net: RoadNetwork,
    stations: Sequence[Station],
    surplus_fraction: float = 1.05,
) -> list[RebalancingOrder]:
    """Ship vehicles from surplus stations to stations under their threshold.

    Sources hold at least `surplus_fraction` times their initial stock and
    offer (stock - initial) vehicles; sinks need (threshold - stock).  The
    total trip length of all shipments is minimized.
    """
    sources = [
        st for st in sorted(stations, key=lambda s: s.id)
        if st.stock + 1e-9 >= surplus_fraction * st.initial_stock and st.stock - st.initial_stock >= 1
    ]
    sinks = [
        st for st in sorted(stations, key=lambda s: s.id)
        if st.stock < st.threshold
    ]
    if not sources or not sinks:
        return []
    supplies = [st.stock - st.initial_stock for st in sources]
    demands = [st.threshold - st.stock for st in sinks]
    costs = [[net.distance(a.node, b.node) for b in sinks] for a in sources]
    flows = min_cost_transport(supplies, demands, costs)
    orders = [
        RebalancingOrder(
            from_station=sources[i].id,
            to_station=sinks[j].id,
            count=count,
            trip_distance_m=costs[i][j],
        )
        for (i, j), count in sorted(flows.items())
    ]
    return orders


# -- stations file -------------------------------------------------------------


def load_stations(path: str | Path, net: RoadNetwork, tau_fraction: float = 0.85) -> list[Station]:
    """Read the stations CSV (id,node,initial_stock)."""
    p = Path(path)
    if not p.exists():
        raise DataError(f"stations file not found: {p}")
    out: list[Station] = []
    with open(p, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "node", "initial_stock"}
        if reader.fieldnames is None or set(reader.fieldnames) < required:
            raise DataError(f"{p}: header must be id,node,initial_stock")
        for lineno, row in enumerate(reader, start=2):
            try:
                sid, node, stock = int(row["id"]), int(row["node"]), int(row["initial_stock"])
            except (TypeError, ValueError) as exc:
                raise DataError(f"{p}:{lineno}: {exc}") from exc
            if not net.has_node(node):
                raise DataError(f"{p}:{lineno}: station {sid} at unknown node {node}")
            if stock < 0:
                raise DataError(f"{p}:{lineno}: negative stock for station {sid}")
            out.append(Station.create(sid, node, stock, tau_fraction))
    return sorted(out, key=lambda s: s.id)


def write_stations(rows: Sequence[tuple[int, int, int]], path: str | Path) -> None:
    """Write (id, node, initial_stock) rows in the stations CSV format."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "node", "initial_stock"])
        for row in rows:
            w.writerow(row)
