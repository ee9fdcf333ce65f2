"""Road network loading and cached shortest-path queries.

The network is a directed graph with per-edge length (meters) and travel
time (whole seconds, rounded up from length / speed).  All distance and
duration answers used by the dispatchers and the simulator come from here.
Instances are immutable after construction, so concurrent reads are safe.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

ROAD_CLASS_SPEEDS_KMH = {"highway": 130.0, "living street": 20.0}
DEFAULT_SPEED_KMH = 50.0

TIME = "time"
DISTANCE = "distance"


class NetworkFormatError(ValueError):
    """A network CSV file is malformed or violates a graph invariant."""


@dataclass(frozen=True)
class PathResult:
    """Shortest path between two nodes: total meters, whole seconds, node sequence."""

    distance_m: float
    duration_s: int
    nodes: tuple[int, ...]


def edge_travel_time_s(length_m: float, speed_kmh: float) -> int:
    # ceil keeps all downstream feasibility arithmetic in exact integers
    return math.ceil(length_m * 3.6 / speed_kmh)


class RoadNetwork:
    """Directed road graph with deterministic shortest-path queries.

    Ties between equal-cost paths are broken toward the smallest
    predecessor node id, so repeated runs produce identical routes.
    Single-source results are cached per origin; the cache only grows,
    which is safe because the graph never changes.
    """

    def __init__(
        self,
        nodes: Iterable[tuple[int, float, float]],
        edges: Iterable[tuple[int, int, float, float]],
    ):
        self._coords: dict[int, tuple[float, float]] = {}
        for nid, lat, lon in nodes:
            nid = int(nid)
            if nid in self._coords:
                raise NetworkFormatError(f"duplicate node id {nid}")
            self._coords[nid] = (float(lat), float(lon))

        self._ids: list[int] = sorted(self._coords)
        self._idx: dict[int, int] = {nid: i for i, nid in enumerate(self._ids)}
        n = len(self._ids)

        # parallel edges collapse to the fastest (then shortest) one
        best: dict[tuple[int, int], tuple[int, float, float]] = {}
        for u, v, length_m, speed_kmh in edges:
            u, v = int(u), int(v)
            if u not in self._idx or v not in self._idx:
                raise NetworkFormatError(f"edge ({u},{v}) references unknown node")
            if length_m <= 0:
                raise NetworkFormatError(f"edge ({u},{v}) has non-positive length {length_m}")
            if speed_kmh <= 0:
                raise NetworkFormatError(f"edge ({u},{v}) has non-positive speed {speed_kmh}")
            key = (u, v)
            cand = (edge_travel_time_s(float(length_m), float(speed_kmh)), float(length_m), float(speed_kmh))
            if key not in best or cand < best[key]:
                best[key] = cand

        self._speeds: dict[tuple[int, int], float] = {k: s for k, (_t, _l, s) in best.items()}
        self._len: dict[tuple[int, int], float] = {k: l for k, (_t, l, _s) in best.items()}
        self._time: dict[tuple[int, int], int] = {k: t for k, (t, _l, _s) in best.items()}
        self._edges: list[tuple[int, int, float, int]] = [
            (u, v, length_m, time_s) for (u, v), (time_s, length_m, _s) in sorted(best.items())
        ]
        self._out: list[list[tuple[int, int, float]]] = [[] for _ in range(n)]
        self._in: list[list[tuple[int, int, float]]] = [[] for _ in range(n)]
        for u, v, length_m, time_s in self._edges:
            self._out[self._idx[u]].append((self._idx[v], time_s, length_m))
            self._in[self._idx[v]].append((self._idx[u], time_s, length_m))
        for adj in self._out:
            adj.sort()
        for adj in self._in:
            adj.sort()

        self._cache_time: dict[int, tuple[list[float], list[float], list[int]]] = {}
        self._cache_dist: dict[int, tuple[list[float], list[float], list[int]]] = {}

    # -- basic accessors ---------------------------------------------------

    @property
    def node_ids(self) -> list[int]:
        return list(self._ids)

    def has_node(self, nid: int) -> bool:
        return nid in self._idx

    def node_coords(self, nid: int) -> tuple[float, float]:
        return self._coords[nid]

    def edges(self) -> list[tuple[int, int, float, int]]:
        """All edges as (from, to, length_m, time_s)."""
        return list(self._edges)

    def edge_length(self, u: int, v: int) -> float:
        return self._len[(u, v)]

    def edge_time(self, u: int, v: int) -> int:
        return self._time[(u, v)]

    def edge_speed(self, u: int, v: int) -> float:
        return self._speeds[(u, v)]

    def total_length_m(self) -> float:
        return sum(e[2] for e in self._edges)

    # -- shortest paths ----------------------------------------------------

    def _sssp(self, origin: int, metric: str):
        cache = self._cache_time if metric == TIME else self._cache_dist
        hit = cache.get(origin)
        if hit is not None:
            return hit
        n = len(self._ids)
        primary = [math.inf] * n  # minimized quantity
        secondary = [math.inf] * n  # the other quantity along the chosen path
        parent = [-1] * n
        s = self._idx[origin]
        primary[s] = 0.0
        secondary[s] = 0.0
        heap: list[tuple[float, int]] = [(0.0, s)]
        while heap:
            d, ui = heapq.heappop(heap)
            if d > primary[ui]:
                continue
            for vi, time_s, length_m in self._out[ui]:
                w, other = (time_s, length_m) if metric == TIME else (length_m, time_s)
                nd = d + w
                if nd < primary[vi]:
                    primary[vi] = nd
                    secondary[vi] = secondary[ui] + other
                    parent[vi] = ui
                    heapq.heappush(heap, (nd, vi))
                elif nd == primary[vi] and parent[vi] >= 0 and self._ids[ui] < self._ids[parent[vi]]:
                    parent[vi] = ui
                    secondary[vi] = secondary[ui] + other
        result = (primary, secondary, parent)
        cache[origin] = result
        return result

    def leg(self, a: int, b: int) -> tuple[int, float] | None:
        """Fastest-route (duration_s, distance_m) from a to b; None if unreachable.

        Vehicles always drive minimum-time routes, so the distance is the
        length of the fastest path, not of the geometrically shortest one.
        """
        if a not in self._idx or b not in self._idx:
            raise KeyError(f"unknown node in leg({a},{b})")
        if a == b:
            return (0, 0.0)
        durations, meters, _ = self._sssp(a, TIME)
        bi = self._idx[b]
        if math.isinf(durations[bi]):
            return None
        return (int(durations[bi]), meters[bi])

    def duration(self, a: int, b: int) -> float:
        """Fastest travel time in seconds; math.inf if unreachable."""
        got = self.leg(a, b)
        return math.inf if got is None else got[0]

    def distance(self, a: int, b: int) -> float:
        """Distance along the fastest route in meters; math.inf if unreachable."""
        got = self.leg(a, b)
        return math.inf if got is None else got[1]

    def path(self, a: int, b: int, metric: str = TIME) -> PathResult | None:
        if metric not in (TIME, DISTANCE):
            raise ValueError(f"unknown metric {metric!r}")
        if a not in self._idx or b not in self._idx:
            raise KeyError(f"unknown node in path({a},{b})")
        primary, secondary, parent = self._sssp(a, metric)
        bi = self._idx[b]
        if math.isinf(primary[bi]):
            return None
        seq = []
        cur = bi
        while cur != -1:
            seq.append(self._ids[cur])
            if cur == self._idx[a]:
                break
            cur = parent[cur]
        seq.reverse()
        if metric == TIME:
            duration, dist = primary[bi], secondary[bi]
        else:
            duration, dist = secondary[bi], primary[bi]
        return PathResult(distance_m=dist, duration_s=int(duration), nodes=tuple(seq))

    def nodes_reaching(self, target: int, limit_s: float) -> set[int]:
        """Nodes from which `target` is reachable within `limit_s` seconds."""
        if target not in self._idx:
            raise KeyError(f"unknown node {target}")
        dist: dict[int, float] = {}
        heap: list[tuple[float, int]] = [(0.0, self._idx[target])]
        seen: set[int] = set()
        while heap:
            d, vi = heapq.heappop(heap)
            if vi in seen:
                continue
            seen.add(vi)
            dist[self._ids[vi]] = d
            for ui, time_s, _len in self._in[vi]:
                nd = d + time_s
                if nd <= limit_s and ui not in seen:
                    heapq.heappush(heap, (nd, ui))
        return {nid for nid, d in dist.items() if d <= limit_s}


def shortest_path(net: RoadNetwork, a: int, b: int, metric: str = TIME) -> PathResult | None:
    """Minimal path under the chosen metric, or None when b is unreachable."""
    return net.path(a, b, metric)


@dataclass(frozen=True)
class TravelMatrix:
    """(duration, distance) between every ordered pair of the given nodes."""

    nodes: tuple[int, ...]
    seconds: np.ndarray
    meters: np.ndarray

    def index(self, nid: int) -> int:
        return self.nodes.index(nid)


def travel_matrix(net: RoadNetwork, nodes: Sequence[int]) -> TravelMatrix:
    """Batch all-pairs query over a node subset; unreachable pairs are inf."""
    if not nodes:
        raise ValueError("travel_matrix needs a nonempty node set")
    order = tuple(sorted(set(nodes)))
    n = len(order)
    seconds = np.full((n, n), np.inf)
    meters = np.full((n, n), np.inf)
    for i, a in enumerate(order):
        for j, b in enumerate(order):
            got = net.leg(a, b)
            if got is not None:
                seconds[i, j] = got[0]
                meters[i, j] = got[1]
    return TravelMatrix(nodes=order, seconds=seconds, meters=meters)


# -- file I/O ----------------------------------------------------------------


def load_network(path: str | Path) -> RoadNetwork:
    """Load nodes.csv and edges.csv from a directory.

    nodes.csv: id,lat,lon
    edges.csv: from,to,length_m,speed_kmh,class   (speed may be empty; it is
    then filled from the road class: highway 130, living street 20, else 50)
    """
    directory = Path(path)
    nodes_file = directory / "nodes.csv"
    edges_file = directory / "edges.csv"
    for f in (nodes_file, edges_file):
        if not f.exists():
            raise NetworkFormatError(f"missing network file: {f}")

    nodes: list[tuple[int, float, float]] = []
    with open(nodes_file, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) < {"id", "lat", "lon"}:
            raise NetworkFormatError(f"{nodes_file}: header must be id,lat,lon")
        for lineno, row in enumerate(reader, start=2):
            try:
                nodes.append((int(row["id"]), float(row["lat"]), float(row["lon"])))
            except (TypeError, ValueError) as exc:
                raise NetworkFormatError(f"{nodes_file}:{lineno}: {exc}") from exc

    edges: list[tuple[int, int, float, float]] = []
    with open(edges_file, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"from", "to", "length_m", "speed_kmh", "class"}
        if reader.fieldnames is None or set(reader.fieldnames) < required:
            raise NetworkFormatError(f"{edges_file}: header must be from,to,length_m,speed_kmh,class")
        for lineno, row in enumerate(reader, start=2):
            try:
                u, v = int(row["from"]), int(row["to"])
                length_m = float(row["length_m"])
                raw_speed = (row["speed_kmh"] or "").strip()
                if raw_speed:
                    speed = float(raw_speed)
                else:
                    road_class = (row["class"] or "").strip().lower()
                    speed = ROAD_CLASS_SPEEDS_KMH.get(road_class, DEFAULT_SPEED_KMH)
            except (TypeError, ValueError) as exc:
                raise NetworkFormatError(f"{edges_file}:{lineno}: {exc}") from exc
            if length_m <= 0:
                raise NetworkFormatError(f"{edges_file}:{lineno}: non-positive length {length_m}")
            edges.append((u, v, length_m, speed))

    try:
        return RoadNetwork(nodes, edges)
    except NetworkFormatError as exc:
        raise NetworkFormatError(f"{directory}: {exc}") from exc


def write_network(net: RoadNetwork, path: str | Path) -> None:
    """Emit nodes.csv / edges.csv in the load_network format."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "nodes.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "lat", "lon"])
        for nid in net.node_ids:
            lat, lon = net.node_coords(nid)
            w.writerow([nid, lat, lon])
    with open(directory / "edges.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["from", "to", "length_m", "speed_kmh", "class"])
        for u, v, length_m, _time_s in net.edges():
            w.writerow([u, v, length_m, repr(net.edge_speed(u, v)), ""])


def grid_network(rows: int, cols: int, edge_len_m: float = 100.0, speed_kmh: float = 36.0) -> RoadNetwork:
    """Rectangular grid city with bidirectional streets.

    Node (r, c) has id r * cols + c.  The defaults give exactly 10 s per
    100 m segment, which keeps scripted scenarios integral.
    """
    nodes = []
    edges = []
    for r in range(rows):
        for c in range(cols):
            nid = r * cols + c
            nodes.append((nid, float(r), float(c)))
            if c + 1 < cols:
                edges.append((nid, nid + 1, edge_len_m, speed_kmh))
                edges.append((nid + 1, nid, edge_len_m, speed_kmh))
            if r + 1 < rows:
                edges.append((nid, nid + cols, edge_len_m, speed_kmh))
                edges.append((nid + cols, nid, edge_len_m, speed_kmh))
    return RoadNetwork(nodes, edges)
