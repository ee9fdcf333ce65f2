"""Exact single-vehicle pickup/drop-off routing.

Decides whether one vehicle can serve a request group within the delay and
capacity constraints and, if so, returns the minimum-distance plan.  The
search enumerates stop orderings depth-first over a workspace allocated
once per call, pruning any partial plan whose clock already exceeds the
latest permissible time of some stop that still has to be added:

  latest drop-off of r = announce + baseline + q_max
  latest pickup of r   = latest drop-off - direct duration(origin, dest)

For groups above a configurable size the plan can instead be built by
sequential cheapest insertion, trading optimality for speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import (
    DROPOFF,
    PICKUP,
    Infeasibility,
    Plan,
    Request,
    Stop,
    VehicleState,
    dropoff,
    evaluate_plan,
    pickup,
)
from .network import RoadNetwork

EXACT = "exact"
IH_FALLBACK = "ih-fallback"


class SearchCeilingExceeded(RuntimeError):
    """The group is larger than the configured permutation-search ceiling."""


@dataclass(frozen=True)
class GroupPlanResult:
    """Outcome of the feasibility-and-plan query for one vehicle and group."""

    feasible: bool
    plan: Plan | None
    explored: int  # search-tree nodes visited, for benchmarking


def feasible_and_optimal(
    net: RoadNetwork,
    vehicle: VehicleState,
    group: Iterable[Request],
    now: int,
    q_max: int,
    mode: str = EXACT,
    ih_threshold: int = 4,
    search_ceiling: int = 12,
    warm_start: tuple[Stop, ...] | None = None,
) -> GroupPlanResult:
    """Test group feasibility for a vehicle and return its best plan.

    The group must contain every request currently onboard the vehicle.
    In exact mode the returned plan has minimum distance over all stop
    orderings.  A caller that already knows some feasible stop sequence for
    the group may pass it as `warm_start`; it only seeds the incumbent used
    for pruning and never changes which cost is optimal.
    """
    requests = sorted(group, key=lambda r: r.id)
    onboard_ids = set(vehicle.onboard)
    group_ids = {r.id for r in requests}
    if not onboard_ids <= group_ids and requests:
        raise ValueError(f"group for vehicle {vehicle.id} is missing onboard requests "
                         f"{sorted(onboard_ids - group_ids)}")
    if not requests and onboard_ids:
        raise ValueError(f"empty group for vehicle {vehicle.id} with passengers onboard")
    if len(requests) > search_ceiling:
        raise SearchCeilingExceeded(
            f"group of {len(requests)} requests exceeds search ceiling {search_ceiling}")

    if not requests:
        empty = evaluate_plan(net, vehicle, (), now, q_max)
        assert isinstance(empty, Plan)
        return GroupPlanResult(feasible=True, plan=empty, explored=1)

    if mode == IH_FALLBACK and len(requests) > ih_threshold:
        return _insertion_plan(net, vehicle, requests, now, q_max, search_ceiling)
    if mode not in (EXACT, IH_FALLBACK):
        raise ValueError(f"unknown mode {mode!r}")
    return _exact_search(net, vehicle, requests, now, q_max, warm_start)


def _exact_search(
    net: RoadNetwork,
    vehicle: VehicleState,
    requests: list[Request],
    now: int,
    q_max: int,
    warm_start: tuple[Stop, ...] | None = None,
) -> GroupPlanResult:
    onboard_ids = set(vehicle.onboard)
    stops: list[Stop] = []
    for r in requests:
        if r.id not in onboard_ids:
            stops.append(pickup(r))
        stops.append(dropoff(r))
    stops.sort(key=lambda s: s.sort_key())
    n = len(stops)

    nodes = [s.node for s in stops]
    is_pickup = [s.kind == PICKUP for s in stops]
    announce = [s.request.announce_s for s in stops]
    pair_of: list[int | None] = [None] * n  # dropoff index -> its pickup index
    pickup_idx = {s.request.id: i for i, s in enumerate(stops) if s.kind == PICKUP}
    latest = [0.0] * n
    for i, s in enumerate(stops):
        r = s.request
        latest_drop = r.announce_s + r.baseline_s + q_max
        if is_pickup[i]:
            latest[i] = latest_drop - net.duration(r.origin, r.dest)
        else:
            latest[i] = latest_drop
            pair_of[i] = pickup_idx.get(r.id)

    # leg rows over {vehicle position} + stop nodes, fetched lazily; most of
    # the table is never touched once the look-ahead starts cutting branches
    points = [vehicle.position] + nodes
    m = len(points)
    inf = math.inf
    dur: list[list[float] | None] = [None] * m
    dist: list[list[float] | None] = [None] * m

    def rows(a: int) -> tuple[list[float], list[float]]:
        row_d = dur[a]
        if row_d is None:
            row_d = [inf] * m
            row_m = [inf] * m
            for b in range(m):
                got = net.leg(points[a], points[b])
                if got is not None:
                    row_d[b], row_m[b] = got
            dur[a] = row_d
            dist[a] = row_m
        return dur[a], dist[a]  # type: ignore[return-value]

    used = [False] * n
    start_t = max(now, vehicle.ready_s)
    capacity = vehicle.capacity

    best_cost = math.inf
    best_seq: list[int] | None = None
    warm_plan: Plan | None = None
    if warm_start is not None and len(warm_start) == n:
        checked = evaluate_plan(net, vehicle, warm_start, now, q_max)
        if isinstance(checked, Plan):
            warm_plan = checked
            best_cost = checked.cost_m
    explored = 0

    # DFS over an in-place workspace, candidates in stop-key order; the
    # incumbent only tightens pruning, so the optimal cost is unaffected
    seq: list[int] = [0] * n

    def dfs(depth: int, pos: int, t: int, cost: float, occupancy: int) -> None:
        nonlocal best_cost, best_seq, explored
        if depth == n:
            if cost < best_cost or best_seq is None:
                best_cost = cost
                best_seq = seq[:]
            return
        row_d0, row_m0 = rows(pos)
        for i in range(n):
            if used[i]:
                continue
            if not is_pickup[i]:
                pi = pair_of[i]
                if pi is not None and not used[pi]:
                    continue  # drop-off before its pickup
            t2 = t + row_d0[i + 1]
            if t2 > latest[i]:
                continue
            cost2 = cost + row_m0[i + 1]
            if cost2 > best_cost or (cost2 == best_cost and best_seq is not None):
                continue  # cannot improve; equal-cost plans found later are lex-greater
            if is_pickup[i]:
                occ2 = occupancy + 1
                if occ2 > capacity:
                    continue
                t3 = max(t2, announce[i])
            else:
                occ2 = occupancy - 1
                t3 = t2
            # look-ahead over the stops still waiting: each must stay reachable
            # before its deadline, and visiting it bounds the remaining cost
            viable = True
            remaining_lb = 0.0
            row_d, row_m = rows(i + 1)
            for j in range(n):
                if j != i and not used[j]:
                    if t3 + row_d[j + 1] > latest[j]:
                        viable = False
                        break
                    if row_m[j + 1] > remaining_lb:
                        remaining_lb = row_m[j + 1]
            if not viable:
                continue
            bound = cost2 + remaining_lb
            if bound > best_cost or (bound == best_cost and best_seq is not None):
                continue
            explored += 1
            used[i] = True
            seq[depth] = i
            dfs(depth + 1, i + 1, t3, cost2, occ2)
            used[i] = False

    dfs(0, 0, start_t, 0.0, len(onboard_ids))

    if best_seq is None:
        if warm_plan is not None:
            return GroupPlanResult(feasible=True, plan=warm_plan, explored=explored)
        return GroupPlanResult(feasible=False, plan=None, explored=explored)
    ordered = tuple(stops[i] for i in best_seq)
    plan = evaluate_plan(net, vehicle, ordered, now, q_max)
    assert isinstance(plan, Plan), f"search returned an infeasible plan: {plan}"
    return GroupPlanResult(feasible=True, plan=plan, explored=explored)


def cheapest_insertion(
    net: RoadNetwork,
    vehicle: VehicleState,
    stops: Sequence[Stop],
    request: Request,
    now: int,
    q_max: int,
) -> tuple[Stop, ...] | None:
    """Best order-preserving placement of one request into a stop sequence."""
    best: tuple[float, int, int] | None = None
    best_stops: tuple[Stop, ...] | None = None
    stops = list(stops)
    for i in range(len(stops) + 1):
        with_pickup = stops[:i] + [pickup(request)] + stops[i:]
        for j in range(i + 1, len(with_pickup) + 1):
            candidate = with_pickup[:j] + [dropoff(request)] + with_pickup[j:]
            result = evaluate_plan(net, vehicle, candidate, now, q_max)
            if isinstance(result, Infeasibility):
                continue
            key = (result.cost_m, i, j)
            if best is None or key < best:
                best = key
                best_stops = tuple(candidate)
    return best_stops


def _insertion_plan(
    net: RoadNetwork,
    vehicle: VehicleState,
    requests: list[Request],
    now: int,
    q_max: int,
    search_ceiling: int,
) -> GroupPlanResult:
    """Heuristic plan: exact ordering of onboard drop-offs, then cheapest
    insertion of each remaining request in id order."""
    onboard = [r for r in requests if r.id in vehicle.onboard]
    waiting = [r for r in requests if r.id not in vehicle.onboard]
    base = _exact_search(net, vehicle, onboard, now, q_max) if onboard else GroupPlanResult(
        True, evaluate_plan(net, vehicle, (), now, q_max), 1)
    if not base.feasible:
        return GroupPlanResult(False, None, base.explored)
    assert base.plan is not None
    stops: tuple[Stop, ...] = base.plan.stops
    explored = base.explored
    for r in waiting:
        explored += (len(stops) + 1) * (len(stops) + 2) // 2
        placed = cheapest_insertion(net, vehicle, stops, r, now, q_max)
        if placed is None:
            return GroupPlanResult(False, None, explored)
        stops = placed
    final = evaluate_plan(net, vehicle, stops, now, q_max)
    assert isinstance(final, Plan)
    return GroupPlanResult(True, final, explored)
