"""Insertion-heuristic dispatcher.

Each new request is placed into the plan of whichever vehicle admits the
cheapest feasible (pickup, drop-off) insertion.  The relative order of all
pre-existing stops never changes, so earlier decisions are never revisited.
Stations take part through a representative empty vehicle standing at the
station node; when an insertion lands on a representative, one parked
vehicle materializes with that plan and joins the scan for the rest of the
batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .model import (
    Infeasibility,
    Plan,
    Request,
    Stop,
    VehicleState,
    dropoff,
    evaluate_plan,
    pickup,
    station_representative,
)
from .network import RoadNetwork


@dataclass(frozen=True)
class InsertionResult:
    """The cheapest feasible insertion found for one request."""

    vehicle_id: int
    stops: tuple[Stop, ...]
    plan: Plan
    delta_cost_m: float
    pickup_index: int
    dropoff_index: int


def insert_request(
    net: RoadNetwork,
    vehicles: Sequence[VehicleState],
    request: Request,
    now: int,
    q_max: int,
) -> InsertionResult | None:
    """Scan every vehicle and every (i, j) position; None when unassignable.

    Ties break on (vehicle id, pickup index, drop-off index).
    """
    best: tuple[float, int, int, int] | None = None
    best_result: InsertionResult | None = None
    for vehicle in sorted(vehicles, key=lambda v: v.id):
        current = list(vehicle.plan_stops)
        base = evaluate_plan(net, vehicle, current, now, q_max)
        if isinstance(base, Infeasibility):
            continue  # a vehicle that cannot run its own plan takes no insertions
        for i in range(len(current) + 1):
            with_pickup = current[:i] + [pickup(request)] + current[i:]
            for j in range(i + 1, len(with_pickup) + 1):
                candidate = with_pickup[:j] + [dropoff(request)] + with_pickup[j:]
                result = evaluate_plan(net, vehicle, candidate, now, q_max)
                if isinstance(result, Infeasibility):
                    continue
                delta = result.cost_m - base.cost_m
                key = (delta, vehicle.id, i, j)
                if best is None or key < best:
                    best = key
                    best_result = InsertionResult(
                        vehicle_id=vehicle.id,
                        stops=tuple(candidate),
                        plan=result,
                        delta_cost_m=delta,
                        pickup_index=i,
                        dropoff_index=j,
                    )
    return best_result


@dataclass
class IhBatchResult:
    """Plan updates computed by one insertion-heuristic batch."""

    plans: dict[int, tuple[Stop, ...]] = field(default_factory=dict)
    spawns: list[tuple[int, int, tuple[Stop, ...]]] = field(default_factory=list)  # (station, vehicle, stops)
    rejected: list[int] = field(default_factory=list)
    total_delta_m: float = 0.0


def dispatch_batch_ih(
    net: RoadNetwork,
    vehicles: Sequence[VehicleState],
    station_nodes: Mapping[int, int],
    station_parked: Mapping[int, Sequence[int]],
    new_requests: Sequence[Request],
    now: int,
    q_max: int,
    capacity: int,
) -> IhBatchResult:
    """Insert each new request in (announcement, id) order.

    Later insertions see the plans produced by earlier ones.  Requests with
    no feasible insertion anywhere are reported back as rejected.
    """
    result = IhBatchResult()
    pool: dict[int, VehicleState] = {
        v.id: VehicleState(
            id=v.id, position=v.position, capacity=v.capacity,
            onboard=dict(v.onboard), plan_stops=tuple(v.plan_stops),
            ready_s=v.ready_s, station_id=v.station_id,
        )
        for v in vehicles
    }
    remaining = {sid: sorted(ids) for sid, ids in station_parked.items()}
    spawned_from: dict[int, int] = {}  # representative's spawn vehicle id -> station

    def reps() -> list[VehicleState]:
        return [
            station_representative(sid, station_nodes[sid], capacity, now)
            for sid in sorted(remaining)
            if remaining[sid]
        ]

    for request in sorted(new_requests, key=lambda r: (r.announce_s, r.id)):
        candidates = list(pool.values()) + reps()
        found = insert_request(net, candidates, request, now, q_max)
        if found is None:
            result.rejected.append(request.id)
            continue
        result.total_delta_m += found.delta_cost_m
        chosen = next(v for v in candidates if v.id == found.vehicle_id)
        if chosen.station_id is not None and chosen.id not in pool:
            sid = chosen.station_id
            vid = remaining[sid].pop(0)
            spawned_from[vid] = sid
            pool[vid] = VehicleState(
                id=vid, position=chosen.position, capacity=chosen.capacity,
                plan_stops=found.stops, ready_s=now, station_id=None,
            )
            result.spawns.append((sid, vid, found.stops))
        else:
            pool[chosen.id] = VehicleState(
                id=chosen.id, position=chosen.position, capacity=chosen.capacity,
                onboard=chosen.onboard, plan_stops=found.stops,
                ready_s=chosen.ready_s, station_id=chosen.station_id,
            )
            if chosen.id in spawned_from:
                sid = spawned_from[chosen.id]
                result.spawns = [
                    (s, v, found.stops if v == chosen.id else stops)
                    for s, v, stops in result.spawns
                ]
            else:
                result.plans[chosen.id] = found.stops
    return result
