"""Per-vehicle enumeration of feasible request groups.

Groups are grown level by level: feasible singletons first, then each
level-k group is extended with every feasible singleton.  A candidate is
tested at most once (tracked in a checked-set) and only if all of its
sub-groups one waiting request smaller were themselves feasible, which is
sound because any subset of a feasible group is feasible.  For a vehicle
with passengers onboard, every group implicitly contains those passengers
and levels count only the added waiting requests.

An optional wall-clock budget stops the enumeration between feasibility
tests; the truncated output is still valid for the assignment step because
every stored group was independently verified.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .model import Plan, Request, VehicleState, dropoff, pickup
from .network import RoadNetwork
from . import svdarp


@dataclass
class FeasibleGroupSet:
    """All feasible groups of one vehicle, keyed by sorted request-id tuple."""

    vehicle_id: int
    groups: dict[tuple[int, ...], Plan] = field(default_factory=dict)
    max_group_size: int = 0
    elapsed_ms: float = 0.0
    truncated: bool = False
    feasibility_checks: int = 0
    station_id: int | None = None  # set when this vehicle represents a station's stock


def generate_groups(
    net: RoadNetwork,
    vehicle: VehicleState,
    waiting: Iterable[Request],
    now: int,
    q_max: int,
    budget_ms: float | None = None,
    mode: str = svdarp.EXACT,
    ih_threshold: int = 4,
    search_ceiling: int = 12,
) -> FeasibleGroupSet:
    """Enumerate every request group the vehicle can serve, with optimal plans."""
    start = time.perf_counter()
    out = FeasibleGroupSet(vehicle_id=vehicle.id, station_id=vehicle.station_id)
    onboard = sorted(vehicle.onboard.values(), key=lambda r: r.id)
    onboard_ids = tuple(r.id for r in onboard)

    def over_budget() -> bool:
        return budget_ms is not None and (time.perf_counter() - start) * 1000.0 >= budget_ms

    def test(reqs: list[Request], warm: tuple | None = None) -> Plan | None:
        out.feasibility_checks += 1
        try:
            result = svdarp.feasible_and_optimal(
                net, vehicle, reqs, now, q_max,
                mode=mode, ih_threshold=ih_threshold, search_ceiling=search_ceiling,
                warm_start=warm,
            )
        except svdarp.SearchCeilingExceeded:
            out.truncated = True  # enumeration stops at the ceiling, stored groups stay valid
            return None
        return result.plan if result.feasible else None

    # base group: the onboard passengers alone (the go-idle plan when empty)
    base_plan = test(list(onboard))
    if base_plan is None:
        raise RuntimeError(
            f"vehicle {vehicle.id} cannot deliver its own onboard passengers {onboard_ids}")
    out.groups[onboard_ids] = base_plan
    out.max_group_size = len(onboard_ids)

    ready = max(now, vehicle.ready_s)

    def reachable_in_time(r: Request) -> bool:
        # latest pickup = announce + baseline + q_max - direct time; arriving
        # later than that dooms the drop-off no matter what follows
        latest_pickup = r.announce_s + r.baseline_s + q_max - net.duration(r.origin, r.dest)
        return ready + net.duration(vehicle.position, r.origin) <= latest_pickup

    by_id = {r.id: r for r in onboard}
    singles: list[Request] = []
    level: set[frozenset[int]] = set()
    for r in sorted(waiting, key=lambda x: x.id):
        if not reachable_in_time(r):
            continue
        if over_budget():
            out.truncated = True
            break
        warm = base_plan.stops + (pickup(r), dropoff(r))
        plan = test(onboard + [r], warm)
        if plan is not None:
            key = tuple(sorted(onboard_ids + (r.id,)))
            out.groups[key] = plan
            singles.append(r)
            level.add(frozenset((r.id,)))
            by_id[r.id] = r
            out.max_group_size = max(out.max_group_size, len(key))

    while level and not out.truncated:
        next_level: set[frozenset[int]] = set()
        checked: set[frozenset[int]] = set()
        for part in sorted(level, key=sorted):
            parent_key = tuple(sorted(onboard_ids + tuple(part)))
            parent_plan = out.groups[parent_key]
            for r in singles:
                if r.id in part:
                    continue
                cand = part | {r.id}
                if cand in checked:
                    continue
                checked.add(cand)
                if any(cand - {x} not in level for x in cand):
                    continue
                if over_budget():
                    out.truncated = True
                    break
                reqs = onboard + sorted((by_id[i] for i in cand), key=lambda x: x.id)
                warm = parent_plan.stops + (pickup(r), dropoff(r))
                plan = test(reqs, warm)
                if plan is not None:
                    key = tuple(sorted(onboard_ids + tuple(cand)))
                    out.groups[key] = plan
                    next_level.add(cand)
                    out.max_group_size = max(out.max_group_size, len(key))
            if out.truncated:
                break
        level = next_level

    out.elapsed_ms = (time.perf_counter() - start) * 1000.0
    return out


def candidate_vehicles(
    net: RoadNetwork,
    vehicles: Sequence[VehicleState],
    request: Request,
    limit: int,
) -> list[VehicleState]:
    """The `limit` vehicles closest in travel time to the request origin.

    Equidistant vehicles break ties on the lower vehicle id; fewer vehicles
    than the limit returns them all.
    """
    if limit < 1:
        raise ValueError("limit must be at least 1")
    ranked = sorted(vehicles, key=lambda v: (net.duration(v.position, request.origin), v.id))
    return ranked[:limit]
