"""Shared domain types and vehicle-plan evaluation.

A plan is an ordered pickup/drop-off sequence for one vehicle.  Evaluation
chains fastest-route travel times from the vehicle position, waits at a
pickup until the request is announced, and checks the maximum-delay and
capacity constraints.  The delay of a request is its drop-off time minus
its announcement time minus the direct-route duration, so waiting time is
part of the delay.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from .network import RoadNetwork

PICKUP = "pickup"
DROPOFF = "dropoff"

# station representative vehicles get ids above this, so real vehicles
# always win deterministic id tie-breaks
STATION_REP_BASE = 1_000_000_000

DISPATCHERS = ("none", "ih", "vga", "vga-limited", "vga-pnas")


class ConfigError(ValueError):
    """Scenario configuration is inconsistent or incomplete."""


class DataError(ValueError):
    """An input data file is missing or malformed."""


@dataclass(frozen=True)
class Request:
    """One travel request, revealed at its announcement time."""

    id: int
    announce_s: int
    origin: int
    dest: int
    baseline_s: int  # fastest-route duration origin -> dest

    def __post_init__(self):
        if self.origin == self.dest:
            raise DataError(f"request {self.id}: origin equals destination ({self.origin})")
        if self.announce_s < 0:
            raise DataError(f"request {self.id}: negative announcement time")


@dataclass(frozen=True)
class Stop:
    """A pickup or drop-off location in a vehicle plan."""

    kind: str  # PICKUP or DROPOFF
    request: Request
    node: int  # request origin for a pickup, destination for a drop-off

    def sort_key(self) -> tuple[int, int]:
        return (self.request.id, 0 if self.kind == PICKUP else 1)


def pickup(request: Request) -> Stop:
    return Stop(PICKUP, request, request.origin)


def dropoff(request: Request) -> Stop:
    return Stop(DROPOFF, request, request.dest)


@dataclass(frozen=True)
class Plan:
    """An evaluated stop sequence: operating cost plus per-request delays."""

    vehicle_id: int
    stops: tuple[Stop, ...]
    cost_m: float
    delays: Mapping[int, int]  # request id -> delay seconds, for every drop-off served
    required_capacity: int


@dataclass(frozen=True)
class Infeasibility:
    """Why a stop sequence cannot be served: delay, capacity, or ordering."""

    reason: str
    request_id: int | None = None


@dataclass
class VehicleState:
    """Snapshot of one vehicle handed to the dispatchers.

    `ready_s` is the earliest time the vehicle can depart from `position`
    (vehicles mid-edge at a batch boundary snap to their next node, which
    they reach at `ready_s`).  The simulator owns these objects; dispatch
    code must treat them as read-only.
    """

    id: int
    position: int
    capacity: int
    onboard: dict[int, Request] = field(default_factory=dict)
    plan_stops: tuple[Stop, ...] = ()
    ready_s: int = 0
    station_id: int | None = None


def station_representative(station_id: int, node: int, capacity: int, now: int) -> VehicleState:
    """A fresh empty vehicle standing in for any vehicle parked at a station."""
    return VehicleState(
        id=STATION_REP_BASE + station_id,
        position=node,
        capacity=capacity,
        ready_s=now,
        station_id=station_id,
    )


def evaluate_plan(
    net: RoadNetwork,
    vehicle: VehicleState,
    stops: Sequence[Stop],
    now: int,
    q_max: int,
) -> Plan | Infeasibility:
    """Evaluate a stop sequence for a vehicle; pure function of its arguments.

    Returns the costed Plan when every served request keeps its delay within
    q_max and running occupancy stays within capacity; otherwise reports the
    violated constraint and the offending request.
    """
    onboard = set(vehicle.onboard)
    picked: set[int] = set()
    dropped: set[int] = set()
    for stop in stops:
        rid = stop.request.id
        if stop.kind == PICKUP:
            if rid in onboard or rid in picked:
                return Infeasibility("ordering", rid)
            picked.add(rid)
        else:
            if rid in dropped or (rid not in picked and rid not in onboard):
                return Infeasibility("ordering", rid)
            dropped.add(rid)
    missing = (onboard | picked) - dropped
    if missing:
        return Infeasibility("ordering", min(missing))

    t = max(now, vehicle.ready_s)
    pos = vehicle.position
    occupancy = len(onboard)
    max_occupancy = occupancy
    cost = 0.0
    delays: dict[int, int] = {}
    for stop in stops:
        legdata = net.leg(pos, stop.node)
        if legdata is None:
            return Infeasibility("delay", stop.request.id)  # can never arrive
        dur, dist = legdata
        t += dur
        cost += dist
        pos = stop.node
        if stop.kind == PICKUP:
            t = max(t, stop.request.announce_s)  # idle at the origin until announced
            occupancy += 1
            if occupancy > vehicle.capacity:
                return Infeasibility("capacity", stop.request.id)
            max_occupancy = max(max_occupancy, occupancy)
        else:
            delay = (t - stop.request.announce_s) - stop.request.baseline_s
            if delay > q_max:
                return Infeasibility("delay", stop.request.id)
            delays[stop.request.id] = delay
            occupancy -= 1
    return Plan(
        vehicle_id=vehicle.id,
        stops=tuple(stops),
        cost_m=cost,
        delays=delays,
        required_capacity=max_occupancy,
    )


def plan_distance(net: RoadNetwork, start: int, stops: Sequence[Stop]) -> float:
    """Sum of leg distances from `start` through the stop sequence; 0 when empty."""
    total = 0.0
    pos = start
    for stop in stops:
        legdata = net.leg(pos, stop.node)
        if legdata is None:
            raise ValueError(f"stop at node {stop.node} unreachable from {pos}")
        total += legdata[1]
        pos = stop.node
    return total


def rebind_plan(plan: Plan, vehicle_id: int) -> Plan:
    """Reassign a plan to another identical vehicle at the same position."""
    return replace(plan, vehicle_id=vehicle_id)


@dataclass
class ScenarioConfig:
    """One simulation scenario: service constraints, dispatcher, periods."""

    dispatcher: str = "ih"
    q_max_s: int = 240
    capacity: int = 5
    batch_s: int = 30
    gap: float = 0.0002
    group_budget_ms: float | None = None
    warmup_s: int = 1800
    horizon_s: int = 3600
    rebalance_period_s: int = 60
    tau_fraction: float = 0.85
    surplus_fraction: float = 1.05
    candidate_limit: int | None = None  # restrict each request to its N nearest vehicles
    ih_group_threshold: int | None = None  # groups above this size get heuristic plans
    search_ceiling: int = 12
    park_when_idle: bool = True
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.dispatcher not in DISPATCHERS:
            raise ConfigError(f"unknown dispatcher {self.dispatcher!r}; expected one of {DISPATCHERS}")
        if self.q_max_s <= 0:
            raise ConfigError("q_max_s must be positive")
        if self.batch_s <= 0:
            raise ConfigError("batch_s must be positive")
        if self.gap < 0:
            raise ConfigError("gap must be nonnegative")
        if self.capacity < 1:
            raise ConfigError("capacity must be at least 1")
        if self.warmup_s < 0 or self.horizon_s <= 0:
            raise ConfigError("warmup_s must be >= 0 and horizon_s > 0")
        if self.rebalance_period_s <= 0:
            raise ConfigError("rebalance_period_s must be positive")
        if not (0 < self.tau_fraction <= 1):
            raise ConfigError("tau_fraction must be in (0, 1]")
        if self.surplus_fraction < 1:
            raise ConfigError("surplus_fraction must be >= 1")
        if self.group_budget_ms is not None and self.group_budget_ms <= 0:
            raise ConfigError("group_budget_ms must be positive when set")
        if self.candidate_limit is not None and self.candidate_limit < 1:
            raise ConfigError("candidate_limit must be >= 1 when set")

    @classmethod
    def from_json(cls, path: str | Path) -> "ScenarioConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def load_requests(path: str | Path, net: RoadNetwork) -> list[Request]:
    """Read the requests CSV (id,t_announce_s,origin_node,dest_node).

    Baseline durations are computed from the network at load time.
    """
    p = Path(path)
    if not p.exists():
        raise DataError(f"requests file not found: {p}")
    out: list[Request] = []
    seen: set[int] = set()
    with open(p, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "t_announce_s", "origin_node", "dest_node"}
        if reader.fieldnames is None or set(reader.fieldnames) < required:
            raise DataError(f"{p}: header must be id,t_announce_s,origin_node,dest_node")
        for lineno, row in enumerate(reader, start=2):
            try:
                rid = int(row["id"])
                t = int(row["t_announce_s"])
                o = int(row["origin_node"])
                d = int(row["dest_node"])
            except (TypeError, ValueError) as exc:
                raise DataError(f"{p}:{lineno}: {exc}") from exc
            if rid in seen:
                raise DataError(f"{p}:{lineno}: duplicate request id {rid}")
            seen.add(rid)
            if not net.has_node(o) or not net.has_node(d):
                raise DataError(f"{p}:{lineno}: unknown node in request {rid}")
            base = net.duration(o, d)
            if base == float("inf"):
                raise DataError(f"{p}:{lineno}: request {rid} destination unreachable from origin")
            out.append(Request(id=rid, announce_s=t, origin=o, dest=d, baseline_s=int(base)))
    out.sort(key=lambda r: (r.announce_s, r.id))
    return out


def write_requests(rows: Sequence[tuple[int, int, int, int]], path: str | Path) -> None:
    """Write (id, t_announce_s, origin, dest) rows in the requests CSV format."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "t_announce_s", "origin_node", "dest_node"])
        for row in rows:
            w.writerow(row)
