"""Discrete-event batch simulator for a station-based on-demand fleet.

Vehicles execute precomputed timelines (edge traversals, waits, pickups,
drop-offs, parking) and are interruptible only at nodes: a replanned
vehicle keeps driving to its next node and the new plan starts there.
Every batch boundary the selected dispatcher recomputes assignments; the
group-assignment variants replan all requests not yet picked up, while the
insertion heuristic only places the newly announced ones.  Idle vehicles
drive to the nearest station, and surplus stock is rebalanced periodically.

Dispatch computations are instantaneous in simulated time; their wall time
is logged per batch.  All reported quantities cover only the analysis
window after the warm-up period.
"""

from __future__ import annotations

import json
import math
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import assignment, groupgen, ih, svdarp
from .fleet import Station, rebalance
from .model import (
    ConfigError,
    Plan,
    Request,
    ScenarioConfig,
    Stop,
    VehicleState,
    dropoff as make_dropoff,
    evaluate_plan,
    pickup as make_pickup,
    station_representative,
    write_requests,
)
from .network import RoadNetwork

DELAY_BIN_S = 30


# -- vehicle runtime -----------------------------------------------------------


class _VehicleRun:
    """Mutable per-vehicle execution state owned by the simulator."""

    __slots__ = ("id", "capacity", "node", "ready", "onboard", "pending_stops",
                 "timeline", "ti", "parked")

    def __init__(self, vid: int, capacity: int, node: int, ready: int):
        self.id = vid
        self.capacity = capacity
        self.node = node
        self.ready = ready
        self.onboard: dict[int, Request] = {}
        self.pending_stops: list[Stop] = []
        self.timeline: list[tuple] = []
        self.ti = 0
        self.parked = False

    def snapshot(self, now: int) -> VehicleState:
        node, ready = self.commit_point(now)
        return VehicleState(
            id=self.id,
            position=node,
            capacity=self.capacity,
            onboard=dict(self.onboard),
            plan_stops=tuple(self.pending_stops),
            ready_s=ready,
        )

    def commit_point(self, now: int) -> tuple[int, int]:
        """Where a new plan may start: the next node and the time it is reached."""
        if self.ti < len(self.timeline):
            entry = self.timeline[self.ti]
            if entry[0] == "edge" and entry[3] < now < entry[4]:
                return entry[2], entry[4]
        return self.node, max(self.ready, now)


def _entry_end(entry: tuple) -> int:
    kind = entry[0]
    if kind in ("edge", "wait"):
        return entry[-1]
    return entry[-1]


# -- metrics -------------------------------------------------------------------


@dataclass
class MetricsReport:
    dispatcher: str
    warmup_s: int
    horizon_s: int
    batch_s: int
    q_max_s: int
    capacity: int
    announced: int = 0
    served: int = 0
    rejected: int = 0
    active_at_end: int = 0
    total_vehicle_km: float = 0.0
    avg_delay_s: float = 0.0
    delay_histogram: dict[int, int] = field(default_factory=dict)  # bin lower edge -> count
    occupancy_km: dict[int, float] = field(default_factory=dict)
    mean_occupancy: float = 0.0
    avg_density_veh_per_km: float = 0.0
    congested_segments: int = 0
    heavily_loaded_segments: int = 0
    used_vehicles: int = 0
    q_max_violations: int = 0
    batches: int = 0
    avg_batch_ms: float = 0.0
    max_batch_ms: float = 0.0
    avg_groupgen_ms: float = 0.0
    avg_solver_ms: float = 0.0
    max_group_size: int = 0

    def to_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if isinstance(value, dict):
                value = {str(k): v for k, v in sorted(value.items())}
            out[name] = value
        return out


@dataclass
class SimulationResult:
    report: MetricsReport
    delays: list[tuple[int, int, int]]  # (request id, announce_s, delay_s)
    edge_rows: list[tuple[int, int, float, int, float, float]]  # u, v, len, traversals, veh_s, density
    batch_rows: list[dict]
    traces: list[tuple[int, int, int, int, int]]  # vehicle, u, v, t0, t1 (when recorded)


def density_metrics(
    edge_vehicle_seconds: Mapping[tuple[int, int], float],
    window_s: float,
    net: RoadNetwork,
) -> tuple[float, int, int]:
    """Length-weighted average density (veh/km) and congestion counts.

    A segment is congested above 0.08 veh/m and heavily loaded above
    0.04 veh/m; density is vehicle-seconds divided by window length and
    segment length.
    """
    congested = 0
    heavy = 0
    total_veh_seconds = 0.0
    for (u, v), veh_s in edge_vehicle_seconds.items():
        length = net.edge_length(u, v)
        density = veh_s / (window_s * length)
        if density > 0.08:
            congested += 1
        if density > 0.04:
            heavy += 1
        total_veh_seconds += veh_s
    total_len = net.total_length_m()
    avg_veh_per_m = total_veh_seconds / (window_s * total_len) if total_len else 0.0
    return avg_veh_per_m * 1000.0, congested, heavy


# -- the simulation ------------------------------------------------------------


class Simulator:
    def __init__(
        self,
        cfg: ScenarioConfig,
        net: RoadNetwork,
        requests: Sequence[Request],
        stations: Sequence[Station],
        free_vehicles: Sequence[tuple[int, int]] = (),
        record_traces: bool = False,
    ):
        cfg.validate()
        self.cfg = cfg
        self.net = net
        self.end_s = cfg.warmup_s + cfg.horizon_s
        self.requests = sorted(
            (r for r in requests if r.announce_s < self.end_s),
            key=lambda r: (r.announce_s, r.id),
        )
        self.stations = {st.id: st for st in sorted(stations, key=lambda s: s.id)}
        self.record_traces = record_traces

        self.vehicles: dict[int, _VehicleRun] = {}
        self.parked: dict[int, list[int]] = {}
        next_vid = 0
        for st in self.stations.values():
            ids = list(range(next_vid, next_vid + st.initial_stock))
            next_vid += st.initial_stock
            self.parked[st.id] = ids
            st.stock = len(ids)
            for vid in ids:
                run = _VehicleRun(vid, cfg.capacity, st.node, 0)
                run.parked = True
                self.vehicles[vid] = run
        for vid, node in free_vehicles:
            if vid in self.vehicles:
                raise ConfigError(f"free vehicle id {vid} collides with a station vehicle")
            self.vehicles[vid] = _VehicleRun(vid, cfg.capacity, node, 0)
            next_vid = max(next_vid, vid + 1)
        self._next_vid = next_vid

        self.pending: dict[int, Request] = {}
        self.onboard_of: dict[int, int] = {}  # request id -> vehicle id
        self.served: dict[int, int] = {}  # request id -> delay
        self.rejected: set[int] = set()
        self._announced: list[Request] = []

        # window accounting
        self.edge_traversals: dict[tuple[int, int], int] = {}
        self.edge_vehicle_seconds: dict[tuple[int, int], float] = {}
        self.occupancy_m: dict[int, float] = {}
        self.odometers: dict[int, float] = {}
        self.traces: list[tuple[int, int, int, int, int]] = []
        self.batch_rows: list[dict] = []
        self.q_max_violations = 0

        workers = os.environ.get("VGA_DISPATCH_THREADS", "")
        self._workers = max(1, int(workers)) if workers.isdigit() else 1

    # -- window helpers --

    def _in_window(self, t: int) -> bool:
        return self.cfg.warmup_s < t <= self.end_s

    def _overlap(self, t0: int, t1: int) -> float:
        return max(0.0, min(t1, self.end_s) - max(t0, self.cfg.warmup_s))

    # -- timeline construction --

    def _leg_entries(self, pos: int, t: int, target: int) -> tuple[list[tuple], int]:
        entries: list[tuple] = []
        if pos != target:
            path = self.net.path(pos, target)
            if path is None:
                raise ConfigError(f"node {target} unreachable from {pos}")
            for a, b in zip(path.nodes, path.nodes[1:]):
                t1 = t + self.net.edge_time(a, b)
                entries.append(("edge", a, b, t, t1))
                t = t1
        return entries, t

    def _build_timeline(self, start_node: int, start_t: int, stops: Sequence[Stop]) -> list[tuple]:
        entries: list[tuple] = []
        pos, t = start_node, start_t
        for stop in stops:
            leg, t = self._leg_entries(pos, t, stop.node)
            entries.extend(leg)
            pos = stop.node
            if stop.kind == "pickup":
                if t < stop.request.announce_s:
                    entries.append(("wait", pos, t, stop.request.announce_s))
                    t = stop.request.announce_s
                entries.append(("pickup", stop.request, t))
            else:
                entries.append(("dropoff", stop.request, t))
        if self.cfg.park_when_idle and self.stations:
            sid = min(
                sorted(self.stations),
                key=lambda s: (self.net.duration(pos, self.stations[s].node), s),
            )
            target = self.stations[sid].node
            if self.net.duration(pos, target) < math.inf:
                leg, t = self._leg_entries(pos, t, target)
                entries.extend(leg)
                entries.append(("park", sid, t))
        return entries

    def _replan(self, run: _VehicleRun, now: int, stops: Sequence[Stop]) -> None:
        node, ready = run.commit_point(now)
        prefix: list[tuple] = []
        if run.ti < len(run.timeline):
            entry = run.timeline[run.ti]
            if entry[0] == "edge" and entry[3] < now < entry[4]:
                prefix = [entry]
        run.timeline = prefix + self._build_timeline(node, ready, stops)
        run.ti = 0
        run.pending_stops = list(stops)

    # -- event execution --

    def _record_edge(self, run: _VehicleRun, entry: tuple) -> None:
        _, u, v, t0, t1 = entry
        key = (u, v)
        overlap = self._overlap(t0, t1)
        if overlap > 0:
            self.edge_vehicle_seconds[key] = self.edge_vehicle_seconds.get(key, 0.0) + overlap
        if self._in_window(t1):
            length = self.net.edge_length(u, v)
            self.edge_traversals[key] = self.edge_traversals.get(key, 0) + 1
            self.odometers[run.id] = self.odometers.get(run.id, 0.0) + length
            occ = len(run.onboard)
            self.occupancy_m[occ] = self.occupancy_m.get(occ, 0.0) + length
        if self.record_traces:
            self.traces.append((run.id, u, v, t0, t1))

    def _advance_vehicle(self, run: _VehicleRun, now: int) -> None:
        while run.ti < len(run.timeline) and _entry_end(run.timeline[run.ti]) <= now:
            entry = run.timeline[run.ti]
            kind = entry[0]
            if kind == "edge":
                self._record_edge(run, entry)
                run.node = entry[2]
                run.ready = entry[4]
            elif kind == "wait":
                run.ready = entry[3]
            elif kind == "pickup":
                request, t = entry[1], entry[2]
                assert request.id in self.pending, f"pickup of non-pending request {request.id}"
                del self.pending[request.id]
                run.onboard[request.id] = request
                self.onboard_of[request.id] = run.id
                run.pending_stops.pop(0)
                run.ready = t
            elif kind == "dropoff":
                request, t = entry[1], entry[2]
                delay = (t - request.announce_s) - request.baseline_s
                if delay > self.cfg.q_max_s:
                    self.q_max_violations += 1
                del run.onboard[request.id]
                self.onboard_of.pop(request.id, None)
                self.served[request.id] = delay
                run.pending_stops.pop(0)
                run.ready = t
            elif kind == "park":
                sid, t = entry[1], entry[2]
                run.parked = True
                run.node = self.stations[sid].node
                run.ready = t
                self.parked[sid].append(run.id)
                self.parked[sid].sort()
                self.stations[sid].stock = len(self.parked[sid])
            run.ti += 1

    def _advance_all(self, now: int) -> None:
        for vid in sorted(self.vehicles):
            run = self.vehicles[vid]
            if not run.parked:
                self._advance_vehicle(run, now)

    def _flush_partial_edges(self) -> None:
        for run in self.vehicles.values():
            if run.ti < len(run.timeline):
                entry = run.timeline[run.ti]
                if entry[0] == "edge" and entry[3] < self.end_s < entry[4]:
                    key = (entry[1], entry[2])
                    overlap = self._overlap(entry[3], self.end_s)
                    if overlap > 0:
                        self.edge_vehicle_seconds[key] = (
                            self.edge_vehicle_seconds.get(key, 0.0) + overlap)

    # -- dispatch helpers --

    def _active_snapshots(self, now: int) -> list[VehicleState]:
        return [
            self.vehicles[vid].snapshot(now)
            for vid in sorted(self.vehicles)
            if not self.vehicles[vid].parked
        ]

    def _spawn_from_station(self, sid: int, vid: int, now: int) -> _VehicleRun:
        self.parked[sid].remove(vid)
        self.stations[sid].stock = len(self.parked[sid])
        run = self.vehicles[vid]
        run.parked = False
        run.node = self.stations[sid].node
        run.ready = now
        run.timeline = []
        run.ti = 0
        run.pending_stops = []
        return run

    def _apply_plan(self, vid: int, stops: tuple[Stop, ...], now: int) -> None:
        run = self.vehicles[vid]
        if not stops and not run.onboard and not run.pending_stops:
            if run.ti < len(run.timeline):
                return  # keep the current parking or rebalancing course
            if run.parked:
                return
        snapshot = run.snapshot(now)
        checked = evaluate_plan(self.net, snapshot, stops, now, self.cfg.q_max_s)
        assert isinstance(checked, Plan), f"dispatcher produced infeasible plan for {vid}: {checked}"
        self._replan(run, now, stops)

    def _dispatch_ih(self, new_requests: list[Request], now: int) -> dict:
        start = time.perf_counter()
        snapshots = self._active_snapshots(now)
        result = ih.dispatch_batch_ih(
            self.net,
            snapshots,
            {sid: st.node for sid, st in self.stations.items()},
            {sid: list(ids) for sid, ids in self.parked.items()},
            new_requests,
            now,
            self.cfg.q_max_s,
            self.cfg.capacity,
        )
        for sid, vid, stops in result.spawns:
            self._spawn_from_station(sid, vid, now)
            self._apply_plan(vid, stops, now)
        for vid, stops in sorted(result.plans.items()):
            self._apply_plan(vid, stops, now)
        for rid in result.rejected:
            self.rejected.add(rid)
            self.pending.pop(rid, None)
        return {
            "groupgen_ms": 0.0,
            "solver_ms": 0.0,
            "gap": 0.0,
            "max_group_size": 0,
            "wall_ms": (time.perf_counter() - start) * 1000.0,
        }

    def _dispatch_vga(self, now: int) -> dict:
        cfg = self.cfg
        start = time.perf_counter()
        waiting = [self.pending[rid] for rid in sorted(self.pending)]
        snapshots = self._active_snapshots(now)
        reps = [
            station_representative(sid, st.node, cfg.capacity, now)
            for sid, st in sorted(self.stations.items())
            if self.parked[sid]
        ]
        everyone = snapshots + reps

        per_vehicle_waiting: dict[int, list[Request]]
        if cfg.candidate_limit is not None:
            per_vehicle_waiting = {v.id: [] for v in everyone}
            for r in waiting:
                for v in groupgen.candidate_vehicles(self.net, everyone, r, cfg.candidate_limit):
                    per_vehicle_waiting[v.id].append(r)
        else:
            per_vehicle_waiting = {v.id: waiting for v in everyone}

        mode = svdarp.IH_FALLBACK if cfg.ih_group_threshold is not None else svdarp.EXACT
        threshold = cfg.ih_group_threshold if cfg.ih_group_threshold is not None else 4

        def generate(vehicle: VehicleState) -> groupgen.FeasibleGroupSet:
            return groupgen.generate_groups(
                self.net, vehicle, per_vehicle_waiting[vehicle.id], now, cfg.q_max_s,
                budget_ms=cfg.group_budget_ms, mode=mode, ih_threshold=threshold,
                search_ceiling=cfg.search_ceiling,
            )

        gg_start = time.perf_counter()
        if self._workers > 1:
            with ThreadPoolExecutor(max_workers=self._workers) as pool:
                groupsets = list(pool.map(generate, everyone))
        else:
            groupsets = [generate(v) for v in everyone]
        groupsets.sort(key=lambda g: (g.station_id is not None, g.vehicle_id))
        groupgen_ms = (time.perf_counter() - gg_start) * 1000.0

        covered: set[int] = set()
        for gs in groupsets:
            for key in gs.groups:
                covered.update(key)
        coverable = [r.id for r in waiting if r.id in covered]

        problem = assignment.build_problem(
            groupsets,
            {sid: len(ids) for sid, ids in self.parked.items()},
            coverable,
            target_gap=cfg.gap,
        )
        solution = assignment.solve(problem, gap=cfg.gap)
        vehicle_plans, spawns = assignment.extract_plans(
            solution, {sid: list(ids) for sid, ids in self.parked.items()})

        for sid, vid, plan in spawns:
            self._spawn_from_station(sid, vid, now)
            self._apply_plan(vid, plan.stops, now)
        for vid, plan in sorted(vehicle_plans.items()):
            self._apply_plan(vid, plan.stops, now)

        return {
            "groupgen_ms": groupgen_ms,
            "solver_ms": solution.wall_ms,
            "gap": solution.gap,
            "max_group_size": max((g.max_group_size for g in groupsets), default=0),
            "wall_ms": (time.perf_counter() - start) * 1000.0,
        }

    def _reject_unservable(self, now: int) -> None:
        """Drop pending requests no vehicle or station could serve even alone."""
        if not self.pending:
            return
        sources: list[tuple[int, int]] = []
        for vid in sorted(self.vehicles):
            run = self.vehicles[vid]
            if not run.parked:
                node, ready = run.commit_point(now)
                sources.append((node, ready))
        for sid in sorted(self.stations):
            if self.parked[sid]:
                sources.append((self.stations[sid].node, now))
        for rid in sorted(self.pending):
            r = self.pending[rid]
            best = math.inf
            for node, ready in sources:
                approach = self.net.duration(node, r.origin)
                if approach == math.inf:
                    continue
                pickup_t = max(ready + approach, r.announce_s)
                # waiting time alone already bounds the delay from below
                best = min(best, pickup_t - r.announce_s)
            if best > self.cfg.q_max_s:
                del self.pending[rid]
                self.rejected.add(rid)

    # -- main loop --

    def run(self) -> SimulationResult:
        cfg = self.cfg
        if cfg.dispatcher == "none":
            self._run_present_state()
        else:
            self._run_batched()
        self._flush_partial_edges()
        return self._build_result()

    def _run_present_state(self) -> None:
        # a dedicated private vehicle per request, already standing at the origin
        for r in self.requests:
            self._announced.append(r)
            self.pending[r.id] = r
            vid = self._next_vid
            self._next_vid += 1
            run = _VehicleRun(vid, 1, r.origin, r.announce_s)
            run.timeline = [("pickup", r, r.announce_s)]
            leg, t = self._leg_entries(r.origin, r.announce_s, r.dest)
            run.timeline.extend(leg)
            run.timeline.append(("dropoff", r, t))
            run.pending_stops = [make_pickup(r), make_dropoff(r)]
            self.vehicles[vid] = run
        self._advance_all(self.end_s)

    def _run_batched(self) -> None:
        cfg = self.cfg
        boundaries = sorted(
            {t for t in range(cfg.batch_s, self.end_s + 1, cfg.batch_s)}
            | {t for t in range(cfg.rebalance_period_s, self.end_s + 1, cfg.rebalance_period_s)}
        )
        announced_upto = 0
        carry: list[Request] = []  # announced at a rebalance-only boundary, not yet dispatched
        for boundary in boundaries:
            self._advance_all(boundary)
            while (announced_upto < len(self.requests)
                   and self.requests[announced_upto].announce_s < boundary):
                r = self.requests[announced_upto]
                self._announced.append(r)
                self.pending[r.id] = r
                carry.append(r)
                announced_upto += 1
            if boundary % cfg.batch_s == 0:
                new_requests = [r for r in carry if r.id in self.pending]
                carry = []
                if cfg.dispatcher == "ih":
                    row = self._dispatch_ih(new_requests, boundary)
                else:
                    row = self._dispatch_vga(boundary)
                self._reject_unservable(boundary)
                row.update({
                    "t": boundary,
                    "waiting": len(self.pending),
                    "active": len(self.pending) + len(self.onboard_of),
                })
                self.batch_rows.append(row)
            if boundary % cfg.rebalance_period_s == 0 and self.stations:
                self._apply_rebalancing(boundary)
        while announced_upto < len(self.requests):
            r = self.requests[announced_upto]
            self._announced.append(r)
            self.pending[r.id] = r
            announced_upto += 1
        self._advance_all(self.end_s)

    def _apply_rebalancing(self, now: int) -> None:
        orders = rebalance(self.net, list(self.stations.values()), self.cfg.surplus_fraction)
        for order in orders:
            src = self.stations[order.from_station]
            dst = self.stations[order.to_station]
            for _ in range(order.count):
                if not self.parked[src.id]:
                    break
                vid = self.parked[src.id][0]
                run = self._spawn_from_station(src.id, vid, now)
                leg, t = self._leg_entries(src.node, now, dst.node)
                run.timeline = leg + [("park", dst.id, t)]

    # -- results --

    def _build_result(self) -> SimulationResult:
        cfg = self.cfg
        window = float(cfg.horizon_s)
        report = MetricsReport(
            dispatcher=cfg.dispatcher,
            warmup_s=cfg.warmup_s,
            horizon_s=cfg.horizon_s,
            batch_s=cfg.batch_s,
            q_max_s=cfg.q_max_s,
            capacity=cfg.capacity,
        )
        report.announced = len(self._announced)
        report.served = len(self.served)
        report.rejected = len(self.rejected)
        report.active_at_end = len(self.pending) + len(self.onboard_of)
        report.q_max_violations = self.q_max_violations

        # distance accounting, twice and independently
        odometer_km = sum(self.odometers.values()) / 1000.0
        edge_km = sum(
            count * self.net.edge_length(u, v)
            for (u, v), count in self.edge_traversals.items()
        ) / 1000.0
        if abs(odometer_km - edge_km) > 1e-9:
            raise RuntimeError(
                f"distance accounting mismatch: odometers {odometer_km} vs edges {edge_km}")
        report.total_vehicle_km = edge_km

        req_by_id = {r.id: r for r in self._announced}
        delays = [
            (rid, req_by_id[rid].announce_s, d)
            for rid, d in sorted(self.served.items())
            if req_by_id[rid].announce_s >= cfg.warmup_s
        ]
        if delays:
            report.avg_delay_s = sum(d for _, _, d in delays) / len(delays)
        histogram: dict[int, int] = {}
        for _, _, d in delays:
            bin_lo = (d // DELAY_BIN_S) * DELAY_BIN_S
            histogram[bin_lo] = histogram.get(bin_lo, 0) + 1
        report.delay_histogram = histogram

        report.occupancy_km = {occ: m / 1000.0 for occ, m in sorted(self.occupancy_m.items())}
        driven_m = sum(self.occupancy_m.values())
        if driven_m > 0:
            report.mean_occupancy = sum(o * m for o, m in self.occupancy_m.items()) / driven_m

        avg_density, congested, heavy = density_metrics(
            self.edge_vehicle_seconds, window, self.net)
        report.avg_density_veh_per_km = avg_density
        report.congested_segments = congested
        report.heavily_loaded_segments = heavy
        report.used_vehicles = sum(1 for v in self.odometers.values() if v > 0)

        if self.batch_rows:
            report.batches = len(self.batch_rows)
            walls = [row["wall_ms"] for row in self.batch_rows]
            report.avg_batch_ms = sum(walls) / len(walls)
            report.max_batch_ms = max(walls)
            report.avg_groupgen_ms = sum(r["groupgen_ms"] for r in self.batch_rows) / len(self.batch_rows)
            report.avg_solver_ms = sum(r["solver_ms"] for r in self.batch_rows) / len(self.batch_rows)
            report.max_group_size = max(r["max_group_size"] for r in self.batch_rows)

        edge_rows = []
        for (u, v), veh_s in sorted(self.edge_vehicle_seconds.items()):
            length = self.net.edge_length(u, v)
            edge_rows.append((
                u, v, length,
                self.edge_traversals.get((u, v), 0),
                veh_s,
                veh_s / (window * length),
            ))
        return SimulationResult(
            report=report,
            delays=delays,
            edge_rows=edge_rows,
            batch_rows=self.batch_rows,
            traces=self.traces,
        )


def run(
    cfg: ScenarioConfig,
    net: RoadNetwork,
    requests: Sequence[Request],
    stations: Sequence[Station],
    free_vehicles: Sequence[tuple[int, int]] = (),
    record_traces: bool = False,
) -> SimulationResult:
    """Simulate one scenario and return the metrics report plus trace tables."""
    return Simulator(cfg, net, requests, stations, free_vehicles=free_vehicles,
                     record_traces=record_traces).run()


# -- synthetic demand ----------------------------------------------------------


def generate_synthetic_demand(
    seed: int,
    grid: int,
    rate_per_hour: float,
    duration_s: int,
    out_path: str | Path | None = None,
    weights: Sequence[float] | None = None,
) -> list[tuple[int, int, int, int]]:
    """Poisson request arrivals on a grid city; deterministic per seed.

    Origins and destinations are drawn from a spatial weight map over the
    grid nodes (uniform by default) with origin != destination.  Returns
    (id, t_announce_s, origin, dest) rows and optionally writes them as a
    requests CSV.
    """
    if rate_per_hour <= 0:
        raise ValueError("rate_per_hour must be positive")
    nodes = list(range(grid * grid))
    if weights is not None and len(weights) != len(nodes):
        raise ValueError("weights must have one entry per grid node")
    rng = random.Random(seed)
    rows: list[tuple[int, int, int, int]] = []
    t = 0.0
    rid = 0
    while True:
        t += rng.expovariate(rate_per_hour / 3600.0)
        if t >= duration_s:
            break
        origin = rng.choices(nodes, weights=weights)[0] if weights else rng.choice(nodes)
        dest = origin
        while dest == origin:
            dest = rng.choices(nodes, weights=weights)[0] if weights else rng.choice(nodes)
        rows.append((rid, int(t), origin, dest))
        rid += 1
    if out_path is not None:
        write_requests(rows, out_path)
    return rows


def write_outputs(result: SimulationResult, out_dir: str | Path) -> None:
    """Emit metrics.json, delays.csv, occupancy.csv, edge_density.csv, batch_log.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(
        json.dumps(result.report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with open(out / "delays.csv", "w", encoding="utf-8") as fh:
        fh.write("request_id,announce_s,delay_s\n")
        for rid, announce, d in result.delays:
            fh.write(f"{rid},{announce},{d}\n")
    with open(out / "occupancy.csv", "w", encoding="utf-8") as fh:
        fh.write("occupancy,distance_km\n")
        for occ, km in sorted(result.report.occupancy_km.items()):
            fh.write(f"{occ},{km!r}\n")
    with open(out / "edge_density.csv", "w", encoding="utf-8") as fh:
        fh.write("from,to,length_m,traversals,vehicle_seconds,density_veh_per_m\n")
        for u, v, length, count, veh_s, density in result.edge_rows:
            fh.write(f"{u},{v},{length!r},{count},{veh_s!r},{density!r}\n")
    with open(out / "batch_log.csv", "w", encoding="utf-8") as fh:
        fh.write("t,waiting,active,max_group_size,groupgen_ms,solver_ms,gap,wall_ms\n")
        for row in result.batch_rows:
            fh.write(
                f"{row['t']},{row['waiting']},{row['active']},{row['max_group_size']},"
                f"{row['groupgen_ms']:.3f},{row['solver_ms']:.3f},{row['gap']:.6f},"
                f"{row['wall_ms']:.3f}\n")
