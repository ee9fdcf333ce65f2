"""Scripted scenarios with known outcomes.

The grid tradeoff scenario is a two-batch episode on a small grid where the
optimal dispatcher saves one segment of total driven distance compared to
the insertion heuristic, but does so by pulling one extra vehicle out of
the station: the insertion heuristic finishes at 15 grid segments with two
vehicles, the optimal assignment at 14 segments with three.  It illustrates
that cheaper operation can cost more capital.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fleet import Station
from .model import Request, ScenarioConfig
from .network import RoadNetwork, grid_network


@dataclass
class ScriptedScenario:
    net: RoadNetwork
    requests: list[Request]
    stations: list[Station]
    free_vehicles: list[tuple[int, int]]
    config: ScenarioConfig


def grid_tradeoff_scenario(dispatcher: str) -> ScriptedScenario:
    """Two batches, three requests, two roaming vehicles plus one parked.

    Grid is 6 rows x 8 columns with 100 m segments driven in 10 s.  Requests
    1 and 2 arrive before the first batch; request 3 arrives during the
    second.  Totals at completion: insertion heuristic 15 segments driven
    with 2 vehicles used, optimal assignment 14 segments with 3.
    """
    cols = 8
    net = grid_network(6, cols)

    def node(x: int, y: int) -> int:
        return y * cols + x

    def req(rid: int, t: int, o: int, d: int) -> Request:
        return Request(rid, t, o, d, int(net.duration(o, d)))

    requests = [
        req(1, 0, node(1, 0), node(0, 0)),
        req(2, 0, node(1, 4), node(0, 5)),
        req(3, 35, node(4, 1), node(6, 0)),
    ]
    stations = [Station.create(0, node(5, 3), 1)]
    free_vehicles = [(100, node(1, 3)), (101, node(5, 0))]
    config = ScenarioConfig(
        dispatcher=dispatcher,
        q_max_s=150,
        capacity=5,
        batch_s=30,
        gap=0.0,
        warmup_s=0,
        horizon_s=420,
        rebalance_period_s=10**6,
        park_when_idle=False,
    )
    return ScriptedScenario(net, requests, stations, free_vehicles, config)
