import json

import pytest

from helpers import chain_schedule, line_network, make_request
from vgadispatch.model import (
    ConfigError,
    DataError,
    Infeasibility,
    Plan,
    Request,
    ScenarioConfig,
    VehicleState,
    dropoff,
    evaluate_plan,
    load_requests,
    pickup,
    plan_distance,
    write_requests,
)
from vgadispatch.network import grid_network


def test_request_validation():
    with pytest.raises(DataError):
        Request(1, 0, 3, 3, 0)
    with pytest.raises(DataError):
        Request(1, -5, 0, 3, 10)


def test_direct_drive_has_zero_delay():
    net = line_network(6)
    r = make_request(net, 1, 100, 0, 4)
    v = VehicleState(id=0, position=0, capacity=2)
    plan = evaluate_plan(net, v, (pickup(r), dropoff(r)), now=100, q_max=300)
    assert isinstance(plan, Plan)
    assert plan.delays == {1: 0}
    assert plan.cost_m == 400.0
    assert plan.required_capacity == 1


def test_waiting_time_counts_toward_delay():
    net = line_network(10)
    r = make_request(net, 1, 0, 6, 9)
    v = VehicleState(id=0, position=0, capacity=1)  # 60 s away from the origin
    plan = evaluate_plan(net, v, (pickup(r), dropoff(r)), now=0, q_max=300)
    assert isinstance(plan, Plan)
    assert plan.delays == {1: 60}


def test_vehicle_idles_at_early_pickup():
    net = line_network(5)
    r = make_request(net, 1, 500, 1, 3)
    v = VehicleState(id=0, position=0, capacity=1)
    plan = evaluate_plan(net, v, (pickup(r), dropoff(r)), now=0, q_max=300)
    assert isinstance(plan, Plan)
    assert plan.delays == {1: 0}  # waited at the origin until announcement


def test_interleaved_requests_match_hand_chained_oracle():
    net = line_network(12)
    r1 = make_request(net, 1, 0, 0, 8)
    r2 = make_request(net, 2, 0, 2, 6)
    v = VehicleState(id=0, position=0, capacity=2)
    stops = (pickup(r1), pickup(r2), dropoff(r2), dropoff(r1))
    plan = evaluate_plan(net, v, stops, now=0, q_max=10000)
    cost, delays, max_occ = chain_schedule(net, 0, 0, 0, stops)
    assert isinstance(plan, Plan)
    assert plan.cost_m == cost
    assert plan.delays == delays
    assert plan.required_capacity == max_occ == 2


def test_capacity_violation_reported():
    net = line_network(12)
    r1 = make_request(net, 1, 0, 0, 8)
    r2 = make_request(net, 2, 0, 2, 6)
    v = VehicleState(id=0, position=0, capacity=1)
    got = evaluate_plan(net, v, (pickup(r1), pickup(r2), dropoff(r2), dropoff(r1)), 0, 10000)
    assert got == Infeasibility("capacity", 2)


def test_delay_violation_reported():
    net = line_network(12)
    r = make_request(net, 1, 0, 10, 11)
    v = VehicleState(id=0, position=0, capacity=1)
    got = evaluate_plan(net, v, (pickup(r), dropoff(r)), now=0, q_max=60)
    assert got == Infeasibility("delay", 1)


def test_ordering_violations_reported():
    net = line_network(12)
    r = make_request(net, 1, 0, 0, 5)
    onboard = make_request(net, 2, 0, 1, 6)
    v = VehicleState(id=0, position=0, capacity=2, onboard={2: onboard})
    assert evaluate_plan(net, v, (dropoff(r),), 0, 1000) == Infeasibility("ordering", 1)
    # onboard passenger without a drop-off
    assert evaluate_plan(net, v, (pickup(r), dropoff(r)), 0, 1000) == Infeasibility("ordering", 2)
    # double pickup
    got = evaluate_plan(net, v, (pickup(r), pickup(r), dropoff(r), dropoff(onboard)), 0, 1000)
    assert got == Infeasibility("ordering", 1)


def test_evaluate_plan_is_pure():
    net = line_network(8)
    r = make_request(net, 1, 0, 2, 5)
    v = VehicleState(id=0, position=0, capacity=1)
    stops = (pickup(r), dropoff(r))
    first = evaluate_plan(net, v, stops, 0, 600)
    second = evaluate_plan(net, v, stops, 0, 600)
    assert first == second


def test_plan_distance_definition():
    net = line_network(8)
    assert plan_distance(net, 3, ()) == 0.0
    r = make_request(net, 1, 0, 2, 5)
    assert plan_distance(net, 0, (pickup(r), dropoff(r))) == 200.0 + 300.0


def test_ready_time_delays_the_chain():
    net = line_network(8)
    r = make_request(net, 1, 0, 0, 4)
    v = VehicleState(id=0, position=0, capacity=1, ready_s=50)
    plan = evaluate_plan(net, v, (pickup(r), dropoff(r)), now=0, q_max=600)
    assert plan.delays == {1: 50}


def test_scenario_config_validation_and_json(tmp_path):
    cfg = ScenarioConfig(dispatcher="vga", gap=0.0)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ScenarioConfig.from_json(path) == cfg
    with pytest.raises(ConfigError):
        ScenarioConfig(dispatcher="magic")
    with pytest.raises(ConfigError):
        ScenarioConfig(q_max_s=0)
    (tmp_path / "bad.json").write_text('{"nope": 1}')
    with pytest.raises(ConfigError, match="unknown config keys"):
        ScenarioConfig.from_json(tmp_path / "bad.json")


def test_requests_roundtrip_and_validation(tmp_path):
    net = grid_network(3, 3)
    write_requests([(1, 0, 0, 8), (2, 30, 3, 4)], tmp_path / "r.csv")
    reqs = load_requests(tmp_path / "r.csv", net)
    assert [r.id for r in reqs] == [1, 2]
    assert reqs[0].baseline_s == net.duration(0, 8)
    write_requests([(1, 0, 0, 8), (1, 10, 1, 2)], tmp_path / "dup.csv")
    with pytest.raises(DataError, match="duplicate"):
        load_requests(tmp_path / "dup.csv", net)
    with pytest.raises(DataError, match="not found"):
        load_requests(tmp_path / "missing.csv", net)
