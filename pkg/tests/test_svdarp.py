import itertools
import random

import pytest

from helpers import make_request, oracle_group_plan, random_instance
from vgadispatch.model import Plan, VehicleState
from vgadispatch.network import grid_network
from vgadispatch.svdarp import (
    IH_FALLBACK,
    SearchCeilingExceeded,
    feasible_and_optimal,
)


def test_empty_group_for_empty_vehicle():
    net = grid_network(3, 3)
    v = VehicleState(id=0, position=4, capacity=2)
    got = feasible_and_optimal(net, v, [], now=0, q_max=100)
    assert got.feasible and got.plan.cost_m == 0.0 and got.plan.stops == ()


def test_single_request_within_reach():
    net = grid_network(3, 3)
    v = VehicleState(id=0, position=0, capacity=2)
    r = make_request(net, 1, 0, 1, 7)
    got = feasible_and_optimal(net, v, [r], now=0, q_max=600)
    assert got.feasible
    assert [(s.request.id, s.kind) for s in got.plan.stops] == [(1, "pickup"), (1, "dropoff")]
    assert got.plan.cost_m == net.distance(0, 1) + net.distance(1, 7)


def test_out_of_reach_request_is_infeasible():
    net = grid_network(5, 5)
    v = VehicleState(id=0, position=0, capacity=2)
    r = make_request(net, 1, 0, 24, 20)
    got = feasible_and_optimal(net, v, [r], now=0, q_max=10)
    assert not got.feasible and got.plan is None


def test_matches_unpruned_oracle_on_random_instances():
    for seed in range(40):
        net, vehicles, waiting = random_instance(
            seed, n_vehicles=1, n_requests=3, capacity=2, q_max=900, with_onboard=True)
        v = vehicles[0]
        group = list(v.onboard.values()) + waiting
        got = feasible_and_optimal(net, v, group, now=0, q_max=900)
        oracle = oracle_group_plan(net, v, group, now=0, q_max=900)
        if oracle is None:
            assert not got.feasible, seed
        else:
            assert got.feasible, seed
            assert got.plan.cost_m == oracle[0], seed


def test_pruned_matches_oracle_under_tight_deadlines():
    # tight q_max exercises the look-ahead pruning on both outcomes
    feasible_count = 0
    for seed in range(60):
        net, vehicles, waiting = random_instance(
            100 + seed, n_vehicles=1, n_requests=3, capacity=3, q_max=90)
        v = vehicles[0]
        got = feasible_and_optimal(net, v, waiting, now=0, q_max=90)
        oracle = oracle_group_plan(net, v, waiting, now=0, q_max=90)
        assert got.feasible == (oracle is not None), seed
        if oracle is not None:
            feasible_count += 1
            assert got.plan.cost_m == oracle[0], seed
    assert feasible_count > 0  # the tight bound must not make the test vacuous


def test_tie_break_is_lexicographic_by_request_id():
    net = grid_network(3, 3)
    v = VehicleState(id=0, position=4, capacity=2)
    # two identical trips: either serving order costs the same
    r1 = make_request(net, 1, 0, 3, 5)
    r2 = make_request(net, 2, 0, 3, 5)
    got = feasible_and_optimal(net, v, [r1, r2], now=0, q_max=600)
    ids = [(s.request.id, s.kind) for s in got.plan.stops]
    assert ids[0] == (1, "pickup")


def test_infeasible_group_supersets_stay_infeasible():
    for seed in range(30):
        rng = random.Random(seed)
        net, vehicles, waiting = random_instance(
            300 + seed, n_vehicles=1, n_requests=4, capacity=2, q_max=70)
        v = vehicles[0]
        subsets = list(itertools.combinations(waiting, 2))
        for base in subsets:
            base_res = feasible_and_optimal(net, v, list(base), 0, 70)
            if base_res.feasible:
                continue
            rest = [r for r in waiting if r not in base]
            for extra in range(1, len(rest) + 1):
                bigger = list(base) + rng.sample(rest, extra)
                assert not feasible_and_optimal(net, v, bigger, 0, 70).feasible


def test_search_ceiling_reported_distinctly():
    net = grid_network(4, 4)
    v = VehicleState(id=0, position=0, capacity=5)
    group = [make_request(net, i, 0, i, i + 4) for i in range(1, 6)]
    with pytest.raises(SearchCeilingExceeded):
        feasible_and_optimal(net, v, group, now=0, q_max=600, search_ceiling=4)


def test_group_must_contain_onboard_requests():
    net = grid_network(3, 3)
    onboard = make_request(net, 9, 0, 0, 8)
    v = VehicleState(id=0, position=0, capacity=2, onboard={9: onboard})
    other = make_request(net, 1, 0, 1, 5)
    with pytest.raises(ValueError):
        feasible_and_optimal(net, v, [other], now=0, q_max=600)


def test_ih_fallback_cost_never_beats_exact():
    for seed in range(25):
        net, vehicles, waiting = random_instance(
            500 + seed, n_vehicles=1, n_requests=4, capacity=4, q_max=400)
        v = vehicles[0]
        exact = feasible_and_optimal(net, v, waiting, 0, 400)
        approx = feasible_and_optimal(net, v, waiting, 0, 400, mode=IH_FALLBACK, ih_threshold=2)
        if approx.feasible:
            assert exact.feasible
            assert exact.plan.cost_m <= approx.plan.cost_m


def test_fallback_plan_is_a_valid_plan():
    net, vehicles, waiting = random_instance(77, n_vehicles=1, n_requests=5, capacity=3, q_max=500)
    v = vehicles[0]
    got = feasible_and_optimal(net, v, waiting, 0, 500, mode=IH_FALLBACK, ih_threshold=3)
    if got.feasible:
        assert isinstance(got.plan, Plan)
        assert max(got.plan.delays.values()) <= 500
        assert got.plan.required_capacity <= v.capacity
