import math

import pytest

from helpers import (
    make_request,
    oracle_assignment_optimum,
    oracle_feasible_groups,
    random_instance,
)
from vgadispatch import assignment
from vgadispatch.assignment import (
    BinaryProgram,
    InfeasibleProblemError,
    UncoverableRequestError,
    build_problem,
    extract_plans,
    solve,
    solve_binary_program,
    write_lp,
)
from vgadispatch.groupgen import generate_groups
from vgadispatch.model import VehicleState, station_representative
from vgadispatch.network import grid_network


def _groupsets(net, vehicles, waiting, q_max, station_reps=()):
    out = [generate_groups(net, v, waiting, now=0, q_max=q_max) for v in vehicles]
    for rep in station_reps:
        out.append(generate_groups(net, rep, waiting, now=0, q_max=q_max))
    return out


def test_single_vehicle_single_request_problem_shape():
    net = grid_network(3, 3)
    v = VehicleState(id=0, position=0, capacity=2)
    r = make_request(net, 1, 0, 1, 7)
    problem = build_problem(_groupsets(net, [v], [r], 600), {}, [1])
    assert len(problem.vehicle_rows) == 1
    assert len(problem.coverage_rows) == 1
    assert len(problem.columns) == 2  # the idle group and {r}
    solution = solve(problem, gap=0.0)
    assert solution.gap == 0.0
    chosen_keys = {c.group_key for c in solution.chosen}
    assert chosen_keys == {(1,)}


def test_matches_exhaustive_assignment_oracle():
    for seed in range(25):
        net, vehicles, waiting = random_instance(
            seed, rows=6, cols=6, n_vehicles=3, n_requests=5, capacity=3, q_max=140,
            with_onboard=True)
        groupsets = _groupsets(net, vehicles, waiting, 140)
        waiting_ids = [r.id for r in waiting]
        covered = set()
        for gs in groupsets:
            for key in gs.groups:
                covered.update(key)
        coverable = [rid for rid in waiting_ids if rid in covered]
        if len(coverable) < len(waiting_ids):
            continue  # oracle fleets cannot cover this draw; build_problem would raise
        problem = build_problem(groupsets, {}, coverable)
        solution = solve(problem, gap=0.0)
        oracle_inputs = [("vehicle", 1, {k: p.cost_m for k, p in gs.groups.items()})
                         for gs in groupsets]
        oracle = oracle_assignment_optimum(oracle_inputs, coverable)
        assert oracle is not None, seed
        assert solution.objective_m == oracle, seed
        assert solution.bound_m <= oracle + 1e-9, seed


def test_station_row_bounded_by_stock():
    net = grid_network(4, 4)
    reqs = [make_request(net, i, 0, i, i + 8) for i in (1, 2, 3)]
    rep = station_representative(0, 5, capacity=2, now=0)
    gs = generate_groups(net, rep, reqs, now=0, q_max=600)
    gs.station_id = 0
    problem = build_problem([gs], {0: 3}, [r.id for r in reqs])
    cols, stock = problem.station_rows[0]
    assert stock == 3
    solution = solve(problem, gap=0.0)
    spawned = [c for c in solution.chosen if c.owner_station == 0]
    assert 1 <= len(spawned) <= 3
    covered = sorted(rid for c in spawned for rid in c.covered)
    assert covered == [1, 2, 3]


def test_station_columns_spawn_distinct_lowest_parked_vehicles():
    net = grid_network(4, 4)
    # two far-apart requests with a tight deadline: one vehicle cannot serve both
    r1 = make_request(net, 1, 0, 1, 2)
    r2 = make_request(net, 2, 0, 13, 14)
    rep = station_representative(0, 5, capacity=2, now=0)
    gs = generate_groups(net, rep, [r1, r2], now=0, q_max=40)
    gs.station_id = 0
    assert (1, 2) not in gs.groups
    problem = build_problem([gs], {0: 3}, [1, 2])
    solution = solve(problem, gap=0.0)
    plans, spawns = extract_plans(solution, {0: [11, 12, 13]})
    assert plans == {}
    assert [(sid, vid) for sid, vid, _ in spawns] == [(0, 11), (0, 12)]
    assert {p.vehicle_id for _, _, p in spawns} == {11, 12}


def test_uncoverable_request_raises():
    net = grid_network(3, 3)
    v = VehicleState(id=0, position=0, capacity=1)
    r = make_request(net, 5, 0, 8, 0)
    gs = generate_groups(net, v, [r], now=0, q_max=1)  # unreachable in time
    with pytest.raises(UncoverableRequestError) as err:
        build_problem([gs], {}, [5])
    assert err.value.request_ids == [5]


def test_every_request_covered_exactly_once_and_one_group_per_vehicle():
    for seed in range(10):
        net, vehicles, waiting = random_instance(
            60 + seed, rows=6, cols=6, n_vehicles=3, n_requests=6, capacity=3, q_max=150)
        groupsets = _groupsets(net, vehicles, waiting, 150)
        covered = {rid for gs in groupsets for key in gs.groups for rid in key}
        coverable = [r.id for r in waiting if r.id in covered]
        problem = build_problem(groupsets, {}, coverable)
        solution = solve(problem, gap=0.0)
        per_vehicle = {}
        seen = []
        for col in solution.chosen:
            per_vehicle[col.vehicle_id] = per_vehicle.get(col.vehicle_id, 0) + 1
            seen.extend(col.covered)
        assert sorted(seen) == sorted(coverable)
        assert per_vehicle == {v.id: 1 for v in vehicles}


def test_symmetry_relaxation_equals_expanded_formulation():
    # a station with s identical vehicles must give the same optimum as s
    # separate vehicles standing at the station node
    for seed in range(8):
        net, _, waiting = random_instance(
            80 + seed, rows=5, cols=5, n_vehicles=0, n_requests=4, capacity=2, q_max=130)
        rep = station_representative(0, 12, capacity=2, now=0)
        gs = generate_groups(net, rep, waiting, now=0, q_max=130)
        gs.station_id = 0
        covered = {rid for key in gs.groups for rid in key}
        coverable = [r.id for r in waiting if r.id in covered]
        if not coverable:
            continue
        relaxed = solve(build_problem([gs], {0: 3}, coverable), gap=0.0)
        expanded_sets = []
        for vid in (101, 102, 103):
            v = VehicleState(id=vid, position=12, capacity=2)
            expanded_sets.append(generate_groups(net, v, waiting, now=0, q_max=130))
        expanded = solve(build_problem(expanded_sets, {}, coverable), gap=0.0)
        assert relaxed.objective_m == expanded.objective_m, seed


def test_reported_bound_is_a_true_lower_bound_under_budget():
    for seed in range(10):
        net, vehicles, waiting = random_instance(
            200 + seed, rows=6, cols=6, n_vehicles=3, n_requests=5, capacity=3, q_max=140)
        groupsets = _groupsets(net, vehicles, waiting, 140)
        covered = {rid for gs in groupsets for key in gs.groups for rid in key}
        coverable = [r.id for r in waiting if r.id in covered]
        problem = build_problem(groupsets, {}, coverable)
        exact = solve(problem, gap=0.0)
        squeezed = solve(problem, gap=0.0, budget_ms=0.01)
        assert squeezed.objective_m >= exact.objective_m - 1e-9
        assert squeezed.bound_m <= exact.objective_m + 1e-9
        expected_gap = 0.0 if squeezed.objective_m == 0 else (
            (squeezed.objective_m - squeezed.bound_m) / squeezed.objective_m)
        assert squeezed.gap == pytest.approx(expected_gap, abs=1e-12)


def test_solver_handles_infeasible_partition():
    program = BinaryProgram(costs=[1.0, 1.0])
    program.eq_rows.append(([0], 1.0))
    program.eq_rows.append(([0], 0.0))
    with pytest.raises(InfeasibleProblemError):
        solve_binary_program(program)


def test_lp_dump_is_parseable_text(tmp_path):
    net = grid_network(3, 3)
    v = VehicleState(id=0, position=0, capacity=2)
    r = make_request(net, 1, 0, 1, 7)
    problem = build_problem(_groupsets(net, [v], [r], 600), {}, [1])
    path = tmp_path / "problem.lp"
    write_lp(problem, path)
    text = path.read_text()
    assert text.startswith("Minimize")
    assert "Binary" in text and text.rstrip().endswith("End")
