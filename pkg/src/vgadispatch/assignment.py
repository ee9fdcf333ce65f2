"""Vehicle-group assignment as a set-partitioning integer program.

Each feasible (vehicle, group) pair becomes a binary column with the cost
of the group's optimal plan.  Active vehicles take exactly one column;
vehicles parked in a station are interchangeable, so one representative
column set per station carries a relaxed row bounded by the station stock.
Every waiting request must be covered by exactly one chosen column.

The solver is a self-contained best-first branch and bound.  Node bounds
come from the LP relaxation (scipy HiGHS); branching picks the most
fractional column.  It terminates when the proven optimality gap reaches
the target, or returns the best incumbent with an honest gap when the
time budget runs out.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .groupgen import FeasibleGroupSet
from .model import Plan, rebind_plan

INTEGRALITY_TOL = 1e-6


class UncoverableRequestError(ValueError):
    """Some waiting request appears in no feasible column (fleet-design violation)."""

    def __init__(self, request_ids: Sequence[int]):
        self.request_ids = sorted(request_ids)
        super().__init__(f"no feasible column covers requests {self.request_ids}")


class InfeasibleProblemError(RuntimeError):
    """No column selection satisfies the partitioning constraints."""


# -- generic binary program --------------------------------------------------


@dataclass
class BinaryProgram:
    """min c.x over binary x with all-ones rows: ==, <= and >= senses."""

    costs: list[float]
    eq_rows: list[tuple[list[int], float]] = field(default_factory=list)
    le_rows: list[tuple[list[int], float]] = field(default_factory=list)
    ge_rows: list[tuple[list[int], float]] = field(default_factory=list)


@dataclass
class BinarySolution:
    x: tuple[int, ...]
    objective: float
    bound: float
    gap: float
    nodes: int
    wall_ms: float
    gap_reached: bool  # terminated by proving the target gap (or optimality)


class _Relaxation:
    """LP relaxation of a BinaryProgram; matrices built once, bounds vary."""

    def __init__(self, program: BinaryProgram):
        n = len(program.costs)
        self.costs = np.asarray(program.costs, dtype=float)
        self.a_eq = self.b_eq = self.a_ub = self.b_ub = None
        if program.eq_rows:
            rows, cols = [], []
            for i, (idxs, _) in enumerate(program.eq_rows):
                rows.extend([i] * len(idxs))
                cols.extend(idxs)
            self.a_eq = sparse.csr_matrix(
                (np.ones(len(rows)), (rows, cols)), shape=(len(program.eq_rows), n))
            self.b_eq = np.array([rhs for _, rhs in program.eq_rows])
        ub_rows = [(idxs, rhs, 1.0) for idxs, rhs in program.le_rows]
        ub_rows += [(idxs, -rhs, -1.0) for idxs, rhs in program.ge_rows]
        if ub_rows:
            rows, cols, vals = [], [], []
            for i, (idxs, _, sign) in enumerate(ub_rows):
                rows.extend([i] * len(idxs))
                cols.extend(idxs)
                vals.extend([sign] * len(idxs))
            self.a_ub = sparse.csr_matrix(
                (np.array(vals), (rows, cols)), shape=(len(ub_rows), n))
            self.b_ub = np.array([rhs for _, rhs, _ in ub_rows])

    def solve(self, lo: np.ndarray, hi: np.ndarray):
        res = linprog(
            self.costs,
            A_ub=self.a_ub, b_ub=self.b_ub, A_eq=self.a_eq, b_eq=self.b_eq,
            bounds=np.column_stack((lo, hi)),
            method="highs",
        )
        if res.status != 0:
            return None
        return res.fun, res.x


def solve_binary_program(
    program: BinaryProgram,
    gap: float = 0.0,
    budget_ms: float | None = None,
) -> BinarySolution:
    """Branch and bound to a certified gap; honest bound on budget exhaustion."""
    start = time.perf_counter()
    n = len(program.costs)
    if n == 0:
        return BinarySolution((), 0.0, 0.0, 0.0, 0, 0.0, True)

    relaxation = _Relaxation(program)
    root = relaxation.solve(np.zeros(n), np.ones(n))
    if root is None:
        raise InfeasibleProblemError("root relaxation is infeasible")

    counter = 0
    heap: list[tuple[float, int, np.ndarray, np.ndarray, np.ndarray]] = []
    lo0 = np.zeros(n)
    hi0 = np.ones(n)
    heapq.heappush(heap, (root[0], counter, lo0, hi0, root[1]))

    incumbent: tuple[int, ...] | None = None
    incumbent_obj = math.inf
    nodes = 0

    def elapsed_ms() -> float:
        return (time.perf_counter() - start) * 1000.0

    def out_of_time() -> bool:
        return budget_ms is not None and elapsed_ms() >= budget_ms

    gap_reached = False
    while heap:
        bound_open = heap[0][0]
        if incumbent is not None:
            eps = 1e-9 * max(1.0, abs(incumbent_obj))
            if bound_open >= incumbent_obj - eps:
                gap_reached = True
                break
            if incumbent_obj > 0 and (incumbent_obj - bound_open) / incumbent_obj <= gap:
                gap_reached = True
                break
            if out_of_time():
                break
        node_bound, _, lo, hi, x = heapq.heappop(heap)
        nodes += 1
        frac = np.abs(x - np.round(x))
        if frac.max(initial=0.0) <= INTEGRALITY_TOL:
            xi = tuple(int(round(v)) for v in x)
            obj = float(np.dot(program.costs, xi))
            if obj < incumbent_obj:
                incumbent_obj = obj
                incumbent = xi
            continue
        j = int(np.argmax(np.minimum(frac, 1.0 - frac)))  # most fractional, lowest index on ties
        for value in (1.0, 0.0):
            lo2, hi2 = lo.copy(), hi.copy()
            lo2[j] = hi2[j] = value
            relaxed = relaxation.solve(lo2, hi2)
            if relaxed is None:
                continue
            if incumbent is not None and relaxed[0] >= incumbent_obj - 1e-9 * max(1.0, abs(incumbent_obj)):
                continue
            counter += 1
            heapq.heappush(heap, (relaxed[0], counter, lo2, hi2, relaxed[1]))

    if incumbent is None:
        raise InfeasibleProblemError("no integral solution found")
    bound = min(incumbent_obj, heap[0][0]) if heap else incumbent_obj
    if not heap:
        gap_reached = True
    proven_gap = 0.0 if incumbent_obj == 0 else max(0.0, (incumbent_obj - bound) / incumbent_obj)
    if proven_gap <= gap:
        gap_reached = True
    return BinarySolution(
        x=incumbent,
        objective=incumbent_obj,
        bound=bound,
        gap=proven_gap,
        nodes=nodes,
        wall_ms=elapsed_ms(),
        gap_reached=gap_reached,
    )


# -- the vehicle-group assignment layer --------------------------------------


@dataclass(frozen=True)
class Column:
    """One candidate assignment: a group (with its optimal plan) for an owner."""

    owner_station: int | None  # None for an active vehicle column
    vehicle_id: int
    group_key: tuple[int, ...]
    cost_m: float
    covered: tuple[int, ...]  # waiting request ids this column serves
    plan: Plan


@dataclass
class AssignmentProblem:
    columns: list[Column]
    vehicle_rows: dict[int, list[int]]  # active vehicle id -> column indexes
    station_rows: dict[int, tuple[list[int], int]]  # station id -> (columns, stock)
    coverage_rows: dict[int, list[int]]  # waiting request id -> column indexes
    target_gap: float


@dataclass
class AssignmentSolution:
    chosen: list[Column]
    objective_m: float
    bound_m: float
    gap: float
    nodes: int
    wall_ms: float
    gap_reached: bool


def build_problem(
    groupsets: Sequence[FeasibleGroupSet],
    station_stocks: Mapping[int, int],
    waiting_ids: Sequence[int],
    target_gap: float = 0.0,
) -> AssignmentProblem:
    """Assemble the partitioning instance from per-vehicle group sets.

    Group sets flagged with a station id turn into stock-bounded station
    rows; all others get an exactly-one row.  Raises when some waiting
    request is covered by no column at all.
    """
    waiting = sorted(set(waiting_ids))
    waiting_set = set(waiting)
    columns: list[Column] = []
    vehicle_rows: dict[int, list[int]] = {}
    station_rows: dict[int, tuple[list[int], int]] = {}

    vehicles = sorted((g for g in groupsets if g.station_id is None), key=lambda g: g.vehicle_id)
    stations = sorted((g for g in groupsets if g.station_id is not None), key=lambda g: g.station_id)

    for gs in vehicles:
        idxs: list[int] = []
        for key in sorted(gs.groups):
            plan = gs.groups[key]
            covered = tuple(r for r in key if r in waiting_set)
            idxs.append(len(columns))
            columns.append(Column(None, gs.vehicle_id, key, plan.cost_m, covered, plan))
        vehicle_rows[gs.vehicle_id] = idxs

    for gs in stations:
        sid = gs.station_id
        assert sid is not None
        stock = int(station_stocks.get(sid, 0))
        if stock <= 0:
            continue
        idxs = []
        for key in sorted(gs.groups):
            if not key:
                continue  # the stock row's slack already means "dispatch nobody"
            plan = gs.groups[key]
            covered = tuple(r for r in key if r in waiting_set)
            if not covered:
                continue
            idxs.append(len(columns))
            columns.append(Column(sid, gs.vehicle_id, key, plan.cost_m, covered, plan))
        station_rows[sid] = (idxs, stock)

    coverage_rows: dict[int, list[int]] = {r: [] for r in waiting}
    for i, col in enumerate(columns):
        for r in col.covered:
            coverage_rows[r].append(i)
    uncovered = [r for r, cols in coverage_rows.items() if not cols]
    if uncovered:
        raise UncoverableRequestError(uncovered)

    return AssignmentProblem(columns, vehicle_rows, station_rows, coverage_rows, target_gap)


def solve(
    problem: AssignmentProblem,
    gap: float | None = None,
    budget_ms: float | None = None,
) -> AssignmentSolution:
    """Pick one group per vehicle covering each waiting request exactly once."""
    target = problem.target_gap if gap is None else gap
    program = BinaryProgram(costs=[c.cost_m for c in problem.columns])
    for vid in sorted(problem.vehicle_rows):
        program.eq_rows.append((problem.vehicle_rows[vid], 1.0))
    for rid in sorted(problem.coverage_rows):
        program.eq_rows.append((problem.coverage_rows[rid], 1.0))
    for sid in sorted(problem.station_rows):
        cols, stock = problem.station_rows[sid]
        if cols:
            program.le_rows.append((cols, float(stock)))
    result = solve_binary_program(program, gap=target, budget_ms=budget_ms)
    chosen = [problem.columns[i] for i, v in enumerate(result.x) if v]
    return AssignmentSolution(
        chosen=chosen,
        objective_m=result.objective,
        bound_m=result.bound,
        gap=result.gap,
        nodes=result.nodes,
        wall_ms=result.wall_ms,
        gap_reached=result.gap_reached,
    )


def extract_plans(
    solution: AssignmentSolution,
    station_parked: Mapping[int, Sequence[int]] | None = None,
) -> tuple[dict[int, Plan], list[tuple[int, int, Plan]]]:
    """Turn chosen columns into vehicle plans and station dispatch orders.

    Station columns consume parked vehicles in ascending id order; the plan
    transfers unchanged because any parked vehicle stands at the station node.
    """
    station_parked = station_parked or {}
    vehicle_plans: dict[int, Plan] = {}
    spawns: list[tuple[int, int, Plan]] = []
    pools = {sid: sorted(ids) for sid, ids in station_parked.items()}
    for col in sorted(
        (c for c in solution.chosen if c.owner_station is not None),
        key=lambda c: (c.owner_station, c.group_key),
    ):
        sid = col.owner_station
        pool = pools.get(sid)
        if not pool:
            raise InfeasibleProblemError(f"station {sid} chosen more times than it has vehicles")
        vid = pool.pop(0)
        spawns.append((sid, vid, rebind_plan(col.plan, vid)))
    for col in solution.chosen:
        if col.owner_station is None:
            vehicle_plans[col.vehicle_id] = col.plan
    return vehicle_plans, spawns


def write_lp(problem: AssignmentProblem, path: str | Path) -> None:
    """Dump the instance in CPLEX LP text format for external cross-checking."""
    lines = ["Minimize", " obj: " + " + ".join(
        f"{c.cost_m:.6f} x{i}" for i, c in enumerate(problem.columns))]
    lines.append("Subject To")
    row = 0
    for vid in sorted(problem.vehicle_rows):
        cols = problem.vehicle_rows[vid]
        lines.append(f" v{row}: " + " + ".join(f"x{i}" for i in cols) + " = 1")
        row += 1
    for rid in sorted(problem.coverage_rows):
        cols = problem.coverage_rows[rid]
        lines.append(f" r{row}: " + " + ".join(f"x{i}" for i in cols) + " = 1")
        row += 1
    for sid in sorted(problem.station_rows):
        cols, stock = problem.station_rows[sid]
        if cols:
            lines.append(f" s{row}: " + " + ".join(f"x{i}" for i in cols) + f" <= {stock}")
            row += 1
    lines.append("Binary")
    lines.append(" " + " ".join(f"x{i}" for i in range(len(problem.columns))))
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
