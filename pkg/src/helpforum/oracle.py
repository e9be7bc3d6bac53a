"""Centralized baseline: greedy insertion and iterated local search (ILS).

A route serves its tasks one after another: walk to the pick cell, work
there ``dwell`` steps, walk to the place cell, work ``dwell`` steps.  The
schedule cost is the sum of route costs (sum of makespans).  When a help
task is present its completion time, which is how long the requester waits,
is added as well.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .tasks import PnpTask, Schedule
from .world import Cell, GridWorld, Robot, Unreachable

OVERRUN_PENALTY = 100.0


@dataclass(frozen=True)
class IlsParams:
    max_iterations: int = 500
    k: int = 2
    temperature: float = 2.0
    relocate: bool = True
    swap: bool = True
    transpose: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")


class CostModel:
    """Route and schedule costs over one world, robot roster and task pool."""

    def __init__(
        self,
        world: GridWorld,
        robots: Sequence[Robot],
        tasks: Mapping[str, PnpTask],
        help_id: Optional[str] = None,
        max_route_cost: Optional[int] = None,
    ):
        self.world = world
        self.starts = {r.id: tuple(r.start) for r in robots}
        self.tasks = dict(tasks)
        self.help_id = help_id
        self.cap = max_route_cost
        self._dist: Dict[Cell, Dict[Cell, int]] = {}

    def dist(self, a: Cell, b: Cell) -> int:
        d = self._dist.get(a)
        if d is None:
            d = self._dist[a] = self.world.distances_from(a)
        v = d.get(b)
        if v is None:
            raise Unreachable(f"{b} unreachable from {a}")
        return v

    def route_times(self, robot: int, ids: Sequence[str]) -> Tuple[int, Optional[int]]:
        """(route cost, completion time of the help task if on this route)."""
        cur = self.starts[robot]
        t = 0
        done_help = None
        for tid in ids:
            task = self.tasks[tid]
            t += self.dist(cur, task.pick) + task.dwell
            t += self.dist(task.pick, task.place) + task.dwell
            cur = task.place
            if tid == self.help_id:
                done_help = t
        return t, done_help

    def route_value(self, robot: int, ids: Sequence[str]) -> float:
        """Contribution of one route to the objective (penalized past the cap)."""
        t, h = self.route_times(robot, ids)
        v = float(t + (h or 0))
        if self.cap is not None and t > self.cap:
            v += OVERRUN_PENALTY * (t - self.cap)
        return v

    def J(self, routes: Mapping[int, Sequence[str]]) -> float:
        return sum(self.route_value(r, ids) for r, ids in routes.items())

    def raw_J(self, routes: Mapping[int, Sequence[str]]) -> int:
        """Sum of route costs plus help wait, without penalties."""
        total = 0
        for r, ids in routes.items():
            t, h = self.route_times(r, ids)
            total += t + (h or 0)
        return total


def route_cost(world: GridWorld, start: Cell, tasks: Sequence[PnpTask]) -> int:
    """Time for one robot to serve ``tasks`` in order from ``start``."""
    model = CostModel(world, [Robot(0, start)], {t.id: t for t in tasks})
    return model.route_times(0, [t.id for t in tasks])[0]


def schedule_cost(world: GridWorld, robots: Sequence[Robot], schedule: Schedule, help_id: Optional[str] = None) -> int:
    return CostModel(world, robots, schedule.tasks, help_id).raw_J(schedule.routes)


# ---------------------------------------------------------------------------
# construction


def _best_insertion(model: CostModel, routes: Dict[int, List[str]], tid: str, allowed: Iterable[int]):
    best = None
    for r in allowed:
        base = model.route_value(r, routes[r])
        ids = routes[r]
        for pos in range(len(ids) + 1):
            cand = ids[:pos] + [tid] + ids[pos:]
            try:
                delta = model.route_value(r, cand) - base
            except Unreachable:
                continue
            if best is None or delta < best[0]:
                best = (delta, r, pos)
    return best


def _insert_all(model, routes, ids, pins, rng_order):
    for tid in rng_order(ids):
        allowed = [pins[tid]] if tid in pins else sorted(routes)
        best = _best_insertion(model, routes, tid, allowed)
        if best is None:
            raise Unreachable(f"task {tid} cannot be served by any robot")
        _, r, pos = best
        routes[r].insert(pos, tid)


def greedy_insertion(
    world: GridWorld,
    robots: Sequence[Robot],
    tasks: Sequence[PnpTask],
    seed: int = 0,
    help_id: Optional[str] = None,
    pins: Optional[Mapping[str, int]] = None,
    max_route_cost: Optional[int] = None,
) -> Schedule:
    """Insert tasks one at a time (seeded order) where the cost grows least."""
    if not tasks:
        raise ValueError("no tasks to schedule")
    rng = random.Random(seed)
    pool = {t.id: t for t in tasks}
    model = CostModel(world, robots, pool, help_id, max_route_cost)
    routes: Dict[int, List[str]] = {r.id: [] for r in robots}

    def order(ids):
        ids = list(ids)
        rng.shuffle(ids)
        return ids

    _insert_all(model, routes, list(pool), dict(pins or {}), order)
    return Schedule(pool, routes)


# ---------------------------------------------------------------------------
# local search


def _moves(routes: Dict[int, List[str]], pins: Mapping[str, int], params: IlsParams):
    """Candidate schedules as (changed robot ids, new routes for them)."""
    robots = sorted(routes)
    if params.relocate:
        for r in robots:
            for i, tid in enumerate(routes[r]):
                rest = routes[r][:i] + routes[r][i + 1 :]
                targets = [pins[tid]] if tid in pins else robots
                for r2 in targets:
                    base = rest if r2 == r else routes[r2]
                    for pos in range(len(base) + 1):
                        if r2 == r and pos == i:
                            continue
                        new = base[:pos] + [tid] + base[pos:]
                        yield ({r: rest, r2: new} if r2 != r else {r: new})
    if params.swap:
        for a, b in itertools.combinations(robots, 2):
            for i, ta in enumerate(routes[a]):
                if ta in pins:
                    continue
                for j, tb in enumerate(routes[b]):
                    if tb in pins:
                        continue
                    na = list(routes[a])
                    nb = list(routes[b])
                    na[i], nb[j] = tb, ta
                    yield {a: na, b: nb}
    if params.transpose:
        for r in robots:
            ids = routes[r]
            for i in range(len(ids) - 1):
                new = list(ids)
                new[i], new[i + 1] = new[i + 1], new[i]
                yield {r: new}


def local_search(model: CostModel, routes: Dict[int, List[str]], pins: Mapping[str, int], params: IlsParams) -> Dict[int, List[str]]:
    """Best-improvement descent until no move lowers the cost."""
    routes = {r: list(ids) for r, ids in routes.items()}
    values = {r: model.route_value(r, ids) for r, ids in routes.items()}
    while True:
        best_delta, best_move = -1e-9, None
        for move in _moves(routes, pins, params):
            try:
                delta = sum(model.route_value(r, ids) - values[r] for r, ids in move.items())
            except Unreachable:
                continue
            if delta < best_delta:
                best_delta, best_move = delta, move
        if best_move is None:
            return routes
        for r, ids in best_move.items():
            routes[r] = list(ids)
            values[r] = model.route_value(r, ids)


def perturb(model: CostModel, routes: Dict[int, List[str]], pins: Mapping[str, int], k: int, rng: random.Random):
    """Remove ``k`` random tasks and greedily reinsert them."""
    routes = {r: list(ids) for r, ids in routes.items()}
    all_ids = [t for r in sorted(routes) for t in routes[r]]
    removed = rng.sample(all_ids, min(k, len(all_ids)))
    for r in routes:
        routes[r] = [t for t in routes[r] if t not in removed]

    def order(ids):
        ids = list(ids)
        rng.shuffle(ids)
        return ids

    _insert_all(model, routes, removed, pins, order)
    return routes


@dataclass
class IlsResult:
    schedule: Schedule
    cost: float
    initial_cost: float
    trace: List[Tuple[int, float, bool]] = field(default_factory=list)

    def trace_csv(self) -> str:
        rows = ["iteration,J,accepted"]
        rows += [f"{i},{j:g},{int(a)}" for i, j, a in self.trace]
        return "\n".join(rows) + "\n"


def ils(
    world: GridWorld,
    robots: Sequence[Robot],
    initial: Schedule,
    params: IlsParams = IlsParams(),
    help_id: Optional[str] = None,
    pins: Optional[Mapping[str, int]] = None,
    max_route_cost: Optional[int] = None,
) -> IlsResult:
    """Iterated local search from ``initial``; returns the best schedule seen."""
    pins = dict(pins or {})
    rng = random.Random(params.seed)
    model = CostModel(world, robots, initial.tasks, help_id, max_route_cost)
    routes = {r.id: list(initial.routes.get(r.id, [])) for r in robots}
    j0 = model.J(routes)
    cur = local_search(model, routes, pins, params)
    j_cur = model.J(cur)
    best, j_best = cur, j_cur
    if j0 < j_best:  # cannot happen with descent, kept for safety
        best, j_best = routes, j0
    trace = []
    for it in range(params.max_iterations):
        cand = perturb(model, cur, pins, params.k, rng)
        cand = local_search(model, cand, pins, params)
        j_cand = model.J(cand)
        accept = j_cand < j_cur or rng.random() < math.exp(-(j_cand - j_cur) / params.temperature)
        if accept:
            cur, j_cur = cand, j_cand
            if j_cur < j_best:
                best, j_best = cur, j_cur
        trace.append((it, j_cand, accept))
    return IlsResult(Schedule(initial.tasks, best), j_best, j0, trace)


# ---------------------------------------------------------------------------
# help insertion (baselines)


def nearest_robot(world: GridWorld, robots: Sequence[Robot], site: Cell) -> Robot:
    best = None
    for r in robots:
        d = world.distances_from(r.start).get(site)
        if d is not None and (best is None or (d, r.id) < best[0]):
            best = ((d, r.id), r)
    if best is None:
        raise Unreachable(f"no robot reaches {site}")
    return best[1]


def insert_help(
    world: GridWorld,
    robots: Sequence[Robot],
    schedule: Schedule,
    help_task: PnpTask,
    mode: str = "full",
    params: IlsParams = IlsParams(),
    max_route_cost: Optional[int] = None,
) -> IlsResult:
    """Re-plan the fleet with an extra help task.

    ``mode="full"`` lets ILS place the help task anywhere; ``mode="nearest"``
    pins it to the robot closest to the help site and re-optimizes the rest.
    """
    if mode not in ("full", "nearest"):
        raise ValueError(f"unknown mode {mode!r}")
    tasks = dict(schedule.tasks)
    tasks[help_task.id] = help_task
    pins = {}
    if mode == "nearest":
        pins[help_task.id] = nearest_robot(world, robots, help_task.pick).id
    model = CostModel(world, robots, tasks, help_task.id, max_route_cost)
    routes = {r.id: list(schedule.routes.get(r.id, [])) for r in robots}
    best = _best_insertion(model, routes, help_task.id, [pins[help_task.id]] if pins else sorted(routes))
    if best is None:
        raise Unreachable("help task cannot be served")
    routes[best[1]].insert(best[2], help_task.id)
    return ils(world, robots, Schedule(tasks, routes), params, help_task.id, pins, max_route_cost)


def added_cost(world: GridWorld, robots: Sequence[Robot], before: Schedule, after: Schedule, help_id: str) -> int:
    """Added makespan of a re-plan: J(after) minus the best help-free baseline.

    The baseline is the cheaper of the original schedule and the re-plan with
    the help task removed, so re-optimizing unrelated routes is not credited
    to the help task.
    """
    model = CostModel(world, robots, after.tasks, help_id)
    j_after = model.raw_J(after.routes)
    stripped = {r: [t for t in ids if t != help_id] for r, ids in after.routes.items()}
    base = min(model.raw_J(before.routes), model.raw_J(stripped))
    return j_after - base


# ---------------------------------------------------------------------------
# exhaustive reference (small instances only)


def exhaustive_optimum(world: GridWorld, robots: Sequence[Robot], tasks: Sequence[PnpTask], help_id: Optional[str] = None, max_route_cost: Optional[int] = None) -> Tuple[float, Dict[int, List[str]]]:
    """Minimum J over every assignment and service order."""
    model = CostModel(world, robots, {t.id: t for t in tasks}, help_id, max_route_cost)
    ids = [r.id for r in robots]
    best = None
    for assign in itertools.product(ids, repeat=len(tasks)):
        groups: Dict[int, List[str]] = {r: [] for r in ids}
        for t, r in zip(tasks, assign):
            groups[r].append(t.id)
        per = {}
        for r, g in groups.items():
            per[r] = min(((model.route_value(r, p), list(p)) for p in itertools.permutations(g)), key=lambda x: x[0])
        total = sum(v for v, _ in per.values())
        if best is None or total < best[0]:
            best = (total, {r: p for r, (_, p) in per.items()})
    return best
