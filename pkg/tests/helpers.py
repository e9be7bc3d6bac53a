"""Independent reference implementations shared by the test modules.

The brute-force planner enumerates every trajectory of length H+1 and
scores it with the vectorized STL evaluator; it shares no code with the
search or the MILP encoding.
"""

from __future__ import annotations

import itertools
import random
from typing import Dict, Optional, Tuple

import numpy as np

from helpforum.planner import PathProblem, build_original, makespan_problem
from helpforum.stl import Atom, Eventually, evaluate_batch
from helpforum.stl.semantics import first_true
from helpforum.tasks import PnpTask, pnp_formula, sequence_latches, sequenced
from helpforum.world import GridWorld, Latch, Robot, at_atom, default_world

MOVES = ((0, 0), (0, -1), (1, 0), (0, 1), (-1, 0))


def all_trajectories(world: GridWorld, start, horizon: int) -> np.ndarray:
    """Every stay-or-step trajectory of length horizon+1, as (N, H+1) cell indices."""
    W = world.width
    n = W * world.height
    nbr = np.full((n, len(MOVES)), -1, dtype=np.int64)
    for c in world.free:
        for k, (dx, dy) in enumerate(MOVES):
            d = (c[0] + dx, c[1] + dy)
            if world.in_bounds(d) and world.is_free(d):
                nbr[c[1] * W + c[0], k] = d[1] * W + d[0]
    paths = np.array([[start[1] * W + start[0]]], dtype=np.int64)
    for _ in range(horizon):
        nxt = nbr[paths[:, -1]]  # (N, 5)
        rows, cols = np.nonzero(nxt >= 0)
        paths = np.concatenate([paths[rows], nxt[rows, cols][:, None]], axis=1)
    return paths


def _signals(problem: PathProblem, paths: np.ndarray) -> Tuple[np.ndarray, Dict[str, int]]:
    W = problem.world.width
    cols, names = [], []
    for a, region in sorted(problem.regions.items()):
        idx = [c[1] * W + c[0] for c in region]
        cols.append(np.isin(paths, idx))
        names.append(a)
    latches = {k: v for k, v in problem.bindings.items() if isinstance(v, Latch)}
    held: Dict[str, np.ndarray] = {}
    pending = sorted(latches)
    while pending:
        for k in list(pending):
            dep = latches[k].after
            if dep is not None and dep not in held:
                continue
            inside = np.isin(paths, [c[1] * W + c[0] for c in latches[k].region])
            if dep is not None:
                inside &= held[dep]
            held[k] = np.logical_or.accumulate(inside, axis=1)
            pending.remove(k)
    for k, v in sorted(held.items()):
        cols.append(v)
        names.append(k)
    return np.stack(cols, axis=2), {a: i for i, a in enumerate(names)}


def brute_force(problem: PathProblem) -> Optional[float]:
    """Optimal objective over all trajectories, ``None`` when none is feasible."""
    H = problem.horizon
    paths = all_trajectories(problem.world, problem.start, H)
    sig, idx = _signals(problem, paths)
    cost = problem.distance_weight * (paths[:, 1:] != paths[:, :-1]).sum(axis=1).astype(float)
    ok = evaluate_batch(sig, idx, problem.hard)[:, 0]
    for f, w in problem.objectives:
        pre = np.stack([evaluate_batch(sig[:, : t + 1], idx, f)[:, 0] for t in range(H + 1)], axis=1)
        T = first_true(pre)
        ok &= T >= 0
        cost = cost + w * T
    if not ok.any():
        return None
    return float(cost[ok].min())


def small_world(rng: random.Random) -> GridWorld:
    w, h = rng.choice([(3, 3), (3, 4), (4, 3), (4, 4)])
    cells = [(x, y) for y in range(h) for x in range(w)]
    obstacles = set(rng.sample(cells[1:], rng.randint(0, 2)))
    return GridWorld(w, h, frozenset(obstacles), horizon=rng.randint(4, 8))


def small_instance(seed: int) -> PathProblem:
    """Seeded instance: 4x4 or smaller, H <= 8, one visit, PNP or 2-stage task."""
    rng = random.Random(seed)
    while True:
        world = small_world(rng)
        free = world.free
        start = rng.choice(free)
        kind = seed % 3
        bindings = {}
        if kind == 0:
            formula = Eventually(Atom(at_atom(rng.choice(free))))
        elif kind == 1:
            pick, place = rng.sample(free, 2)
            formula = pnp_formula(PnpTask("t", pick, place))
        else:
            a, b = rng.sample(free, 2)
            formula = sequenced(["s1", "s2"])
            bindings = sequence_latches(["s1", "s2"], [[a], [b]])
        build = build_original if rng.random() < 0.7 else makespan_problem
        problem = build(world, start, formula, bindings)
        if brute_force(problem) is not None:
            return problem


# ---------------------------------------------------------------------------
# task allocation


def reference_optimum(world, robots, tasks, help_id=None):
    """Exhaustive minimum of summed route times plus help completion time."""
    dist = {c: world.distances_from(c) for c in world.free}

    def route(start, order):
        t, cur, h = 0, start, 0
        for task in order:
            t += dist[cur][task.pick] + task.dwell + dist[task.pick][task.place] + task.dwell
            cur = task.place
            if task.id == help_id:
                h = t
        return t + h

    best = None
    for assign in itertools.product(range(len(robots)), repeat=len(tasks)):
        total = 0
        for k, r in enumerate(robots):
            mine = [t for t, a in zip(tasks, assign) if a == k]
            total += min(route(r.start, p) for p in itertools.permutations(mine))
        best = total if best is None else min(best, total)
    return best


def random_fleet(seed, world=None, n_robots=None, n_tasks=None):
    rng = random.Random(seed)
    world = world or default_world()
    n_robots = n_robots or rng.randint(1, 3)
    n_tasks = n_tasks or rng.randint(1, 4)
    cells = rng.sample(world.free, n_robots + 2 * n_tasks)
    robots = [Robot(i + 1, cells[i]) for i in range(n_robots)]
    rest = cells[n_robots:]
    tasks = [PnpTask(f"t{i}", rest[2 * i], rest[2 * i + 1]) for i in range(n_tasks)]
    return world, robots, tasks
