"""Exact best-first search over the time-expanded grid times the task monitor.

A state is (cell, t, objective residuals, hard-constraint residual, latches).
Residuals come from formula progression, so the monitor is exact for every
formula the grammar can produce.  The lower bound is, per unfinished
objective, the largest shortest-path distance to a region that the residual
forces the robot to visit.
"""

from __future__ import annotations

import heapq
import time
from functools import lru_cache
from typing import Dict, FrozenSet, Optional, Tuple

from ..stl import FALSE, TRUE, And, Atom, Eventually, Formula, Globally, Or, Until, holds_at_end, progress
from ..world import MOVES, Trajectory, step_latches
from .problem import Infeasible, PathProblem, PathSolution, SolverTimeout

INF = float("inf")
DEFAULT_TIMEOUT = 30.0


@lru_cache(maxsize=1 << 16)
def must_visit(f: Formula) -> FrozenSet[str]:
    """Atoms that hold at some index of every trace satisfying ``f``."""
    if isinstance(f, Atom):
        return frozenset([f.name])
    if isinstance(f, And):
        out = frozenset()
        for c in f.args:
            out |= must_visit(c)
        return out
    if isinstance(f, Or):
        sets = [must_visit(c) for c in f.args]
        out = sets[0]
        for s in sets[1:]:
            out &= s
        return out
    if isinstance(f, Eventually):
        return must_visit(f.child)
    if isinstance(f, Globally):
        # G_[a,b] with a > 0 is vacuous on a trace that ends before t + a
        return must_visit(f.child) if f.interval is None or f.interval[0] == 0 else frozenset()
    if isinstance(f, Until):
        return must_visit(f.right)
    return frozenset()


class _Context:
    def __init__(self, problem: PathProblem):
        self.p = problem
        self.world = problem.world
        self.H = problem.horizon
        self.base = {}
        for c in self.world.free:
            self.base[c] = frozenset(a for a, r in problem.regions.items() if c in r)
        self.dist = {a: self.world.region_distances(r) for a, r in problem.regions.items()}
        for a, latch in problem.latches.items():
            self.dist[a] = self.world.region_distances(latch.region)
        self.weights = tuple(w for _, w in problem.objectives)
        self._letters: Dict[Tuple, FrozenSet[str]] = {}

    def letter(self, cell, held):
        key = (cell, held)
        out = self._letters.get(key)
        if out is None:
            out = self.base[cell] | held
            self._letters[key] = out
        return out

    def atom_dist(self, atoms, cell, held) -> float:
        best = 0
        for a in atoms:
            if a in held:
                continue
            d = self.dist[a].get(cell)
            if d is None:
                return INF
            if d > best:
                best = d
        return best

    def bound(self, cell, t, res, hard_post, held) -> Tuple[float, bool]:
        """Lower bound on cost-to-go, and whether the state is still viable."""
        h = 0.0
        move_lb = 0
        for r, w in zip(res, self.weights):
            if r is None:
                continue
            d = self.atom_dist(must_visit(r), cell, held)
            steps = max(1, d)
            if t + steps > self.H:
                return INF, False
            h += w * steps
            move_lb = max(move_lb, d)
        if hard_post is not None:
            d = self.atom_dist(must_visit(hard_post), cell, held)
            if t + d > self.H:
                return INF, False
            move_lb = max(move_lb, d)
        return h + self.p.distance_weight * move_lb, True

    def hard_ok_when_waiting(self, hard_pre, letter, t) -> bool:
        """Does the hard constraint hold if the robot waits here until H?"""
        r = hard_pre
        for _ in range(self.H - t):
            r = progress(r, letter)
            if r == FALSE:
                return False
            if r == TRUE:
                return True
        return holds_at_end(r, letter)


def solve(
    problem: PathProblem,
    backend: str = "internal",
    timeout: Optional[float] = DEFAULT_TIMEOUT,
    lp_path=None,
) -> Optional[PathSolution]:
    """Optimal trajectory for ``problem``.

    ``backend="export-only"`` writes the MILP to ``lp_path`` and returns
    ``None``.  Raises :class:`Infeasible` or :class:`SolverTimeout`.
    """
    if backend == "export-only":
        from .milp import encode, write_lp

        if lp_path is None:
            raise ValueError("export-only backend needs lp_path")
        write_lp(encode(problem), lp_path)
        return None
    if backend != "internal":
        raise ValueError(f"unknown backend {backend!r}")
    return _astar(problem, timeout)


def _astar(problem: PathProblem, timeout: Optional[float]) -> PathSolution:
    t0 = time.perf_counter()
    ctx = _Context(problem)
    H = ctx.H
    n_obj = len(problem.objectives)
    order = problem.latch_order
    latches = problem.latches
    dw = problem.distance_weight

    def arrive(cell, t, res_prev, times_prev, hard_pre_prev, held_prev, first):
        """Read the letter at ``cell``; return the successor record or None."""
        held = step_latches(latches, order, held_prev, cell) if order else held_prev
        letter = ctx.letter(cell, held)
        if first:
            hard_pre = hard_pre_prev
        else:
            hard_pre = progress(hard_pre_prev[0], hard_pre_prev[1])
            if hard_pre == FALSE:
                return None
        res = list(res_prev)
        times = list(times_prev)
        for i, r in enumerate(res):
            if r is None:
                continue
            if holds_at_end(r, letter):
                res[i] = None
                times[i] = t
            else:
                nxt = progress(r, letter)
                if nxt == FALSE:
                    return None
                res[i] = nxt
        return held, letter, hard_pre, tuple(res), tuple(times)

    start = problem.start
    init = arrive(start, 0, tuple(f for f, _ in problem.objectives), (None,) * n_obj, problem.hard, frozenset(), True)
    if init is None:
        raise Infeasible("objective or constraint violated at the start")

    # heap entries: (f, g, path, cell, t, key)
    best: Dict[tuple, Tuple[float, tuple]] = {}
    records: Dict[tuple, tuple] = {}
    heap = []
    incumbent = None
    expanded = 0

    def push(cell, t, rec, g, path):
        nonlocal incumbent
        held, letter, hard_pre, res, times = rec
        hard_post = progress(hard_pre, letter) if t < H else None
        if hard_post == FALSE:
            return
        h, viable = ctx.bound(cell, t, res, hard_post, held)
        if not viable:
            return
        key = (cell, t, res, hard_pre, held)
        old = best.get(key)
        if old is not None and (old[0] < g or (old[0] == g and old[1] <= path)):
            return
        best[key] = (g, path)
        records[key] = (rec, letter)
        heapq.heappush(heap, (g + h, g, path, cell, t, key))
        if all(r is None for r in res) and ctx.hard_ok_when_waiting(hard_pre, letter, t):
            if incumbent is None or (g, path) < incumbent[:2]:
                incumbent = (g, path, key)

    push(start, 0, init, 0.0, ())

    while heap:
        f, g, path, cell, t, key = heapq.heappop(heap)
        cur = best.get(key)
        if cur is None or cur[0] != g or cur[1] != path:
            continue
        (held, letter, hard_pre, res, times), _ = records[key]
        expanded += 1
        if timeout is not None and expanded % 512 == 0 and time.perf_counter() - t0 > timeout:
            sol = None
            if incumbent is not None:
                sol = _finish(problem, incumbent[1], records[incumbent[2]][0][4], incumbent[0], expanded, t0, optimal=False)
            raise SolverTimeout(f"no optimality proof within {timeout}s", sol)
        if all(r is None for r in res) and ctx.hard_ok_when_waiting(hard_pre, letter, t):
            return _finish(problem, path, times, g, expanded, t0)
        if t >= H:
            continue
        step_cost = sum(w for r, w in zip(res, ctx.weights) if r is not None)
        for ai, (dx, dy) in enumerate(MOVES):
            nxt = (cell[0] + dx, cell[1] + dy)
            if not ctx.world.is_free(nxt):
                continue
            rec = arrive(nxt, t + 1, res, times, (hard_pre, letter), held, False)
            if rec is None:
                continue
            g2 = g + step_cost + (dw if ai else 0.0)
            push(nxt, t + 1, rec, g2, path + (ai,))
    raise Infeasible("no trajectory satisfies the problem within the horizon")


def path_cells(start, actions) -> Trajectory:
    cells = [tuple(start)]
    for a in actions:
        dx, dy = MOVES[a]
        c = cells[-1]
        cells.append((c[0] + dx, c[1] + dy))
    return Trajectory(cells)


def _finish(problem, path, times, g, expanded, t0, optimal=True) -> PathSolution:
    traj = path_cells(problem.start, path)
    dist = sum(1 for a in path if a)
    return PathSolution(
        trajectory=traj,
        objective=g,
        times=tuple(times),
        distance=dist,
        nodes=expanded,
        wall_time=time.perf_counter() - t0,
        optimal=optimal,
    )
