"""Trajectory planning with STL objectives and help pricing."""

from __future__ import annotations

from typing import Optional, Tuple

from ..stl import TRUE, Formula
from ..world import Cell, GridWorld
from .problem import (
    Infeasible,
    PathProblem,
    PathSolution,
    PlannerError,
    SolverTimeout,
    UnsupportedFragment,
    build_original,
    build_updated,
    makespan_problem,
    trajectory_cost,
)
from .search import DEFAULT_TIMEOUT, must_visit, path_cells, solve


def makespan(world: GridWorld, start: Cell, formula: Formula, bindings=None, timeout: Optional[float] = DEFAULT_TIMEOUT) -> int:
    """M(start, phi): least time to first satisfaction.  Raises :class:`Infeasible`."""
    return solve(makespan_problem(world, start, formula, bindings), timeout=timeout).times[0]


def price_help(
    world: GridWorld,
    start: Cell,
    task_formula: Formula,
    help_formula: Formula,
    bindings=None,
    timeout: Optional[float] = DEFAULT_TIMEOUT,
    original_makespan: Optional[int] = None,
) -> Tuple[int, int, Optional[PathSolution]]:
    """``(tau_h, tau_new, updated solution)`` for one helper.

    ``tau_h`` is when the updated plan first completes the help task and
    ``tau_new`` is how much later it finishes everything than the helper's
    best makespan without helping.  ``original_makespan`` may be passed in
    when already known.
    """
    if help_formula == TRUE:
        return 0, 0, None
    m_orig = original_makespan
    if m_orig is None:
        m_orig = makespan(world, start, task_formula, bindings, timeout)
    sol = solve(build_updated(world, start, task_formula, help_formula, bindings), timeout=timeout)
    tau_h, t_new = sol.times
    return tau_h, t_new - m_orig, sol


__all__ = [
    "DEFAULT_TIMEOUT",
    "Infeasible",
    "PathProblem",
    "PathSolution",
    "PlannerError",
    "SolverTimeout",
    "UnsupportedFragment",
    "build_original",
    "build_updated",
    "makespan",
    "makespan_problem",
    "must_visit",
    "path_cells",
    "price_help",
    "solve",
    "trajectory_cost",
]
