"""Path problems, solutions and builders for original/updated plans."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Mapping, Optional, Tuple

from ..stl import TRUE, Eventually, Formula, conj
from ..world import Cell, GridWorld, Latch, Trajectory, global_spec, latch_order, lift, manhattan_length


class PlannerError(Exception):
    pass


class Infeasible(PlannerError):
    pass


class UnsupportedFragment(PlannerError):
    pass


class SolverTimeout(PlannerError):
    def __init__(self, message: str, incumbent: Optional["PathSolution"] = None):
        super().__init__(message)
        self.incumbent = incumbent


@dataclass(frozen=True, eq=False)
class PathProblem:
    """Minimize ``distance_weight * D(X) + sum_i w_i * T(X, phi_i)``.

    ``hard`` must hold on the whole trajectory, padded with waits up to the
    horizon.  Every objective must be satisfied by some prefix within the
    horizon.
    """

    world: GridWorld
    start: Cell
    objectives: Tuple[Tuple[Formula, float], ...] = ()
    hard: Formula = TRUE
    distance_weight: float = 1.0
    bindings: Mapping[str, object] = field(default_factory=dict)
    horizon: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(self.start))
        object.__setattr__(self, "objectives", tuple((f, float(w)) for f, w in self.objectives))
        object.__setattr__(self, "bindings", dict(self.bindings))
        if self.horizon is None:
            object.__setattr__(self, "horizon", self.world.horizon)
        if self.distance_weight < 0 or any(w < 0 for _, w in self.objectives):
            raise ValueError("weights must be non-negative")
        if not self.objectives and self.hard == TRUE and self.distance_weight == 0:
            raise ValueError("problem has neither objectives nor constraints")
        if not self.world.is_free(self.start):
            raise ValueError(f"start {self.start} is not a free cell")
        self.regions  # resolve atoms eagerly so errors surface here

    @property
    def formulas(self) -> Tuple[Formula, ...]:
        return tuple(f for f, _ in self.objectives) + (self.hard,)

    @cached_property
    def atoms(self) -> FrozenSet[str]:
        out = frozenset()
        for f in self.formulas:
            out |= f.atoms()
        return out

    @cached_property
    def regions(self) -> Dict[str, FrozenSet[Cell]]:
        """Cells for every non-latch atom used by the problem."""
        out = {}
        for a in sorted(self.atoms):
            b = self.bindings.get(a)
            if isinstance(b, Latch):
                continue
            if b is not None:
                out[a] = frozenset(map(tuple, b))
                continue
            try:
                out[a] = self.world.region_of(a)
            except KeyError as exc:
                raise UnsupportedFragment(f"atom {a!r} is not bound to a region") from exc
        return out

    @cached_property
    def latches(self) -> Dict[str, Latch]:
        out = {k: v for k, v in self.bindings.items() if isinstance(v, Latch)}
        for v in out.values():
            if v.after is not None and v.after not in out:
                raise UnsupportedFragment(f"latch waits for unknown latch {v.after!r}")
        return out

    @cached_property
    def latch_order(self):
        return latch_order(self.latches)

    def lift(self, traj) -> object:
        b = dict(self.regions)
        b.update(self.latches)
        return lift(traj, b)


@dataclass(frozen=True)
class PathSolution:
    trajectory: Trajectory
    objective: float
    times: Tuple[int, ...]
    distance: int
    nodes: int = 0
    wall_time: float = 0.0
    optimal: bool = True

    def padded(self, horizon: int) -> Trajectory:
        return self.trajectory.padded(horizon + 1)


def _evaluate(problem: PathProblem, traj) -> Tuple[Optional[Tuple[int, ...]], bool, int]:
    """T values per objective, hard-constraint verdict and distance of ``traj``."""
    from ..stl import time_to_first_satisfaction, satisfies

    full = Trajectory(traj).padded(problem.horizon + 1)
    trace = problem.lift(full)
    times = []
    for f, _ in problem.objectives:
        times.append(time_to_first_satisfaction(trace, f))
    ok = satisfies(trace, problem.hard)
    return tuple(times), ok, manhattan_length(full)


def trajectory_cost(problem: PathProblem, traj) -> Optional[float]:
    """Objective value of a trajectory, or ``None`` if it is not feasible."""
    times, ok, dist = _evaluate(problem, traj)
    if not ok or any(t is None for t in times):
        return None
    return problem.distance_weight * dist + sum(w * t for (_, w), t in zip(problem.objectives, times))


def build_original(world: GridWorld, start: Cell, task_formula: Formula, bindings=None) -> PathProblem:
    """Plan for the robot's own tasks: ``min D + T(phi)`` under the global spec."""
    return PathProblem(
        world, start, ((task_formula, 1.0),), hard=global_spec(world), distance_weight=1.0, bindings=bindings or {}
    )


def build_updated(world: GridWorld, start: Cell, task_formula: Formula, help_formula: Formula, bindings=None) -> PathProblem:
    """Plan that helps and still finishes: ``min D + T(F help) + T(F help & phi)``."""
    help_ev = Eventually(help_formula) if help_formula != TRUE else TRUE
    new = conj(help_ev, task_formula)
    return PathProblem(
        world,
        start,
        ((help_ev, 1.0), (new, 1.0)),
        hard=global_spec(world),
        distance_weight=1.0,
        bindings=bindings or {},
    )


def makespan_problem(world: GridWorld, start: Cell, formula: Formula, bindings=None) -> PathProblem:
    return PathProblem(world, start, ((formula, 1.0),), hard=global_spec(world), distance_weight=0.0, bindings=bindings or {})
