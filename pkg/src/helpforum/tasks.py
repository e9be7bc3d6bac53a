"""Task specifications: pick-and-place, visits, dwell, sequencing.

Location predicates use ``at_x_y`` atoms (bound implicitly to their cell).
An action at a cell with duration ``d`` means occupying the cell for ``d + 1``
consecutive steps (arrive, then ``d`` steps of work)::

    act(c, 1) = at_c & F_[1,1](at_c)

Sequenced stages use carried-state atoms: a :class:`Latch` becomes true the
first time its region is visited (after its predecessor latched) and stays
true.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .stl import TRUE, Atom, Eventually, Formula, Globally, Not, Until, conj, disj, implies
from .world import Cell, GridWorld, Latch, Unreachable, at_atom, nearest_free_cell


Binding = Union[frozenset, Latch]


def act(cell: Cell, dwell: int = 1) -> Formula:
    """Occupy ``cell`` now and for the next ``dwell`` steps."""
    a = Atom(at_atom(cell))
    if dwell <= 0:
        return a
    return conj(a, *(Eventually(a, (k, k)) for k in range(1, dwell + 1)))


@dataclass(frozen=True)
class PnpTask:
    id: str
    pick: Cell
    place: Cell
    dwell: int = 1

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "pick", tuple(self.pick))
        object.__setattr__(self, "place", tuple(self.place))
        if self.pick == self.place:
            raise ValueError(f"task {self.id}: pick and place must differ")
        if self.dwell < 0:
            raise ValueError("dwell must be >= 0")

    @property
    def cells(self) -> Tuple[Cell, Cell]:
        return (self.pick, self.place)

    def to_dict(self) -> dict:
        return {"id": self.id, "pick": list(self.pick), "place": list(self.place), "dwell": self.dwell}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PnpTask":
        return cls(str(d["id"]), tuple(d["pick"]), tuple(d["place"]), int(d.get("dwell", 1)))


def pnp_formula(task: PnpTask, others: Iterable[PnpTask] = (), horizon: Optional[int] = None) -> Formula:
    """``(~place U pick) & G(pick -> (~others U place)) & F(place)``.

    ``others`` are the robot's other pending tasks; starting any of their
    actions while carrying this pallet is forbidden.  Intervals are left
    unbounded (read as ``[0, H]``) unless ``horizon`` is given.
    """
    iv = None if horizon is None else (0, horizon)
    pick = act(task.pick, task.dwell)
    place = act(task.place, task.dwell)
    other_acts = [act(c, o.dwell) for o in others for c in o.cells if c not in task.cells]
    phi1 = Until(Not(place), pick, iv)
    if other_acts:
        phi2 = Globally(implies(pick, Until(Not(disj(*other_acts)), place, iv)), iv)
    else:
        phi2 = Globally(implies(pick, Eventually(place, iv)), iv)
    phi3 = Eventually(place, iv)
    return conj(phi1, phi2, phi3)


def tasks_formula(tasks: Sequence[PnpTask], extra_others: Iterable[PnpTask] = ()) -> Formula:
    """Conjunction of PNP formulas for one robot's assignment."""
    extra = list(extra_others)
    parts = [pnp_formula(t, [o for o in tasks if o is not t] + extra) for t in tasks]
    return conj(*parts) if parts else TRUE


def conjunctive_visits(regions: Sequence[str], horizon: Optional[int] = None) -> Formula:
    """Eventually visit every region, in any order."""
    if not regions:
        raise ValueError("need at least one region")
    iv = None if horizon is None else (0, horizon)
    return conj(*(Eventually(Atom(r), iv) for r in regions))


def sequenced(stages: Sequence[Union[str, Formula]], horizon: Optional[int] = None) -> Formula:
    """Nested ordering: each stage completes before the next may hold.

    Two stages give ``F a & F b & G(~b U a)``; each further stage wraps the
    previous formula the same way.
    """
    if len(stages) < 2:
        raise ValueError("need at least two stages")
    iv = None if horizon is None else (0, horizon)
    fs = [Atom(s) if isinstance(s, str) else s for s in stages]
    acc = fs[0]
    for nxt in fs[1:]:
        acc = conj(Eventually(acc, iv), Eventually(nxt, iv), Globally(Until(Not(nxt), acc, iv), iv))
    return acc


def sequence_latches(stage_atoms: Sequence[str], regions: Sequence[Iterable[Cell]]) -> Dict[str, Latch]:
    """Bindings for :func:`sequenced` stages: each latch waits for its predecessor."""
    out = {}
    prev = None
    for name, region in zip(stage_atoms, regions):
        out[name] = Latch(frozenset(map(tuple, region)), prev)
        prev = name
    return out


def dwell_formula(cell: Cell, steps: int) -> Formula:
    """Eventually occupy ``cell`` for ``steps`` consecutive timesteps."""
    if steps < 1:
        raise ValueError("dwell must be >= 1")
    return Eventually(act(cell, steps - 1))


@dataclass(frozen=True)
class HelpTask:
    site: Cell
    dwell: int = 1
    style: str = "pnp"  # "pnp" (move the obstruction) or "dwell" (stay at the site)

    def __post_init__(self):
        object.__setattr__(self, "site", tuple(self.site))
        if self.dwell < 1:
            raise ValueError("help dwell must be >= 1")
        if self.style not in ("pnp", "dwell"):
            raise ValueError(f"unknown resolution style {self.style!r}")


def help_pnp_task(help: HelpTask, world: GridWorld, avoid: Iterable[Cell] = (), task_id: str = "help") -> PnpTask:
    """PNP job moving the obstruction at the help site to the nearest free cell."""
    place = nearest_free_cell(world, help.site, exclude=set(avoid) | {help.site})
    if place not in world.distances_from(help.site):
        raise Unreachable(f"no free cell reachable from {help.site}")
    return PnpTask(task_id, help.site, place)


def help_formula(help: HelpTask, world: GridWorld, others: Iterable[PnpTask] = (), avoid: Iterable[Cell] = ()) -> Formula:
    if help.style == "dwell":
        return dwell_formula(help.site, help.dwell)
    return pnp_formula(help_pnp_task(help, world, avoid), others)


@dataclass
class Schedule:
    """Partition of tasks among robots, with per-robot service order."""

    tasks: Dict[str, PnpTask]
    routes: Dict[int, List[str]] = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        seen: List[str] = [t for r in self.routes.values() for t in r]
        if len(seen) != len(set(seen)):
            raise ValueError("a task is assigned to more than one robot")
        if set(seen) != set(self.tasks):
            missing = set(self.tasks) - set(seen)
            extra = set(seen) - set(self.tasks)
            raise ValueError(f"schedule is not a partition (missing {sorted(missing)}, unknown {sorted(extra)})")

    def of(self, robot_id: int) -> List[PnpTask]:
        return [self.tasks[t] for t in self.routes.get(robot_id, [])]

    def robot_of(self, task_id: str) -> int:
        for r, ids in self.routes.items():
            if task_id in ids:
                return r
        raise KeyError(task_id)

    def to_dict(self) -> dict:
        return {"routes": {str(r): list(ids) for r, ids in sorted(self.routes.items())}}

    @classmethod
    def from_dict(cls, d: Mapping, tasks: Mapping[str, PnpTask]) -> "Schedule":
        return cls(dict(tasks), {int(r): list(ids) for r, ids in d["routes"].items()})


def makespan(world: GridWorld, start: Cell, formula: Formula, bindings: Optional[Mapping[str, Binding]] = None, **solve_kw) -> Optional[int]:
    """Minimum time to first satisfaction from ``start``; ``None`` if infeasible."""
    from .planner import Infeasible, PathProblem, solve

    problem = PathProblem(world, start, objectives=((formula, 1.0),), distance_weight=0.0, bindings=bindings or {})
    try:
        return solve(problem, **solve_kw).times[0]
    except Infeasible:
        return None
