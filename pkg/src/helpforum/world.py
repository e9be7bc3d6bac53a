"""Grid world, robots and trajectories.

Cells are ``(x, y)`` integer pairs with ``x`` the column and ``y`` the row;
"north" is ``y - 1``.  Row-major order means sorting by ``(y, x)``.
"""

from __future__ import annotations

import json
import re
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .stl import Atom, Globally, Not, Trace

Cell = Tuple[int, int]

# wait first, then N, E, S, W: the action order used for tie-breaking
MOVES: Tuple[Cell, ...] = ((0, 0), (0, -1), (1, 0), (0, 1), (-1, 0))

OBSTACLE = "obstacle"
_AT = re.compile(r"^at_(\d+)_(\d+)$")


class Unreachable(Exception):
    pass


@dataclass(frozen=True)
class Latch:
    """Carried-state atom: true from the first visit to ``region`` onwards.

    With ``after`` set, only visits made once that atom holds count.
    """

    region: FrozenSet[Cell]
    after: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "region", frozenset(map(tuple, self.region)))


def at_atom(cell: Cell) -> str:
    """Name of the atom that is true exactly when the robot occupies ``cell``."""
    return f"at_{cell[0]}_{cell[1]}"


def parse_at_atom(name: str) -> Optional[Cell]:
    m = _AT.match(name)
    return (int(m.group(1)), int(m.group(2))) if m else None


@dataclass(frozen=True, eq=False)
class GridWorld:
    width: int
    height: int
    obstacles: FrozenSet[Cell] = frozenset()
    horizon: int = 30
    regions: Mapping[str, FrozenSet[Cell]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "obstacles", frozenset(map(tuple, self.obstacles)))
        object.__setattr__(
            self, "regions", {k: frozenset(map(tuple, v)) for k, v in dict(self.regions).items()}
        )
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        for c in self.obstacles:
            if not self.in_bounds(c):
                raise ValueError(f"obstacle {c} outside the grid")
        if not self.free:
            raise ValueError("world has no free cell")
        object.__setattr__(self, "_dist_cache", {})
        object.__setattr__(self, "_lock", threading.Lock())

    # -- cells -------------------------------------------------------------

    def in_bounds(self, c: Cell) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    @property
    def cells(self) -> List[Cell]:
        """All cells in row-major order."""
        return [(x, y) for y in range(self.height) for x in range(self.width)]

    @property
    def free(self) -> List[Cell]:
        return [c for c in self.cells if c not in self.obstacles]

    def is_free(self, c: Cell) -> bool:
        return self.in_bounds(c) and c not in self.obstacles

    def cell_index(self, c: Cell) -> int:
        return c[1] * self.width + c[0]

    def neighbors(self, c: Cell) -> List[Cell]:
        """Free cells reachable in one step (including staying), in action order."""
        out = []
        for dx, dy in MOVES:
            n = (c[0] + dx, c[1] + dy)
            if self.is_free(n):
                out.append(n)
        return out

    # -- distances -----------------------------------------------------------

    def _bfs(self, src: Cell) -> Dict[Cell, int]:
        dist = {src: 0}
        queue = deque([src])
        while queue:
            c = queue.popleft()
            for n in self.neighbors(c):
                if n not in dist:
                    dist[n] = dist[c] + 1
                    queue.append(n)
        return dist

    def distances_from(self, src: Cell) -> Dict[Cell, int]:
        cached = self._dist_cache.get(src)
        if cached is None:
            cached = self._bfs(src)
            with self._lock:
                self._dist_cache.setdefault(src, cached)
        return cached

    def region_distances(self, region: Iterable[Cell]) -> Dict[Cell, int]:
        """Multi-source BFS: steps from every free cell to the nearest region cell."""
        region = [c for c in region if self.is_free(c)]
        dist = {c: 0 for c in region}
        queue = deque(region)
        while queue:
            c = queue.popleft()
            for n in self.neighbors(c):
                if n not in dist:
                    dist[n] = dist[c] + 1
                    queue.append(n)
        return dist

    # -- atoms ---------------------------------------------------------------

    def region_of(self, atom: str) -> FrozenSet[Cell]:
        """Cells where ``atom`` holds: ``at_x_y`` atoms, named regions, ``obstacle``."""
        cell = parse_at_atom(atom)
        if cell is not None:
            return frozenset([cell])
        if atom in self.regions:
            return self.regions[atom]
        if atom == OBSTACLE:
            return self.obstacles
        raise KeyError(f"atom {atom!r} has no region in this world")

    def __reduce__(self):
        return (GridWorld.from_dict, (self.to_dict(),))

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "obstacles": sorted([list(c) for c in self.obstacles], key=lambda c: (c[1], c[0])),
            "horizon": self.horizon,
            "regions": {k: sorted([list(c) for c in v], key=lambda c: (c[1], c[0])) for k, v in sorted(self.regions.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GridWorld":
        return cls(
            width=int(d["width"]),
            height=int(d["height"]),
            obstacles=frozenset(tuple(c) for c in d.get("obstacles", [])),
            horizon=int(d.get("horizon", 30)),
            regions={k: frozenset(tuple(c) for c in v) for k, v in d.get("regions", {}).items()},
        )


def default_world(horizon: int = 30) -> GridWorld:
    """10x10 warehouse: shelf columns at x = 2, 5, 8 with gaps at rows 0, 5 and 9."""
    doors = {0, 5, 9}
    obstacles = {(x, y) for x in (2, 5, 8) for y in range(10) if y not in doors}
    return GridWorld(10, 10, frozenset(obstacles), horizon)


@dataclass(frozen=True)
class Robot:
    id: int
    start: Cell
    kind: str = "forklift"
    capabilities: str = ""

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind, "start": list(self.start), "capabilities": self.capabilities}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Robot":
        return cls(int(d["id"]), tuple(d["start"]), d.get("kind", "forklift"), d.get("capabilities", ""))


def check_roster(world: GridWorld, robots: Sequence[Robot]) -> None:
    ids = [r.id for r in robots]
    if len(set(ids)) != len(ids):
        raise ValueError("robot ids must be unique")
    for r in robots:
        if not world.is_free(r.start):
            raise ValueError(f"robot {r.id} starts on non-free cell {r.start}")


class Trajectory(tuple):
    """Sequence of cells where each step waits or moves one cell cardinally."""

    def __new__(cls, cells: Iterable[Cell], world: Optional[GridWorld] = None):
        cells = tuple(tuple(c) for c in cells)
        if not cells:
            raise ValueError("trajectory needs at least one cell")
        for a, b in zip(cells, cells[1:]):
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) > 1:
                raise ValueError(f"illegal step {a} -> {b}")
        if world is not None:
            for c in cells:
                if not world.is_free(c):
                    raise ValueError(f"trajectory enters non-free cell {c}")
            if len(cells) > world.horizon + 1:
                raise ValueError("trajectory longer than the horizon")
        return super().__new__(cls, cells)

    def padded(self, length: int) -> "Trajectory":
        """Extend by waiting at the final cell."""
        return Trajectory(tuple(self) + (self[-1],) * max(0, length - len(self)))


def manhattan_length(traj: Sequence[Cell]) -> int:
    """Total number of cardinal moves; waiting contributes 0."""
    return sum(abs(a[0] - b[0]) + abs(a[1] - b[1]) for a, b in zip(traj, traj[1:]))


def latch_order(bindings: Mapping[str, object]) -> List[str]:
    """Latch atoms sorted so every latch comes after the one it waits for."""
    latches = {k: v for k, v in bindings.items() if isinstance(v, Latch)}
    order: List[str] = []
    placed = set()
    while len(order) < len(latches):
        progressed = False
        for k in sorted(latches):
            dep = latches[k].after
            if k not in placed and (dep is None or dep in placed or dep not in latches):
                order.append(k)
                placed.add(k)
                progressed = True
        if not progressed:
            raise ValueError("cyclic latch dependencies")
    return order


def step_latches(bindings: Mapping[str, object], order: Sequence[str], held: FrozenSet[str], cell: Cell) -> FrozenSet[str]:
    """Latch atoms true after arriving at ``cell`` given those already held."""
    out = set(held)
    for k in order:
        if k in out:
            continue
        latch = bindings[k]
        if cell in latch.region and (latch.after is None or latch.after in out):
            out.add(k)
    return frozenset(out)


def lift(
    traj: Sequence[Cell],
    bindings: Optional[Mapping[str, object]] = None,
    world: Optional[GridWorld] = None,
    atoms: Iterable[str] = (),
) -> Trace:
    """Predicate view of a trajectory.

    ``bindings`` maps atom names to regions (cell collections) or to
    :class:`Latch` objects.  Extra ``atoms`` are resolved via
    ``world.region_of`` (or, for ``at_x_y`` names, without a world).
    """
    bindings = dict(bindings or {})
    regions: Dict[str, FrozenSet[Cell]] = {
        k: frozenset(map(tuple, v)) for k, v in bindings.items() if not isinstance(v, Latch)
    }
    order = latch_order(bindings)
    for a in atoms:
        if a in regions or a in bindings:
            continue
        if world is not None:
            regions[a] = world.region_of(a)
        else:
            cell = parse_at_atom(a)
            if cell is None:
                raise KeyError(f"atom {a!r} is unbound")
            regions[a] = frozenset([cell])
    steps = []
    held: FrozenSet[str] = frozenset()
    for c in traj:
        c = tuple(c)
        held = step_latches(bindings, order, held, c)
        steps.append(frozenset(a for a, r in regions.items() if c in r) | held)
    return Trace(tuple(steps), frozenset(regions) | frozenset(order))


def global_spec(world: GridWorld):
    """Always avoid obstacle cells over the horizon."""
    return Globally(Not(Atom(OBSTACLE)), (0, world.horizon))


def nearest_free_cell(world: GridWorld, c: Cell, exclude: Iterable[Cell] = ()) -> Cell:
    """Free cell minimizing the 1-norm distance to ``c``; ties go row-major."""
    excluded = set(map(tuple, exclude))
    best = None
    for cell in world.free:  # row-major
        if cell in excluded:
            continue
        d = abs(cell[0] - c[0]) + abs(cell[1] - c[1])
        if best is None or d < best[0]:
            best = (d, cell)
    if best is None:
        raise Unreachable("no free cell available")
    return best[1]


def shortest_path_dist(world: GridWorld, a: Cell, b: Cell) -> int:
    """Minimum number of cardinal steps from a to b through free cells."""
    if not (world.is_free(a) and world.is_free(b)):
        raise ValueError("both endpoints must be free cells")
    d = world.distances_from(a).get(b)
    if d is None:
        raise Unreachable(f"{b} is unreachable from {a}")
    return d


def load_scenario(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
