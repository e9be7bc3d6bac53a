"""STL abstract syntax tree.

Nodes are immutable and hashable so they can be used as dictionary keys
(the planner keys its search states on residual formulas).  Intervals are
closed integer pairs ``(a, b)``; ``None`` marks an unbounded operator, which
is read as ``[0, H]`` at evaluation time.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional, Tuple

Interval = Optional[Tuple[int, int]]


def check_interval(interval: Interval) -> Interval:
    if interval is None:
        return None
    a, b = interval
    if not (isinstance(a, int) and isinstance(b, int)) or a < 0 or a > b:
        raise ValueError(f"invalid interval [{a},{b}]: need 0 <= a <= b")
    return (a, b)


class Formula:
    __slots__ = ()

    def children(self) -> Tuple["Formula", ...]:
        return ()

    def walk(self) -> Iterator["Formula"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children()))

    def atoms(self) -> frozenset:
        return frozenset(n.name for n in self.walk() if isinstance(n, Atom))

    def depth(self) -> int:
        kids = self.children()
        return 1 + (max(k.depth() for k in kids) if kids else 0)

    def __str__(self) -> str:
        from .parser import to_text

        return to_text(self)

    # operator sugar for building formulas in code
    def __and__(self, other: "Formula") -> "Formula":
        return And((self, other))

    def __or__(self, other: "Formula") -> "Formula":
        return Or((self, other))

    def __invert__(self) -> "Formula":
        return Not(self)


def _hashed(cls):
    """Cache the structural hash; residual formulas are hashed constantly."""

    def __hash__(self):
        return self._hash

    cls.__hash__ = __hash__
    return cls


@_hashed
@dataclass(frozen=True, eq=True)
class Const(Formula):
    value: bool

    @cached_property
    def _hash(self) -> int:
        return hash(("const", self.value))


@_hashed
@dataclass(frozen=True, eq=True)
class Atom(Formula):
    name: str

    @cached_property
    def _hash(self) -> int:
        return hash(("atom", self.name))


@_hashed
@dataclass(frozen=True, eq=True)
class Not(Formula):
    child: Formula

    def children(self):
        return (self.child,)

    @cached_property
    def _hash(self) -> int:
        return hash(("not", self.child))


@_hashed
@dataclass(frozen=True, eq=True)
class And(Formula):
    args: Tuple[Formula, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) < 2:
            raise ValueError("And needs at least two operands")

    def children(self):
        return self.args

    @cached_property
    def _hash(self) -> int:
        return hash(("and", self.args))


@_hashed
@dataclass(frozen=True, eq=True)
class Or(Formula):
    args: Tuple[Formula, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) < 2:
            raise ValueError("Or needs at least two operands")

    def children(self):
        return self.args

    @cached_property
    def _hash(self) -> int:
        return hash(("or", self.args))


@_hashed
@dataclass(frozen=True, eq=True)
class Implies(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)

    @cached_property
    def _hash(self) -> int:
        return hash(("implies", self.left, self.right))


@_hashed
@dataclass(frozen=True, eq=True)
class Eventually(Formula):
    child: Formula
    interval: Interval = None

    def __post_init__(self):
        object.__setattr__(self, "interval", check_interval(self.interval))

    def children(self):
        return (self.child,)

    @cached_property
    def _hash(self) -> int:
        return hash(("F", self.child, self.interval))


@_hashed
@dataclass(frozen=True, eq=True)
class Globally(Formula):
    child: Formula
    interval: Interval = None

    def __post_init__(self):
        object.__setattr__(self, "interval", check_interval(self.interval))

    def children(self):
        return (self.child,)

    @cached_property
    def _hash(self) -> int:
        return hash(("G", self.child, self.interval))


@_hashed
@dataclass(frozen=True, eq=True)
class Until(Formula):
    left: Formula
    right: Formula
    interval: Interval = None

    def __post_init__(self):
        object.__setattr__(self, "interval", check_interval(self.interval))

    def children(self):
        return (self.left, self.right)

    @cached_property
    def _hash(self) -> int:
        return hash(("U", self.left, self.right, self.interval))


TRUE = Const(True)
FALSE = Const(False)

TEMPORAL = (Eventually, Globally, Until)


def reach(f: Formula) -> float:
    """How many steps past the evaluation index ``f`` may look (inf if unbounded)."""
    if isinstance(f, (Atom, Const)):
        return 0
    if isinstance(f, TEMPORAL):
        if f.interval is None:
            return float("inf")
        return f.interval[1] + max(reach(c) for c in f.children())
    return max(reach(c) for c in f.children())


# ---------------------------------------------------------------------------
# simplifying constructors (used by progression and the task builders)


def conj(*args: Formula) -> Formula:
    out = {}
    for a in args:
        if isinstance(a, And):
            for b in a.args:
                out.setdefault(b, None)
        elif a == TRUE:
            continue
        elif a == FALSE:
            return FALSE
        else:
            out.setdefault(a, None)
    items = tuple(out)
    if not items:
        return TRUE
    if len(items) == 1:
        return items[0]
    return And(items)


def disj(*args: Formula) -> Formula:
    out = {}
    for a in args:
        if isinstance(a, Or):
            for b in a.args:
                out.setdefault(b, None)
        elif a == FALSE:
            continue
        elif a == TRUE:
            return TRUE
        else:
            out.setdefault(a, None)
    items = tuple(out)
    if not items:
        return FALSE
    if len(items) == 1:
        return items[0]
    return Or(items)


def neg(a: Formula) -> Formula:
    if isinstance(a, Const):
        return Const(not a.value)
    if isinstance(a, Not):
        return a.child
    return Not(a)


def implies(a: Formula, b: Formula) -> Formula:
    if a == FALSE or b == TRUE:
        return TRUE
    if a == TRUE:
        return b
    if b == FALSE:
        return neg(a)
    return Implies(a, b)
