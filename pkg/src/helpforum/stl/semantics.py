"""Bounded discrete-time satisfaction.

Three evaluators live here and are cross-checked against each other in the
test suite:

* :func:`satisfies` -- direct recursive reading of the definitions.  Slow, kept
  as the reference.
* :func:`evaluate_batch` -- numpy evaluator computing satisfaction of a formula
  at every index of many traces at once.  Used for exhaustive enumeration.
* :func:`progress` / :func:`holds_at_end` -- formula progression, the
  incremental monitor that the planner runs on the time-expanded graph.

Eventually and until are strong (the witness must lie inside the trace);
globally is clipped to the end of the trace.  Unbounded operators read as
``[0, H]`` with ``H`` defaulting to the last index of the trace.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .formula import (
    FALSE,
    TRUE,
    And,
    Atom,
    Const,
    Eventually,
    Formula,
    Globally,
    Implies,
    Not,
    Or,
    Until,
    conj,
    disj,
    implies,
    neg,
)


class UnboundAtomError(KeyError):
    pass


@dataclass(frozen=True)
class Trace:
    """Per-timestep atom valuations; ``steps[t]`` is the set of atoms true at t."""

    steps: Tuple[frozenset, ...]
    atoms: frozenset

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a trace has at least one timestep")
        for s in self.steps:
            if not s <= self.atoms:
                raise ValueError(f"valuation {set(s)} outside atom universe")

    @classmethod
    def from_signals(cls, signals: Mapping[str, Sequence[bool]]) -> "Trace":
        lengths = {len(v) for v in signals.values()}
        if len(lengths) > 1:
            raise ValueError("all signals must have the same length")
        n = lengths.pop() if lengths else 1
        steps = tuple(
            frozenset(a for a, v in signals.items() if v[t]) for t in range(n)
        )
        return cls(steps, frozenset(signals))

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def last(self) -> int:
        return len(self.steps) - 1

    def prefix(self, t: int) -> "Trace":
        return Trace(self.steps[: t + 1], self.atoms)

    def signal(self, atom: str) -> list:
        return [atom in s for s in self.steps]


def _window(t: int, interval, last: int, horizon: int) -> range:
    a, b = interval if interval is not None else (0, horizon)
    return range(t + a, min(t + b, last) + 1)


def satisfies(trace: Trace, formula: Formula, t0: int = 0, horizon: Optional[int] = None) -> bool:
    """Reference semantics: does ``trace`` satisfy ``formula`` at index ``t0``?"""
    if not 0 <= t0 <= trace.last:
        raise IndexError(f"t0={t0} outside trace of length {len(trace)}")
    for a in formula.atoms():
        if a not in trace.atoms:
            raise UnboundAtomError(a)
    h = trace.last if horizon is None else horizon
    return _sat(trace, formula, t0, h)


def _sat(tr: Trace, f: Formula, t: int, h: int) -> bool:
    if isinstance(f, Atom):
        return f.name in tr.steps[t]
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Not):
        return not _sat(tr, f.child, t, h)
    if isinstance(f, And):
        return all(_sat(tr, c, t, h) for c in f.args)
    if isinstance(f, Or):
        return any(_sat(tr, c, t, h) for c in f.args)
    if isinstance(f, Implies):
        return (not _sat(tr, f.left, t, h)) or _sat(tr, f.right, t, h)
    if isinstance(f, Eventually):
        return any(_sat(tr, f.child, k, h) for k in _window(t, f.interval, tr.last, h))
    if isinstance(f, Globally):
        return all(_sat(tr, f.child, k, h) for k in _window(t, f.interval, tr.last, h))
    if isinstance(f, Until):
        for k in _window(t, f.interval, tr.last, h):
            if _sat(tr, f.right, k, h) and all(_sat(tr, f.left, j, h) for j in range(t, k)):
                return True
        return False
    raise TypeError(f"unknown node {f!r}")


def time_to_first_satisfaction(
    trace: Trace, formula: Formula, horizon: Optional[int] = None
) -> Optional[int]:
    """Smallest t such that the prefix ``trace[0:t]`` satisfies ``formula``.

    Returns ``None`` when no prefix (including the full trace) satisfies it.
    """
    for a in formula.atoms():
        if a not in trace.atoms:
            raise UnboundAtomError(a)
    for t in range(len(trace)):
        pre = trace.prefix(t)
        h = pre.last if horizon is None else horizon
        if _sat(pre, formula, 0, h):
            return t
    return None


# ---------------------------------------------------------------------------
# vectorized evaluation


def evaluate_batch(
    signals: np.ndarray,
    atom_index: Mapping[str, int],
    formula: Formula,
    horizon: Optional[int] = None,
) -> np.ndarray:
    """Satisfaction of ``formula`` at every index of every trace.

    ``signals`` has shape ``(N, L+1, n_atoms)`` (boolean); the result has shape
    ``(N, L+1)``.
    """
    signals = np.asarray(signals, dtype=bool)
    if signals.ndim != 3:
        raise ValueError("signals must be (traces, time, atoms)")
    for a in formula.atoms():
        if a not in atom_index:
            raise UnboundAtomError(a)
    last = signals.shape[1] - 1
    h = last if horizon is None else horizon
    memo: Dict[Formula, np.ndarray] = {}
    return _batch(signals, atom_index, formula, last, h, memo)


def _shift(x: np.ndarray, k: int, fill: bool) -> np.ndarray:
    """y[:, t] = x[:, t+k], padded with ``fill`` past the end."""
    if k == 0:
        return x
    out = np.full_like(x, fill)
    if k < x.shape[1]:
        out[:, : x.shape[1] - k] = x[:, k:]
    return out


def _batch(sig, idx, f, last, h, memo):
    if f in memo:
        return memo[f]
    n, width = sig.shape[0], sig.shape[1]
    if isinstance(f, Atom):
        r = sig[:, :, idx[f.name]]
    elif isinstance(f, Const):
        r = np.full((n, width), f.value, dtype=bool)
    elif isinstance(f, Not):
        r = ~_batch(sig, idx, f.child, last, h, memo)
    elif isinstance(f, And):
        r = np.logical_and.reduce([_batch(sig, idx, c, last, h, memo) for c in f.args])
    elif isinstance(f, Or):
        r = np.logical_or.reduce([_batch(sig, idx, c, last, h, memo) for c in f.args])
    elif isinstance(f, Implies):
        r = ~_batch(sig, idx, f.left, last, h, memo) | _batch(sig, idx, f.right, last, h, memo)
    elif isinstance(f, (Eventually, Globally)):
        a, b = f.interval if f.interval is not None else (0, h)
        child = _batch(sig, idx, f.child, last, h, memo)
        ev = isinstance(f, Eventually)
        r = np.full((n, width), not ev, dtype=bool)
        for k in range(a, min(b, last) + 1):
            if ev:
                r = r | _shift(child, k, False)
            else:
                r = r & _shift(child, k, True)
    elif isinstance(f, Until):
        a, b = f.interval if f.interval is not None else (0, h)
        left = _batch(sig, idx, f.left, last, h, memo)
        right = _batch(sig, idx, f.right, last, h, memo)
        r = np.zeros((n, width), dtype=bool)
        running = np.ones((n, width), dtype=bool)  # left holds on [t, t+k)
        for k in range(0, min(b, last) + 1):
            if k >= a:
                r = r | (running & _shift(right, k, False))
            running = running & _shift(left, k, False)
    else:
        raise TypeError(f"unknown node {f!r}")
    memo[f] = r
    return r


def prefix_satisfaction(
    signals: np.ndarray, atom_index: Mapping[str, int], formula: Formula
) -> np.ndarray:
    """``out[i, t]`` -- does the length-(t+1) prefix of trace i satisfy ``formula``?"""
    signals = np.asarray(signals, dtype=bool)
    width = signals.shape[1]
    out = np.zeros((signals.shape[0], width), dtype=bool)
    for t in range(width):
        out[:, t] = evaluate_batch(signals[:, : t + 1], atom_index, formula)[:, 0]
    return out


def first_true(mask: np.ndarray) -> np.ndarray:
    """Index of the first True per row, -1 where none."""
    hit = mask.any(axis=1)
    return np.where(hit, mask.argmax(axis=1), -1)


# ---------------------------------------------------------------------------
# progression


def _dec(interval):
    a, b = interval
    return (max(a - 1, 0), b - 1)


@lru_cache(maxsize=1 << 18)
def progress(f: Formula, letter: frozenset) -> Formula:
    """Residual obligation on the remaining trace after reading ``letter``.

    For a trace ``w = letter . w'`` with ``w'`` non-empty, ``w`` satisfies ``f``
    at index 0 iff ``w'`` satisfies ``progress(f, letter)`` at index 0.
    """
    if isinstance(f, Const):
        return f
    if isinstance(f, Atom):
        return TRUE if f.name in letter else FALSE
    if isinstance(f, Not):
        return neg(progress(f.child, letter))
    if isinstance(f, And):
        return conj(*(progress(c, letter) for c in f.args))
    if isinstance(f, Or):
        return disj(*(progress(c, letter) for c in f.args))
    if isinstance(f, Implies):
        return implies(progress(f.left, letter), progress(f.right, letter))
    if isinstance(f, Eventually):
        iv = f.interval
        if iv is None:
            return disj(progress(f.child, letter), f)
        a, b = iv
        if a > 0:
            return Eventually(f.child, _dec(iv))
        now = progress(f.child, letter)
        return now if b == 0 else disj(now, Eventually(f.child, _dec(iv)))
    if isinstance(f, Globally):
        iv = f.interval
        if iv is None:
            return conj(progress(f.child, letter), f)
        a, b = iv
        if a > 0:
            return Globally(f.child, _dec(iv))
        now = progress(f.child, letter)
        return now if b == 0 else conj(now, Globally(f.child, _dec(iv)))
    if isinstance(f, Until):
        iv = f.interval
        right_now = progress(f.right, letter)
        left_now = progress(f.left, letter)
        if iv is None:
            return disj(right_now, conj(left_now, f))
        a, b = iv
        rest = Until(f.left, f.right, _dec(iv)) if b > 0 else FALSE
        if a > 0:
            return conj(left_now, rest)
        return disj(right_now, conj(left_now, rest))
    raise TypeError(f"unknown node {f!r}")


@lru_cache(maxsize=1 << 18)
def holds_at_end(f: Formula, letter: frozenset) -> bool:
    """Does the single-step trace ``[letter]`` satisfy ``f`` at index 0?"""
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Atom):
        return f.name in letter
    if isinstance(f, Not):
        return not holds_at_end(f.child, letter)
    if isinstance(f, And):
        return all(holds_at_end(c, letter) for c in f.args)
    if isinstance(f, Or):
        return any(holds_at_end(c, letter) for c in f.args)
    if isinstance(f, Implies):
        return (not holds_at_end(f.left, letter)) or holds_at_end(f.right, letter)
    a = 0 if f.interval is None else f.interval[0]
    if isinstance(f, Eventually):
        return a == 0 and holds_at_end(f.child, letter)
    if isinstance(f, Globally):
        return a > 0 or holds_at_end(f.child, letter)
    if isinstance(f, Until):
        return a == 0 and holds_at_end(f.right, letter)
    raise TypeError(f"unknown node {f!r}")


def monitor(trace: Trace, formula: Formula) -> Iterable[bool]:
    """Yield prefix satisfaction for t = 0, 1, ... using progression."""
    residual = formula
    for letter in trace.steps:
        yield holds_at_end(residual, letter)
        residual = progress(residual, letter)
