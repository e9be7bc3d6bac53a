"""Bounded-trace equivalence and containment.

Two formulas are compared on every trace of length ``H+1`` over a fixed atom
set.  Exhaustive enumeration is used while ``(2**|atoms|)**(H+1)`` stays within
budget; beyond that callers switch to the sampled variants, whose verdicts are
labelled as such.
"""

from __future__ import annotations

import itertools
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .formula import Formula
from .semantics import evaluate_batch

MAX_ATOMS = 3
MAX_HORIZON = 6
DEFAULT_SAMPLES = 100_000


class BudgetExceeded(RuntimeError):
    pass


class Verdict(NamedTuple):
    holds: bool
    mode: str  # "exhaustive" or "sampled"
    counterexample: Optional[np.ndarray] = None


def _atoms(f: Formula, g: Formula, atoms: Optional[Iterable[str]]) -> list:
    found = f.atoms() | g.atoms()
    if atoms is None:
        return sorted(found)
    atoms = sorted(set(atoms))
    missing = found - set(atoms)
    if missing:
        raise ValueError(f"atoms {sorted(missing)} not in the declared atom set")
    return atoms


def all_traces(n_atoms: int, horizon: int) -> np.ndarray:
    """Every boolean trace of length horizon+1; shape (2**(n*(H+1)), H+1, n)."""
    bits = n_atoms * (horizon + 1)
    if bits == 0:
        return np.zeros((1, horizon + 1, 0), dtype=bool)
    codes = np.arange(1 << bits, dtype=np.int64)
    flat = ((codes[:, None] >> np.arange(bits)) & 1).astype(bool)
    return flat.reshape(-1, horizon + 1, n_atoms)


def random_traces(n_atoms: int, horizon: int, samples: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.random((samples, horizon + 1, n_atoms)) < 0.5


def _within_budget(n_atoms: int, horizon: int) -> bool:
    return n_atoms <= MAX_ATOMS and horizon <= MAX_HORIZON


def _compare(f, g, atoms, traces, relation: str):
    idx = {a: i for i, a in enumerate(atoms)}
    fv = evaluate_batch(traces, idx, f)[:, 0]
    gv = evaluate_batch(traces, idx, g)[:, 0]
    bad = (fv != gv) if relation == "eq" else (fv & ~gv)
    if bad.any():
        return False, traces[int(np.argmax(bad))]
    return True, None


def bounded_equivalent(
    f: Formula, g: Formula, atoms: Optional[Sequence[str]] = None, horizon: int = MAX_HORIZON
) -> bool:
    """True iff f and g agree on every trace of length horizon+1."""
    atoms = _atoms(f, g, atoms)
    if not _within_budget(len(atoms), horizon):
        raise BudgetExceeded(
            f"{len(atoms)} atoms at horizon {horizon} exceeds the exhaustive budget"
        )
    return _compare(f, g, atoms, all_traces(len(atoms), horizon), "eq")[0]


def bounded_contains(
    f_llm: Formula, f_true: Formula, atoms: Optional[Sequence[str]] = None, horizon: int = MAX_HORIZON
) -> bool:
    """True iff no trace of length horizon+1 satisfies ``f_llm & ~f_true``."""
    atoms = _atoms(f_llm, f_true, atoms)
    if not _within_budget(len(atoms), horizon):
        raise BudgetExceeded(
            f"{len(atoms)} atoms at horizon {horizon} exceeds the exhaustive budget"
        )
    return _compare(f_llm, f_true, atoms, all_traces(len(atoms), horizon), "imp")[0]


def bounded_equivalent_sampled(f, g, atoms=None, horizon=MAX_HORIZON, samples=DEFAULT_SAMPLES, seed=0) -> bool:
    atoms = _atoms(f, g, atoms)
    return _compare(f, g, atoms, random_traces(len(atoms), horizon, samples, seed), "eq")[0]


def bounded_contains_sampled(f_llm, f_true, atoms=None, horizon=MAX_HORIZON, samples=DEFAULT_SAMPLES, seed=0) -> bool:
    atoms = _atoms(f_llm, f_true, atoms)
    return _compare(f_llm, f_true, atoms, random_traces(len(atoms), horizon, samples, seed), "imp")[0]


def check(
    f: Formula,
    g: Formula,
    relation: str = "eq",
    atoms: Optional[Sequence[str]] = None,
    horizon: int = MAX_HORIZON,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> Verdict:
    """Equivalence (``"eq"``) or containment f => g (``"imp"``), exhaustive when
    affordable and sampled otherwise."""
    atoms = _atoms(f, g, atoms)
    if _within_budget(len(atoms), horizon):
        traces, mode = all_traces(len(atoms), horizon), "exhaustive"
    else:
        traces, mode = random_traces(len(atoms), horizon, samples, seed), "sampled"
    ok, cex = _compare(f, g, atoms, traces, relation)
    return Verdict(ok, mode, cex)


def enumerate_formulas(atoms: Sequence[str], depth: int, intervals=(None,)) -> Iterable[Formula]:
    """All formulas up to ``depth`` over ``atoms`` (binary nodes take 2 args).

    Used by the exhaustive cross-check tests.
    """
    from .formula import And, Atom, Eventually, Globally, Implies, Not, Or, Until

    levels = [[Atom(a) for a in atoms]]
    seen = list(levels[0])
    for _ in range(depth - 1):
        new = []
        for x in seen:
            new.append(Not(x))
            for iv in intervals:
                new.append(Eventually(x, iv))
                new.append(Globally(x, iv))
        for x, y in itertools.product(levels[-1], seen):
            new.append(And((x, y)))
            new.append(Or((x, y)))
            new.append(Implies(x, y))
            for iv in intervals:
                new.append(Until(x, y, iv))
        levels.append(new)
        seen = seen + new
    return seen
