"""Signal temporal logic: formulas, text syntax, bounded semantics."""

from .equivalence import (
    BudgetExceeded,
    Verdict,
    bounded_contains,
    bounded_contains_sampled,
    bounded_equivalent,
    bounded_equivalent_sampled,
    check,
)
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
    reach,
)
from .parser import STLSyntaxError, parse, to_text
from .semantics import (
    Trace,
    UnboundAtomError,
    evaluate_batch,
    holds_at_end,
    monitor,
    prefix_satisfaction,
    progress,
    satisfies,
    time_to_first_satisfaction,
)

__all__ = [name for name in dir() if not name.startswith("_")]
