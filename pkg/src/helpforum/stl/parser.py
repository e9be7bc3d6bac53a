"""Text syntax for STL formulas.

The surface language is the one derived by the STL grammar shipped with the
package::

    F(go_to_rack_A) & G(~go_to_charger)
    (~b) U_[0,4] a
    F_[1,1](at_1_4)

Binary operators are parsed with the precedence ``U`` > ``&`` > ``|`` > ``->``
(``U`` and ``->`` associate to the right).  The printer parenthesizes every
binary operand that is itself binary, so output never depends on precedence
and ``parse(to_text(f)) == f`` holds structurally.

When the grammar's whitespace is empty, operators and predicate names can run
together (``Fgo_to_charger``).  Passing the predicate vocabulary to
:func:`parse` resolves these cases the same way the grammar does.
"""

from __future__ import annotations

import re
from typing import Iterable, List, Optional, Sequence

from .formula import (
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
)

WS = " \t\n"
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INTERVAL = re.compile(r"_\[(\d+),(\d+)\]")

_BINARY_PREC = {"->": 1, "|": 2, "&": 3, "U": 4}


class STLSyntaxError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        self.text = text
        self.pos = pos
        super().__init__(f"{message} at position {pos}: {text[:pos]!r} <here> {text[pos:]!r}")


class _Parser:
    def __init__(self, text: str, predicates: Optional[Sequence[str]]):
        self.text = text
        self.pos = 0
        self.predicates = (
            sorted(set(predicates), key=len, reverse=True) if predicates is not None else None
        )

    def error(self, msg: str):
        raise STLSyntaxError(msg, self.text, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in WS:
            self.pos += 1

    def peek(self, s: str) -> bool:
        return self.text.startswith(s, self.pos)

    def interval(self):
        m = _INTERVAL.match(self.text, self.pos)
        if not m:
            return None
        a, b = int(m.group(1)), int(m.group(2))
        if a > b:
            self.error(f"interval lower bound {a} exceeds upper bound {b}")
        self.pos = m.end()
        return (a, b)

    # -- terms -------------------------------------------------------------

    def predicate(self) -> Optional[str]:
        if self.predicates is not None:
            for name in self.predicates:
                if self.text.startswith(name, self.pos):
                    self.pos += len(name)
                    return name
            return None
        m = _IDENT.match(self.text, self.pos)
        if not m:
            return None
        word = m.group(0)
        if word in ("F", "G", "U") or _INTERVAL.match(self.text, self.pos + 1) and word[0] in "FGU" and word[1:2] == "_":
            return None
        self.pos = m.end()
        return word

    def unary_op(self):
        if self.pos < len(self.text) and self.text[self.pos] in "FG":
            start = self.pos
            op = self.text[self.pos]
            self.pos += 1
            interval = self.interval()
            if self.predicates is None and interval is None:
                # without a vocabulary, "Fa" is the atom Fa (but "F_[0,2]a" is not)
                nxt = self.text[self.pos : self.pos + 1]
                if nxt and (nxt.isalnum() or nxt == "_"):
                    self.pos = start
                    return None
            return op, interval
        return None

    def atomic(self) -> Optional[Formula]:
        start = self.pos
        name = self.predicate()
        if name is not None:
            if name in ("true", "false") and self.predicates is None:
                return Const(name == "true")
            return Atom(name)
        if self.peek("("):
            self.pos += 1
            self.skip_ws()
            name = self.predicate()
            if name is not None:
                self.skip_ws()
                if self.peek(")"):
                    self.pos += 1
                    return Atom(name)
        self.pos = start
        return None

    def term(self) -> Formula:
        if self.pos >= len(self.text):
            self.error("unexpected end of input")
        if self.peek("~"):
            self.pos += 1
            self.skip_ws()
            return Not(_ungroup(self.term()))
        start = self.pos
        if self.predicates is not None:
            # predicate names win over operator letters (longest match)
            atom = self.atomic()
            if atom is not None:
                return atom
        op = self.unary_op()
        if op is not None:
            kind, interval = op
            self.skip_ws()
            if self.peek("("):
                self.pos += 1
                self.skip_ws()
                inner = self.expr()
                self.skip_ws()
                if not self.peek(")"):
                    self.error("expected ')'")
                self.pos += 1
            else:
                inner = self.atomic()
                if inner is None:
                    self.error(f"operator {kind} needs an operand")
            cls = Eventually if kind == "F" else Globally
            return cls(inner, interval)
        self.pos = start
        if self.peek("("):
            self.pos += 1
            self.skip_ws()
            inner = self.expr()
            self.skip_ws()
            if not self.peek(")"):
                self.error("expected ')'")
            self.pos += 1
            return _Group(inner)
        atom = self.atomic()
        if atom is None:
            self.error("expected a formula")
        return atom

    # -- binary chains -----------------------------------------------------

    def binary_op(self):
        save = self.pos
        self.skip_ws()
        for sym in ("->", "&", "|"):
            if self.peek(sym):
                self.pos += len(sym)
                self.skip_ws()
                return sym, None
        if self.peek("U"):
            self.pos += 1
            interval = self.interval()
            self.skip_ws()
            return "U", interval
        self.pos = save
        return None

    def expr(self) -> Formula:
        terms: List[Formula] = [self.term()]
        ops: List[tuple] = []
        while True:
            op = self.binary_op()
            if op is None:
                break
            ops.append(op)
            terms.append(self.term())
        return _ungroup(_build(terms, ops))


class _Group(Formula):
    """Parenthesized sub-expression; blocks flattening across parentheses."""

    __slots__ = ("inner",)

    def __init__(self, inner: Formula):
        self.inner = inner


def _ungroup(f: Formula) -> Formula:
    return f.inner if isinstance(f, _Group) else f


def _build(terms: List[Formula], ops: List[tuple]) -> Formula:
    if not ops:
        return terms[0]
    # split at the loosest operator; right-assoc ops split at the first one
    lowest = min(_BINARY_PREC[o[0]] for o in ops)
    idxs = [i for i, o in enumerate(ops) if _BINARY_PREC[o[0]] == lowest]
    sym = ops[idxs[0]][0]
    if sym in ("&", "|"):
        parts = []
        prev = 0
        for i in idxs:
            parts.append(_ungroup(_build(terms[prev : i + 1], ops[prev:i])))
            prev = i + 1
        parts.append(_ungroup(_build(terms[prev:], ops[prev:])))
        return And(tuple(parts)) if sym == "&" else Or(tuple(parts))
    i = idxs[0]
    left = _ungroup(_build(terms[: i + 1], ops[:i]))
    right = _ungroup(_build(terms[i + 1 :], ops[i + 1 :]))
    if sym == "->":
        return Implies(left, right)
    return Until(left, right, ops[i][1])


def parse(text: str, predicates: Optional[Iterable[str]] = None) -> Formula:
    """Parse STL text into a :class:`Formula`.

    ``predicates`` optionally fixes the predicate vocabulary, which is needed
    to split inputs such as ``Fgo_to_charger`` exactly as the grammar does.
    """
    p = _Parser(text, list(predicates) if predicates is not None else None)
    p.skip_ws()
    f = p.expr()
    p.skip_ws()
    if p.pos != len(text):
        p.error("unexpected trailing input")
    return f


# ---------------------------------------------------------------------------
# printing

_BINARY = (And, Or, Implies, Until)


def _suffix(interval) -> str:
    return "" if interval is None else f"_[{interval[0]},{interval[1]}]"


def _operand(f: Formula) -> str:
    s = to_text(f)
    return f"({s})" if isinstance(f, _BINARY) else s


def to_text(f: Formula) -> str:
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Not):
        return "~" + _operand(f.child)
    if isinstance(f, And):
        return " & ".join(_operand(a) for a in f.args)
    if isinstance(f, Or):
        return " | ".join(_operand(a) for a in f.args)
    if isinstance(f, Implies):
        return f"{_operand(f.left)} -> {_operand(f.right)}"
    if isinstance(f, Until):
        return f"{_operand(f.left)} U{_suffix(f.interval)} {_operand(f.right)}"
    if isinstance(f, (Eventually, Globally)):
        op = "F" if isinstance(f, Eventually) else "G"
        return f"{op}{_suffix(f.interval)}({to_text(f.child)})"
    raise TypeError(f"not a formula: {f!r}")
