"""GBNF-style grammars: parsing, Earley recognition, prefix viability,
random derivations and export.

The notation is the one used by llama.cpp grammars::

    root ::= ws expr ws
    ws   ::= [ \\t\\n]*          # comments run to end of line
    op   ::= "&" | "|" | ("->" | "U")

Supported: quoted literals, bracketed character classes (ranges and literal
sets, optional ``^`` negation), grouping, alternation and the ``*``, ``+``,
``?`` repetition suffixes.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union


class GrammarError(ValueError):
    pass


class GrammarSyntaxError(GrammarError):
    def __init__(self, message: str, line: int, col: int):
        self.line = line
        self.col = col
        super().__init__(f"{message} (line {line}, column {col})")


class UndefinedNonterminal(GrammarError):
    pass


class DepthExhausted(GrammarError):
    pass


# ---------------------------------------------------------------------------
# structure


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class Lit:
    text: str


@dataclass(frozen=True)
class CharClass:
    ranges: Tuple[Tuple[str, str], ...]
    negated: bool = False

    def match(self, c: str) -> bool:
        hit = any(lo <= c <= hi for lo, hi in self.ranges)
        return hit != self.negated


@dataclass(frozen=True)
class Group:
    options: Tuple["Seq", ...]


@dataclass(frozen=True)
class Repeat:
    item: "Symbol"
    min: int
    max: Optional[int]


Symbol = Union[Ref, Lit, CharClass, Group, Repeat]
Seq = Tuple[Symbol, ...]


@dataclass(frozen=True)
class Grammar:
    rules: Dict[str, Tuple[Seq, ...]]
    root: str = "root"

    def __post_init__(self):
        object.__setattr__(self, "rules", dict(self.rules))
        _validate(self)

    def __eq__(self, other):
        return isinstance(other, Grammar) and self.root == other.root and self.rules == other.rules

    def __hash__(self):
        return hash((self.root, tuple(sorted(self.rules))))

    @property
    def nonterminals(self) -> List[str]:
        return list(self.rules)

    @cached_property
    def _compiled(self) -> "_Compiled":
        return _Compiled(self)

    def member(self, s: str) -> bool:
        return self._compiled.recognize(s, complete=True)

    def viable_prefix(self, s: str) -> bool:
        return self._compiled.recognize(s, complete=False)

    def sample(self, rng_seed=None, max_depth: int = 12) -> str:
        return sample(self, rng_seed, max_depth)

    def to_text(self) -> str:
        return export_gbnf(self)


def _refs(sym: Symbol) -> Iterable[str]:
    if isinstance(sym, Ref):
        yield sym.name
    elif isinstance(sym, Group):
        for seq in sym.options:
            for s in seq:
                yield from _refs(s)
    elif isinstance(sym, Repeat):
        yield from _refs(sym.item)


def _validate(g: Grammar) -> None:
    if g.root not in g.rules:
        raise UndefinedNonterminal(f"root nonterminal {g.root!r} is not defined")
    for name, alts in g.rules.items():
        for seq in alts:
            for sym in seq:
                for ref in _refs(sym):
                    if ref not in g.rules:
                        raise UndefinedNonterminal(f"{ref!r} used in rule {name!r} is not defined")
    reached = {g.root}
    stack = [g.root]
    while stack:
        for seq in g.rules[stack.pop()]:
            for sym in seq:
                for ref in _refs(sym):
                    if ref not in reached:
                        reached.add(ref)
                        stack.append(ref)
    unreachable = set(g.rules) - reached
    if unreachable:
        raise GrammarError(f"unreachable nonterminals: {sorted(unreachable)}")
    heights = _heights(g)
    barren = [n for n in g.rules if heights[n] == _INF]
    if barren:
        raise GrammarError(f"nonterminals derive no string: {sorted(barren)}")


# ---------------------------------------------------------------------------
# text -> Grammar

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<define>::=)
  | (?P<name>[A-Za-z0-9_-]+)
  | (?P<lit>"(?:[^"\\\n]|\\.)*")
  | (?P<cls>\[(?:[^\]\\\n]|\\.)*\])
  | (?P<punct>[|()*+?])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"', "[": "[", "]": "]", "-": "-", "^": "^"}


def _unescape(body: str, line: int, col: int) -> List[str]:
    chars = []
    i = 0
    while i < len(body):
        c = body[i]
        if c == "\\":
            if i + 1 >= len(body):
                raise GrammarSyntaxError("dangling escape", line, col + i)
            e = body[i + 1]
            if e == "x":
                try:
                    chars.append(("esc", chr(int(body[i + 2 : i + 4], 16))))
                except ValueError:
                    raise GrammarSyntaxError("bad \\x escape", line, col + i) from None
                i += 4
                continue
            if e not in _ESCAPES:
                raise GrammarSyntaxError(f"unknown escape \\{e}", line, col + i)
            chars.append(("esc", _ESCAPES[e]))
            i += 2
        else:
            chars.append(("raw", c))
            i += 1
    return chars


def _char_class(tok: str, line: int, col: int) -> CharClass:
    body = tok[1:-1]
    negated = body.startswith("^")
    if negated:
        body = body[1:]
    chars = _unescape(body, line, col)
    ranges = []
    i = 0
    while i < len(chars):
        lo = chars[i][1]
        if i + 2 < len(chars) and chars[i + 1] == ("raw", "-"):
            hi = chars[i + 2][1]
            if hi < lo:
                raise GrammarSyntaxError(f"empty range {lo}-{hi}", line, col)
            ranges.append((lo, hi))
            i += 3
        else:
            ranges.append((lo, lo))
            i += 1
    if not ranges:
        raise GrammarSyntaxError("empty character class", line, col)
    return CharClass(tuple(ranges), negated)


def _tokenize(text: str):
    out = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise GrammarSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            out.append((kind, m.group(0), line, col))
        pos = m.end()
    out.append(("eof", "", line, pos - line_start + 1))
    return out


class _GrammarParser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k=0):
        return self.toks[self.i + k]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def at_rule_start(self) -> bool:
        return self.peek()[0] == "name" and self.peek(1)[0] == "define"

    def fail(self, msg):
        _, _, line, col = self.peek()
        raise GrammarSyntaxError(msg, line, col)

    def rules(self) -> Dict[str, Tuple[Seq, ...]]:
        rules: Dict[str, Tuple[Seq, ...]] = {}
        while self.peek()[0] != "eof":
            if not self.at_rule_start():
                self.fail("expected 'name ::='")
            name = self.take()[1]
            self.take()
            if name in rules:
                self.fail(f"rule {name!r} defined twice")
            rules[name] = self.alternatives(top=True)
        if not rules:
            raise GrammarSyntaxError("empty grammar", 1, 1)
        return rules

    def alternatives(self, top: bool) -> Tuple[Seq, ...]:
        alts = [self.sequence(top)]
        while self.peek()[1] == "|" and self.peek()[0] == "punct":
            self.take()
            alts.append(self.sequence(top))
        return tuple(alts)

    def sequence(self, top: bool) -> Seq:
        items: List[Symbol] = []
        while True:
            kind, val, line, col = self.peek()
            if kind == "eof" or (kind == "punct" and val in "|)") or (top and self.at_rule_start()):
                break
            if kind == "define":
                self.fail("unexpected '::='")
            self.take()
            if kind == "name":
                sym: Symbol = Ref(val)
            elif kind == "lit":
                sym = Lit("".join(c for _, c in _unescape(val[1:-1], line, col + 1)))
            elif kind == "cls":
                sym = _char_class(val, line, col)
            elif val == "(":
                opts = self.alternatives(top=False)
                if self.peek()[1] != ")":
                    self.fail("expected ')'")
                self.take()
                sym = Group(opts)
            else:
                raise GrammarSyntaxError(f"unexpected {val!r}", line, col)
            while self.peek()[0] == "punct" and self.peek()[1] in "*+?":
                op = self.take()[1]
                lo, hi = {"*": (0, None), "+": (1, None), "?": (0, 1)}[op]
                sym = Repeat(sym, lo, hi)
            items.append(sym)
        return tuple(items)


def parse_grammar(text: str, root: str = "root") -> Grammar:
    """Parse GBNF-style grammar text."""
    return Grammar(_GrammarParser(text).rules(), root)


# ---------------------------------------------------------------------------
# Grammar -> text


def _lit_text(s: str) -> str:
    out = []
    for c in s:
        if c in '"\\':
            out.append("\\" + c)
        elif c == "\n":
            out.append("\\n")
        elif c == "\t":
            out.append("\\t")
        elif c == "\r":
            out.append("\\r")
        else:
            out.append(c)
    return '"' + "".join(out) + '"'


def _cls_char(c: str) -> str:
    return {"\n": "\\n", "\t": "\\t", "\r": "\\r", "\\": "\\\\", "]": "\\]", "-": "\\-", "^": "\\^", "[": "\\["}.get(c, c)


def _sym_text(sym: Symbol) -> str:
    if isinstance(sym, Ref):
        return sym.name
    if isinstance(sym, Lit):
        return _lit_text(sym.text)
    if isinstance(sym, CharClass):
        body = "".join(
            _cls_char(lo) if lo == hi else f"{_cls_char(lo)}-{_cls_char(hi)}" for lo, hi in sym.ranges
        )
        return "[" + ("^" if sym.negated else "") + body + "]"
    if isinstance(sym, Group):
        return "(" + " | ".join(_seq_text(s) for s in sym.options) + ")"
    if isinstance(sym, Repeat):
        op = {(0, None): "*", (1, None): "+", (0, 1): "?"}.get((sym.min, sym.max))
        if op is None:
            raise GrammarError(f"repetition {{{sym.min},{sym.max}}} has no GBNF suffix")
        inner = _sym_text(sym.item)
        if isinstance(sym.item, Repeat):
            inner = f"({inner})"
        return inner + op
    raise TypeError(sym)


def _seq_text(seq: Seq) -> str:
    return " ".join(_sym_text(s) for s in seq) if seq else '""'


def export_gbnf(g: Grammar) -> str:
    names = [g.root] + [n for n in g.rules if n != g.root]
    return "\n".join(f"{n} ::= " + " | ".join(_seq_text(s) for s in g.rules[n]) for n in names) + "\n"


# ---------------------------------------------------------------------------
# compiled form + Earley recognition

_INF = float("inf")


def _heights(g: Grammar) -> Dict[str, float]:
    """Minimum derivation depth per nonterminal (inf if it derives nothing)."""
    h = {n: _INF for n in g.rules}
    changed = True
    while changed:
        changed = False
        for n, alts in g.rules.items():
            best = 1 + min(_seq_height(s, h) for s in alts)
            if best < h[n]:
                h[n] = best
                changed = True
    return h


def _sym_height(sym: Symbol, h) -> float:
    if isinstance(sym, Ref):
        return h[sym.name]
    if isinstance(sym, (Lit, CharClass)):
        return 0
    if isinstance(sym, Group):
        return min(_seq_height(s, h) for s in sym.options)
    if isinstance(sym, Repeat):
        return 0 if sym.min == 0 else _sym_height(sym.item, h)
    raise TypeError(sym)


def _seq_height(seq: Seq, h) -> float:
    return max((_sym_height(s, h) for s in seq), default=0)


class _Compiled:
    """Plain BNF over single-character terminals.

    Nonterminals are ints; a terminal is either a one-character string or a
    :class:`CharClass`.
    """

    def __init__(self, g: Grammar):
        self.names: List[str] = []
        self.index: Dict[str, int] = {}
        self.prods: List[Tuple[int, tuple]] = []
        for name in g.rules:
            self._nt(name)
        for name, alts in g.rules.items():
            for seq in alts:
                self._add(self.index[name], self._seq(seq))
        self.start = self._nt("<start>")
        self._add(self.start, (self.index[g.root],))
        self.by_lhs: List[List[int]] = [[] for _ in self.names]
        for pid, (lhs, _) in enumerate(self.prods):
            self.by_lhs[lhs].append(pid)
        self.nullable = self._nullable()

    def _nt(self, name: str) -> int:
        if name not in self.index:
            self.index[name] = len(self.names)
            self.names.append(name)
        return self.index[name]

    def _fresh(self, hint: str) -> int:
        return self._nt(f"<{hint}{len(self.names)}>")

    def _add(self, lhs: int, rhs: tuple):
        self.prods.append((lhs, rhs))

    def _seq(self, seq: Seq) -> tuple:
        out: list = []
        for sym in seq:
            out.extend(self._sym(sym))
        return tuple(out)

    def _sym(self, sym: Symbol) -> list:
        if isinstance(sym, Ref):
            return [self.index[sym.name]]
        if isinstance(sym, Lit):
            return list(sym.text)
        if isinstance(sym, CharClass):
            return [sym]
        if isinstance(sym, Group):
            nt = self._fresh("group")
            for s in sym.options:
                self._add(nt, self._seq(s))
            return [nt]
        if isinstance(sym, Repeat):
            item = tuple(self._sym(sym.item))
            out = [x for _ in range(sym.min) for x in item]
            if sym.max is None:
                star = self._fresh("star")
                self._add(star, ())
                self._add(star, (star,) + item)
                out.append(star)
            else:
                for _ in range(sym.max - sym.min):
                    opt = self._fresh("opt")
                    self._add(opt, ())
                    self._add(opt, item)
                    out.append(opt)
            return out
        raise TypeError(sym)

    def _nullable(self) -> set:
        null = set()
        changed = True
        while changed:
            changed = False
            for lhs, rhs in self.prods:
                if lhs not in null and all(isinstance(x, int) and x in null for x in rhs):
                    null.add(lhs)
                    changed = True
        return null

    def recognize(self, s: str, complete: bool) -> bool:
        prods, by_lhs, nullable = self.prods, self.by_lhs, self.nullable
        n = len(s)
        current: set = set()
        agenda: list = []
        waits: List[Dict[int, list]] = []
        for pid in by_lhs[self.start]:
            item = (pid, 0, 0)
            current.add(item)
            agenda.append(item)
        for i in range(n + 1):
            waiting: Dict[int, list] = {}
            nxt: set = set()
            ch = s[i] if i < n else None
            while agenda:
                item = agenda.pop()
                pid, dot, origin = item
                rhs = prods[pid][1]
                if dot == len(rhs):
                    lhs = prods[pid][0]
                    parents = (waiting if origin == i else waits[origin]).get(lhs, ())
                    for ppid, pdot, porigin in list(parents):
                        new = (ppid, pdot + 1, porigin)
                        if new not in current:
                            current.add(new)
                            agenda.append(new)
                    continue
                sym = rhs[dot]
                if isinstance(sym, int):
                    waiting.setdefault(sym, []).append(item)
                    for cpid in by_lhs[sym]:
                        new = (cpid, 0, i)
                        if new not in current:
                            current.add(new)
                            agenda.append(new)
                    if sym in nullable:
                        new = (pid, dot + 1, origin)
                        if new not in current:
                            current.add(new)
                            agenda.append(new)
                elif ch is not None:
                    if sym == ch if isinstance(sym, str) else sym.match(ch):
                        nxt.add((pid, dot + 1, origin))
            waits.append(waiting)
            if i == n:
                if not complete:
                    return bool(current)
                return any(
                    prods[pid][0] == self.start and dot == len(prods[pid][1]) and origin == 0
                    for pid, dot, origin in current
                )
            if not nxt:
                return False
            current = set(nxt)
            agenda = list(nxt)
        return False  # pragma: no cover


def member(g: Grammar, s: str) -> bool:
    """Is ``s`` derivable from the grammar's root?"""
    return g.member(s)


def viable_prefix(g: Grammar, s: str) -> bool:
    """Can ``s`` be extended to a string in the language?"""
    return g.viable_prefix(s)


def filter_continuations(g: Grammar, prefix: str, candidates: Iterable[str]) -> List[str]:
    """Candidate tokens that keep ``prefix + token`` a viable prefix.

    This is the per-step mask used for grammar-constrained decoding.
    """
    return [c for c in candidates if g.viable_prefix(prefix + c)]


# ---------------------------------------------------------------------------
# sampling

_PRINTABLE = [chr(c) for c in range(32, 127)]


def sample(g: Grammar, rng_seed=None, max_depth: int = 12, p_repeat: float = 0.5) -> str:
    """Random derivation from the root with nesting depth at most ``max_depth``."""
    rng = random.Random(rng_seed)
    h = _heights(g)
    if h[g.root] > max_depth:
        raise DepthExhausted(f"no derivation of {g.root!r} within depth {max_depth}")
    out: List[str] = []
    _emit(Ref(g.root), max_depth, g, h, rng, out, p_repeat)
    return "".join(out)


def _emit(sym: Symbol, depth, g, h, rng, out, p):
    if isinstance(sym, Lit):
        out.append(sym.text)
    elif isinstance(sym, CharClass):
        if sym.negated:
            pool = [c for c in _PRINTABLE if sym.match(c)]
        else:
            pool = [chr(c) for lo, hi in sym.ranges for c in range(ord(lo), ord(hi) + 1)]
        out.append(rng.choice(pool))
    elif isinstance(sym, Ref):
        alts = [s for s in g.rules[sym.name] if _seq_height(s, h) <= depth - 1]
        if not alts:
            raise DepthExhausted(f"no derivation of {sym.name!r} within depth {depth}")
        for s in rng.choice(alts):
            _emit(s, depth - 1, g, h, rng, out, p)
    elif isinstance(sym, Group):
        opts = [s for s in sym.options if _seq_height(s, h) <= depth]
        for s in rng.choice(opts):
            _emit(s, depth, g, h, rng, out, p)
    elif isinstance(sym, Repeat):
        count = sym.min
        fits = _sym_height(sym.item, h) <= depth
        while fits and (sym.max is None or count < sym.max) and rng.random() < p:
            count += 1
        for _ in range(count):
            _emit(sym.item, depth, g, h, rng, out, p)
    else:
        raise TypeError(sym)


# ---------------------------------------------------------------------------
# the STL grammar

def appendix_grammar_text() -> str:
    return resources.files("helpforum.data").joinpath("stl.gbnf").read_text(encoding="utf-8")


def with_predicates(g: Grammar, predicates: Sequence[str], rule: str = "predicate-name") -> Grammar:
    """Replace the predicate vocabulary rule with the given names."""
    if not predicates:
        raise GrammarError("predicate vocabulary is empty")
    rules = dict(g.rules)
    rules[rule] = tuple((Lit(p),) for p in predicates)
    return Grammar(rules, g.root)


def stl_grammar(predicates: Optional[Sequence[str]] = None, max_time: Optional[int] = None) -> Grammar:
    """The STL grammar, optionally with a scenario vocabulary and interval suffixes.

    With ``max_time`` set, ``F``, ``G`` and ``U`` accept an optional ``_[a,b]``
    suffix with ``0 <= a <= b <= max_time``; the ordering constraint is built
    into the rules so every derivable interval is well formed.
    """
    g = parse_grammar(appendix_grammar_text())
    if predicates is not None:
        g = with_predicates(g, list(predicates))
    if max_time is None:
        return g
    rules = dict(g.rules)
    interval = Repeat(Ref("interval"), 0, 1)
    rules["unary-op"] = ((Group(((Lit("G"),), (Lit("F"),))), interval),)
    rules["binary-op"] = (
        (
            Ref("ws"),
            Group(((Lit("&"),), (Lit("|"),), (Lit("->"),), (Lit("U"), interval))),
            Ref("ws"),
        ),
    )
    rules["interval"] = ((Lit("_["), Group(tuple((Lit(f"{a},"), Ref(f"from-{a}")) for a in range(max_time + 1))), Lit("]")),)
    for a in range(max_time + 1):
        alts = [(Lit(str(a)),)]
        if a < max_time:
            alts.append((Ref(f"from-{a + 1}"),))
        rules[f"from-{a}"] = tuple(alts)
    return Grammar(rules, g.root)
