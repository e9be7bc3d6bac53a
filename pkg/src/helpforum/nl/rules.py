"""Deterministic pattern-based translation of task sentences into STL.

Each pattern recognizes one sentence shape and builds the formula with the
task constructors.  Phrases name atoms in one of three ways: a coordinate
``(x, y)`` becomes ``at_x_y``, a vocabulary keyword maps to its atom, and a
labelled place such as "Aisle A" becomes ``aisle_A``.  Anything else is
snake-cased when it is short enough to be a region name.
"""

from __future__ import annotations

import re
from typing import Callable, List, Optional, Sequence, Tuple

from ..stl import Atom, Eventually, Formula, Globally, Implies, Not, Until, conj, disj
from ..tasks import PnpTask, conjunctive_visits, pnp_formula, sequenced
from ..world import GridWorld, at_atom, nearest_free_cell


class Untranslatable(ValueError):
    pass


# keyword pattern -> atom; checked in order, so more specific entries come first
DEFAULT_VOCABULARY: Tuple[Tuple[str, str], ...] = (
    (r"\breturn\w*\b.*\bscanner\b", "return_scanner"),
    (r"\b(pick\w*\s+up|collect|grab|get)\b.*\bscanner\b", "pickup_scanner"),
    (r"\bscan(s|ning)?\b", "scan"),
    (r"\bcharg(er|ing)\b", "charger"),
    (r"\bfront office\b", "front_office"),
    (r"\bloading dock\b", "loading_dock"),
)

_LABELLED = re.compile(r"\b(aisle|rack|zone|dock|station|shelf|bay|room)\s+([A-Za-z0-9]+)\b", re.I)
_COORD = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")
_FILLER = {
    "the", "a", "an", "to", "go", "goes", "visit", "reach", "navigate", "travel", "move", "drive", "head",
    "eventually", "then", "finally", "first", "and", "at", "in", "into", "of", "from", "robot", "must",
    "should", "you", "your", "back", "area", "region", "location", "some", "point", "time", "later",
    "make", "sure", "get", "be", "is", "pick", "up", "item", "an", "it", "enter", "entering", "visiting",
    "reaching", "also", "both", "all", "three", "two", "this", "that", "stop", "by", "arrive",
}
_ID = re.compile(r"^[a-z][a-z0-9_]*$")
_NUM_WORDS = {"one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6}


def _clean(text: str) -> str:
    t = text.strip()
    t = re.sub(r"[.!]+$", "", t)
    return re.sub(r"\s+", " ", t)


def phrase_atom(phrase: str, vocabulary: Sequence[Tuple[str, str]] = DEFAULT_VOCABULARY) -> str:
    """Atom named by a phrase; raises :class:`Untranslatable` when unclear."""
    m = _COORD.search(phrase)
    if m:
        return at_atom((int(m.group(1)), int(m.group(2))))
    for pat, atom in vocabulary:
        if re.search(pat, phrase, re.I):
            return atom
    m = _LABELLED.search(phrase)
    if m:
        return f"{m.group(1).lower()}_{m.group(2)}"
    words = [w for w in re.findall(r"[A-Za-z0-9_]+", phrase.lower()) if w not in _FILLER]
    if 1 <= len(words) <= 3:
        name = "_".join(words)
        if _ID.match(name) and name not in ("true", "false"):
            return name
    raise Untranslatable(f"cannot name a region in {phrase!r}")


def _split_list(text: str) -> List[str]:
    # commas inside a coordinate "(x, y)" do not separate items
    parts = re.split(r"\s*,(?![^()]*\))\s*(?:and\s+)?|\s+and\s+", text)
    return [p for p in (q.strip() for q in parts) if p]


def _number(tok: str) -> int:
    tok = tok.lower()
    return _NUM_WORDS[tok] if tok in _NUM_WORDS else int(tok)


_VERB = r"(?:visit|reach|go to|navigate to|travel to|head to|drive to|pick up an item from|pick up items from|stop by|get to)"


class RulesTranslator:
    """Pattern catalog; ``translate`` is a pure function of the text."""

    def __init__(self, vocabulary: Sequence[Tuple[str, str]] = DEFAULT_VOCABULARY, world: Optional[GridWorld] = None, reserved=()):
        self.vocabulary = tuple(vocabulary)
        self.world = world
        self.reserved = set(reserved)
        self.patterns: List[Tuple[re.Pattern, Callable]] = [
            (re.compile(r"^(?P<main>.+?),?\s+while (?:always )?avoiding (?P<bad>.+)$", re.I), self._while_avoiding),
            (re.compile(r"^pick up (?:the |a |an )?(?:\w+ )?(?:\w+ )?at (?P<p>\(\s*\d+\s*,\s*\d+\s*\)),? (?:and |then )?(?:drop|place|put|deliver) it(?: off)? at (?P<q>\(\s*\d+\s*,\s*\d+\s*\)|the closest free drop zone|the nearest free cell)$", re.I), self._pnp),
            (re.compile(r"^(?:if|whenever) (?:you )?(?:visit|reach|enter|are at|are in) (?P<a>.+?),? (?:then )?(?:you must |eventually |must )*(?:also )?(?:visit|reach|go to) (?P<b>.+?)(?: afterwards| later| eventually)?$", re.I), self._response),
            (re.compile(r"^(?:first\s+)?(?P<a>.+?),?\s+then\s+(?P<b>.+?)(?:,?\s+(?:and\s+)?finally\s+(?P<c>.+))?$", re.I), self._sequence),
            (re.compile(r"^(?:wait|stay|remain|dwell) (?:at|in) (?P<place>.+?) for (?P<k>\d+|one|two|three|four|five|six) (?:time ?)?(?:steps?|timesteps?|minutes?)$", re.I), self._dwell),
            (re.compile(r"^(?:do not|don't|never) (?:visit|enter|go to) (?P<bad>.+?) (?:until|before) (?:you )?(?:reach|visit|have visited|visiting|reaching)? ?(?P<good>.+)$", re.I), self._until_avoid),
            (re.compile(r"^(?:always avoid|avoid|never (?:visit|enter|go to)|always stay (?:out of|away from)|stay away from|always not be (?:at|in)) (?P<bad>.+)$", re.I), self._avoid),
            (re.compile(r"^(?:always|globally) (?:stay|remain|be) (?:at|in|inside|within) (?P<good>.+)$", re.I), self._always),
            (re.compile(rf"^(?:eventually |at some point )?{_VERB} (?:either )?(?P<a>.+?) or (?P<b>.+)$", re.I), self._either),
            (re.compile(rf"^(?:(?:eventually|at some point) (?:{_VERB} )?|{_VERB} )(?P<items>.+?)(?: in any order)?$", re.I), self._visits),
        ]

    # -- pattern handlers ---------------------------------------------------

    def _atom(self, phrase: str) -> str:
        return phrase_atom(phrase, self.vocabulary)

    def _while_avoiding(self, m) -> Formula:
        main = self.translate(m.group("main"))
        bad = [Globally(Not(Atom(self._atom(b)))) for b in _split_list(m.group("bad"))]
        return conj(main, *bad)

    def _pnp(self, m) -> Formula:
        p = tuple(int(v) for v in _COORD.search(m.group("p")).groups())
        q_text = m.group("q")
        qm = _COORD.search(q_text)
        if qm:
            q = tuple(int(v) for v in qm.groups())
        else:
            if self.world is None:
                raise Untranslatable("the drop zone needs a world map")
            q = nearest_free_cell(self.world, p, exclude=self.reserved | {p})
        return pnp_formula(PnpTask("nl", p, q))

    def _sequence(self, m) -> Formula:
        stages = [m.group("a"), m.group("b")] + ([m.group("c")] if m.group("c") else [])
        return sequenced([self._atom(s) for s in stages])

    def _dwell(self, m) -> Formula:
        k = _number(m.group("k"))
        a = Atom(self._atom(m.group("place")))
        if k <= 1:
            return Eventually(a)
        return Eventually(conj(a, *(Eventually(a, (i, i)) for i in range(1, k))))

    def _until_avoid(self, m) -> Formula:
        return Until(Not(Atom(self._atom(m.group("bad")))), Atom(self._atom(m.group("good"))))

    def _avoid(self, m) -> Formula:
        return conj(*(Globally(Not(Atom(self._atom(b)))) for b in _split_list(m.group("bad"))))

    def _always(self, m) -> Formula:
        return Globally(Atom(self._atom(m.group("good"))))

    def _response(self, m) -> Formula:
        return Globally(Implies(Atom(self._atom(m.group("a"))), Eventually(Atom(self._atom(m.group("b"))))))

    def _either(self, m) -> Formula:
        return Eventually(disj(*(Atom(self._atom(x)) for x in (m.group("a"), m.group("b")))))

    def _visits(self, m) -> Formula:
        items = _split_list(m.group("items"))
        return conjunctive_visits([self._atom(i) for i in items])

    # -- entry point --------------------------------------------------------------

    def translate(self, text: str) -> Formula:
        t = _clean(text)
        if not t:
            raise Untranslatable("empty request")
        for pat, handler in self.patterns:
            m = pat.match(t)
            if m is None:
                continue
            try:
                return handler(m)
            except Untranslatable:
                continue
        raise Untranslatable(f"no pattern matches {text!r}")
