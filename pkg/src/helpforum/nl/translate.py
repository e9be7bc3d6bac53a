"""Sentence to STL translation with grammar-checked output.

Two backends share one contract: whatever they return is parseable and a
member of the STL grammar restricted to the formula's own predicates.

* ``rules``: the deterministic pattern catalog in :mod:`.rules`
* ``external``: a text-generation service reached over HTTP, prompted with
  the predicate list, the grammar and a few worked examples
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import List, Optional, Sequence, Tuple

from ..grammar import export_gbnf, member, stl_grammar
from ..stl import Formula, STLSyntaxError, parse, to_text
from .rules import DEFAULT_VOCABULARY, RulesTranslator, Untranslatable
from .service import ServiceClient, ServiceError

DEFAULT_MAX_TIME = 30


class InvalidFormula(ValueError):
    """Output that does not parse or falls outside the grammar."""


class ExhaustedRetries(RuntimeError):
    def __init__(self, msg: str, attempts: Sequence[Tuple[str, str]]):
        super().__init__(msg)
        self.attempts = list(attempts)


def load_pairs(name: str) -> List[dict]:
    """Packaged ``{nl, stl}`` JSONL data by file name."""
    text = resources.files("helpforum.nl").joinpath("data", name).read_text(encoding="utf-8")
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def load_prompt(name: str) -> str:
    return resources.files("helpforum.nl").joinpath("prompts", name).read_text(encoding="utf-8")


def _max_bound(f: Formula) -> int:
    hi = 0
    for node in f.walk():
        iv = getattr(node, "interval", None)
        if iv is not None and iv[1] != float("inf"):
            hi = max(hi, int(iv[1]))
    return hi


def validate(f: Formula, predicates: Optional[Sequence[str]] = None, max_time: Optional[int] = DEFAULT_MAX_TIME) -> str:
    """Canonical text of ``f`` after checking it against the grammar.

    Predicates default to the formula's own atoms.  Raises
    :class:`InvalidFormula` on a miss.
    """
    atoms = sorted(f.atoms())
    if predicates is not None:
        unknown = set(atoms) - set(predicates)
        if unknown:
            raise InvalidFormula(f"unknown predicates {sorted(unknown)}")
    vocab = list(predicates) if predicates is not None else atoms
    if not vocab:
        raise InvalidFormula("formula has no predicates")
    text = to_text(f)
    if max_time is not None and _max_bound(f) > max_time:
        raise InvalidFormula(f"interval bound beyond {max_time}")
    if not member(stl_grammar(vocab, max_time), text):
        raise InvalidFormula(f"{text!r} is outside the grammar")
    return text


@dataclass
class TranslatorConfig:
    backend: str = "rules"
    predicates: Optional[Sequence[str]] = None
    few_shot: Optional[List[dict]] = None
    prompt: Optional[str] = None
    use_grammar: bool = True
    supports_grammar: bool = True
    max_retries: int = 3
    endpoint: Optional[str] = None
    max_time: Optional[int] = DEFAULT_MAX_TIME
    vocabulary: Sequence[Tuple[str, str]] = DEFAULT_VOCABULARY
    transport: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.backend not in ("rules", "external"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.max_retries < 1:
            raise ValueError("max_retries must be at least 1")


def build_prompt(text: str, config: TranslatorConfig) -> str:
    template = config.prompt or load_prompt("stl.txt")
    shots = config.few_shot if config.few_shot is not None else load_pairs("few_shot.jsonl")
    examples = "\n".join(f"Request: {s['nl']}\nFormula: {s['stl']}\n" for s in shots)
    preds = list(config.predicates) if config.predicates else ["<any snake_case region name>"]
    if config.predicates:
        grammar_text = export_gbnf(stl_grammar(config.predicates, config.max_time))
    else:
        grammar_text = "(free predicate names, operators as listed above)"
    return template.format(predicates=", ".join(preds), grammar=grammar_text, examples=examples, request=text.strip())


def _first_formula_line(reply: str) -> str:
    for line in reply.strip().splitlines():
        line = re.sub(r"^\s*(formula|stl)\s*:\s*", "", line, flags=re.I).strip().strip("`")
        if line:
            return line
    return ""


def _external(text: str, config: TranslatorConfig) -> Formula:
    client = ServiceClient(config.endpoint) if config.endpoint else ServiceClient.from_env()
    prompt = build_prompt(text, config)
    gbnf = None
    if config.use_grammar and config.supports_grammar and config.predicates:
        gbnf = export_gbnf(stl_grammar(config.predicates or None, config.max_time))
    attempts: List[Tuple[str, str]] = []
    for _ in range(config.max_retries):
        try:
            reply = client.complete(prompt, gbnf, config.transport)
        except ServiceError as exc:
            attempts.append(("", str(exc)))
            continue
        candidate = _first_formula_line(reply)
        try:
            f = parse(candidate)
            validate(f, config.predicates, config.max_time)
            return f
        except (STLSyntaxError, InvalidFormula) as exc:
            attempts.append((candidate, str(exc)))
    raise ExhaustedRetries(f"no valid formula after {config.max_retries} attempts", attempts)


def translate(text: str, config: Optional[TranslatorConfig] = None) -> Formula:
    """Translate one sentence; the result always passes :func:`validate`."""
    config = config or TranslatorConfig()
    if config.backend == "rules":
        f = RulesTranslator(config.vocabulary).translate(text)
        try:
            validate(f, config.predicates, config.max_time)
        except InvalidFormula as exc:
            raise Untranslatable(str(exc)) from exc
        return f
    return _external(text, config)
