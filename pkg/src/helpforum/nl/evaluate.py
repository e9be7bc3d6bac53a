"""Corpus evaluation of a translator: validity, equivalence and containment."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence

from ..stl import Formula, check, parse, to_text
from .rules import Untranslatable
from .translate import ExhaustedRetries, InvalidFormula, TranslatorConfig, translate, validate

EVAL_HORIZON = 6


@dataclass
class ItemResult:
    nl: str
    truth: str
    output: Optional[str]
    valid: bool
    equivalent: bool
    contained: bool
    mode: str = ""
    error: str = ""


@dataclass
class EvalReport:
    items: List[ItemResult] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.items)

    def _pct(self, key: str) -> float:
        return 100.0 * sum(getattr(i, key) for i in self.items) / self.n if self.items else 0.0

    @property
    def validity(self) -> float:
        return self._pct("valid")

    @property
    def accuracy(self) -> float:
        return self._pct("equivalent")

    @property
    def containment(self) -> float:
        return self._pct("contained")

    def summary(self) -> dict:
        return {
            "n": self.n,
            "valid": sum(i.valid for i in self.items),
            "equivalent": sum(i.equivalent for i in self.items),
            "contained": sum(i.contained for i in self.items),
            "validity_pct": self.validity,
            "accuracy_pct": self.accuracy,
            "containment_pct": self.containment,
        }

    def to_json(self) -> str:
        return json.dumps({"summary": self.summary(), "items": [asdict(i) for i in self.items]}, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = list(ItemResult.__dataclass_fields__)
        w = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        w.writeheader()
        for i in self.items:
            w.writerow(asdict(i))
        return buf.getvalue()


def score(truth: Formula, output: Formula, horizon: int = EVAL_HORIZON, seed: int = 0):
    """(equivalent, contained, mode) of ``output`` against ``truth``.

    Containment means every trace satisfying the output satisfies the truth.
    Atoms of both sides are pooled, so an output over a wrong predicate fails
    on the traces that separate them.
    """
    eq = check(output, truth, "eq", horizon=horizon, seed=seed)
    if eq.holds:
        return True, True, eq.mode
    imp = check(output, truth, "imp", horizon=horizon, seed=seed)
    return False, imp.holds, imp.mode


def evaluate(
    pairs: Sequence[dict],
    config: Optional[TranslatorConfig] = None,
    translator: Optional[Callable[[str], Formula]] = None,
    horizon: int = EVAL_HORIZON,
) -> EvalReport:
    """Translate every ``{nl, stl}`` pair and score it.

    ``translator`` overrides the configured backend (handy for stubs).
    """
    config = config or TranslatorConfig()
    fn = translator or (lambda text: translate(text, config))
    report = EvalReport()
    for k, pair in enumerate(pairs):
        truth = parse(pair["stl"])
        try:
            out = fn(pair["nl"])
            validate(out, None, config.max_time)
        except (Untranslatable, ExhaustedRetries, InvalidFormula) as exc:
            report.items.append(ItemResult(pair["nl"], to_text(truth), None, False, False, False, error=str(exc)))
            continue
        eq, cont, mode = score(truth, out, horizon, seed=k)
        report.items.append(ItemResult(pair["nl"], to_text(truth), to_text(out), True, eq, cont, mode))
    return report
