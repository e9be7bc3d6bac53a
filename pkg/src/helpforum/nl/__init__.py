"""Natural-language task requests to STL."""

from .evaluate import EvalReport, ItemResult, evaluate, score
from .rules import DEFAULT_VOCABULARY, RulesTranslator, Untranslatable, phrase_atom
from .service import ENDPOINT_ENV, ServiceClient, ServiceError, call_service
from .translate import (
    ExhaustedRetries,
    InvalidFormula,
    TranslatorConfig,
    build_prompt,
    load_pairs,
    load_prompt,
    translate,
    validate,
)

__all__ = [
    "DEFAULT_VOCABULARY",
    "ENDPOINT_ENV",
    "EvalReport",
    "ExhaustedRetries",
    "InvalidFormula",
    "ItemResult",
    "RulesTranslator",
    "ServiceClient",
    "ServiceError",
    "TranslatorConfig",
    "Untranslatable",
    "build_prompt",
    "call_service",
    "evaluate",
    "load_pairs",
    "load_prompt",
    "phrase_atom",
    "score",
    "translate",
    "validate",
]
