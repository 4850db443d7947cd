"""Intent-aware information-seeking dialog generation and evaluation."""

from .taxonomy import (
    Actor,
    Dialog,
    IntentCode,
    Utterance,
    actor_for_turn,
    parse_intent_code,
    parse_intent_set,
)

__version__ = "0.1.0"

__all__ = [
    "Actor",
    "Dialog",
    "IntentCode",
    "Utterance",
    "actor_for_turn",
    "parse_intent_code",
    "parse_intent_set",
    "__version__",
]
