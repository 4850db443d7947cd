"""
Intent taxonomy and dialog data model.

Twelve utterance-level intent codes for information-seeking conversations,
the User/Agent actor convention, and the canonical JSON-lines serialization
every other module reads and writes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence


class UnknownIntent(ValueError):
    """Token does not name any intent code or label."""


class EmptySet(ValueError):
    """An intent-set field parsed to nothing."""


class InvalidDialog(ValueError):
    """A dialog violates a structural invariant."""


class ParseError(ValueError):
    """A corpus file could not be parsed; message carries the locus."""


MAX_DIALOG_TURNS = 20


class IntentCode(Enum):
    """Utterance-level intent codes, in canonical (declaration) order."""

    OQ = "original question"
    RQ = "repeat question"
    CQ = "clarifying question"
    FD = "further details"
    FQ = "follow up question"
    IR = "information request"
    PA = "potential answer"
    PF = "positive feedback"
    NF = "negative feedback"
    GG = "greetings/gratitude"
    JK = "junk"
    O = "others"

    @property
    def label(self) -> str:
        return self.value

    @property
    def order(self) -> int:
        return _CODE_ORDER[self]


# One-line descriptions, used by few-shot classification prompts.
INTENT_DESCRIPTIONS: dict[IntentCode, str] = {
    IntentCode.OQ: "The first question from the user to initiate the dialog.",
    IntentCode.RQ: "Other users repeat a previous question.",
    IntentCode.CQ: "User or agent asks for clarifications.",
    IntentCode.FD: "User or agent provides more details.",
    IntentCode.FQ: "User asks for follow up questions about relevant issues.",
    IntentCode.IR: "Agent asks for information from users.",
    IntentCode.PA: "A potential answer or solution provided by agents.",
    IntentCode.PF: "User provides positive feedback for working solutions.",
    IntentCode.NF: "User provides negative feedback for useless solutions.",
    IntentCode.GG: "Greetings or expressing gratitude.",
    IntentCode.JK: "No useful information in the utterance.",
    IntentCode.O: "Utterances cannot be categorized using other classes.",
}

ALL_INTENTS: tuple[IntentCode, ...] = tuple(IntentCode)
_CODE_ORDER = {code: i for i, code in enumerate(ALL_INTENTS)}
_BY_CODE = {code.name.lower(): code for code in ALL_INTENTS}
_BY_LABEL = {code.label.lower(): code for code in ALL_INTENTS}


class Actor(Enum):
    User = "User"
    Agent = "Agent"


def actor_for_turn(index: int) -> Actor:
    """Turn 0 is the User's; actors strictly alternate from there."""
    if index < 0:
        raise ValueError(f"turn index must be non-negative, got {index}")
    return Actor.User if index % 2 == 0 else Actor.Agent


def parse_intent_code(token: str) -> IntentCode:
    """Parse a 2-letter code or a full label, case-insensitively."""
    key = token.strip().lower()
    if not key:
        raise UnknownIntent("empty intent token")
    code = _BY_CODE.get(key) or _BY_LABEL.get(key)
    if code is None:
        raise UnknownIntent(f"unknown intent token: {token!r}")
    return code


def canonical_intents(intents: Iterable[IntentCode]) -> tuple[IntentCode, ...]:
    """Deduplicate and order an intent collection in taxonomy order."""
    ordered = sorted(set(intents), key=lambda c: c.order)
    if not ordered:
        raise EmptySet("intent set must be non-empty")
    return tuple(ordered)


def parse_intent_set(field_text: str, separators: Sequence[str] = (" ", "+")) -> tuple[IntentCode, ...]:
    """Split a tag field on the configured separators, parse each token, dedupe.

    A " " separator stands for any whitespace run. The defaults match
    space-separated code strings with "+"-joined compounds ("PA PF", "OQ+IR").
    Pass separators=(",",) for comma-joined label lists
    ("potential answer, information request"), where labels contain spaces.
    """
    if not field_text.strip():
        raise EmptySet("empty intent field")
    pattern = "|".join(r"\s" if sep == " " else re.escape(sep) for sep in separators)
    tokens = re.split(f"(?:{pattern})+", field_text.strip())
    parsed = [parse_intent_code(t) for t in tokens if t.strip()]
    if not parsed:
        raise EmptySet(f"no intents parsed from {field_text!r}")
    return canonical_intents(parsed)


def render_intent_codes(intents: Iterable[IntentCode]) -> str:
    """Codes joined by "+" in canonical order, e.g. "PA+IR"."""
    return "+".join(c.name for c in canonical_intents(intents))


def render_intent_labels(intents: Iterable[IntentCode]) -> str:
    """Full lowercase labels joined by ", " in canonical order."""
    return ", ".join(c.label for c in canonical_intents(intents))


def render_sequence(sequence: Sequence[Iterable[IntentCode]]) -> str:
    """Canonical sequence text: sets joined by "; ", codes by "+"."""
    return "; ".join(render_intent_codes(s) for s in sequence)


def parse_sequence(text: str) -> tuple[tuple[IntentCode, ...], ...]:
    """Parse the canonical `"OQ; PA+IR; FD"` sequence text."""
    parts = [p for p in (chunk.strip() for chunk in text.split(";")) if p]
    if not parts:
        raise EmptySet(f"empty intent sequence: {text!r}")
    return tuple(parse_intent_set(p) for p in parts)


@dataclass(frozen=True)
class Utterance:
    actor: Actor
    text: str
    intents: tuple[IntentCode, ...]
    # Actor recorded in the source corpus when import normalization changed
    # it; never serialized to the canonical format.
    source_actor: str | None = field(default=None, compare=False)

    def validate(self) -> None:
        if not self.text or self.text != self.text.strip():
            raise InvalidDialog(f"utterance text must be non-empty and trimmed: {self.text!r}")
        lowered = self.text.lower()
        if lowered.startswith("user:") or lowered.startswith("agent:"):
            raise InvalidDialog(f"utterance text begins with a role keyword: {self.text!r}")
        if not self.intents:
            raise InvalidDialog("utterance has an empty intent set")
        if list(self.intents) != sorted(set(self.intents), key=lambda c: c.order):
            raise InvalidDialog(f"intent set not in canonical order: {self.intents!r}")


@dataclass(frozen=True)
class Dialog:
    id: str
    seed_id: str | None
    utterances: tuple[Utterance, ...]
    # Set by single-pass generation when the utterance count diverged from
    # the requested intent sequence; in-memory only.
    length_mismatch: bool = field(default=False, compare=False)

    def validate(self) -> None:
        n = len(self.utterances)
        if not 1 <= n <= MAX_DIALOG_TURNS:
            raise InvalidDialog(f"dialog {self.id}: {n} utterances outside [1, {MAX_DIALOG_TURNS}]")
        for i, utt in enumerate(self.utterances):
            utt.validate()
            expected = actor_for_turn(i)
            if utt.actor is not expected:
                raise InvalidDialog(
                    f"dialog {self.id}: turn {i} actor {utt.actor.value}, expected {expected.value}"
                )

    def intent_sequence(self) -> tuple[tuple[IntentCode, ...], ...]:
        return tuple(u.intents for u in self.utterances)

    def text(self) -> str:
        """Concatenated utterance texts (retrieval document form)."""
        return " ".join(u.text for u in self.utterances)


def validate_dialog(dialog: Dialog) -> Dialog:
    dialog.validate()
    return dialog


# --- canonical JSON-lines serialization ------------------------------------
# One object per line: {"id", "seed_id", "utterances": [{actor, text, intents}]}
# with intents as a list of 2-letter codes. Field names are normative.


def dialog_to_dict(dialog: Dialog) -> dict:
    return {
        "id": dialog.id,
        "seed_id": dialog.seed_id,
        "utterances": [
            {
                "actor": u.actor.value,
                "text": u.text,
                "intents": [c.name for c in u.intents],
            }
            for u in dialog.utterances
        ],
    }


def dialog_from_dict(obj: dict) -> Dialog:
    try:
        utterances = tuple(
            Utterance(
                actor=Actor(u["actor"]),
                text=u["text"],
                intents=canonical_intents(parse_intent_code(c) for c in u["intents"]),
            )
            for u in obj["utterances"]
        )
        return Dialog(id=str(obj["id"]), seed_id=obj.get("seed_id"), utterances=utterances)
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad dialog record {obj.get('id', '?')!r}: {exc}") from exc


def write_dialogs(path, dialogs: Iterable[Dialog]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for d in dialogs:
            fh.write(json.dumps(dialog_to_dict(d), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_dialogs(path) -> list[Dialog]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
            out.append(dialog_from_dict(obj))
    return out


# --- MSDialog-style import ---------------------------------------------------
# Threads occasionally carry consecutive same-actor turns; those are merged
# (texts joined, intent sets unioned) and actors are then forced onto the
# alternation grid, keeping the source actor on the in-memory utterance.


def _merge_consecutive(turns: list[tuple[str, str, tuple[IntentCode, ...]]]):
    merged: list[list] = []
    for actor, text, intents in turns:
        if merged and merged[-1][0] == actor:
            merged[-1][1] = f"{merged[-1][1]} {text}".strip()
            merged[-1][2] = canonical_intents(tuple(merged[-1][2]) + intents)
        else:
            merged.append([actor, text, intents])
    return merged


def dialogs_from_msdialog(path) -> tuple[list[Dialog], int]:
    """Import an MSDialog-format JSON map as normalized dialogs.

    Returns (dialogs, dropped) where dropped counts threads longer than
    MAX_DIALOG_TURNS after merging.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ParseError(f"{path}: expected a top-level id → record map")
    dialogs: list[Dialog] = []
    dropped = 0
    for rec_id, record in data.items():
        try:
            raw_turns = []
            for u in record["utterances"]:
                text = " ".join(str(u.get("utterance", "")).split())
                if not text:
                    continue
                intents = parse_intent_set(u["tags"])
                raw_turns.append((str(u.get("actor_type", "")), text, intents))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: record {rec_id!r}: {exc}") from exc
        merged = _merge_consecutive(raw_turns)
        if not merged:
            continue
        if len(merged) > MAX_DIALOG_TURNS:
            dropped += 1
            continue
        utterances = tuple(
            Utterance(
                actor=actor_for_turn(i),
                text=text,
                intents=intents,
                source_actor=src if src != actor_for_turn(i).value else None,
            )
            for i, (src, text, intents) in enumerate(merged)
        )
        dialogs.append(validate_dialog(Dialog(id=str(rec_id), seed_id=None, utterances=utterances)))
    return dialogs, dropped
