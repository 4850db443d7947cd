"""
Turn-by-turn dialog generation and the single-pass variant.

The turn-wise path initializes the dialog with the seed's conversation
starter, then asks the backend for one utterance per remaining intent set,
post-processing each completion. The single-pass path asks for the whole
dialog at once; its output is parsed leniently and may come back with the
wrong number of utterances, which is recorded rather than rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from . import instructor, prompts
from .backend import ChatBackend, ChatMessage, GenerationParams
from .instructor import DegenerateOutput, InstructionCache
from .taxonomy import (
    Actor,
    Dialog,
    IntentCode,
    MAX_DIALOG_TURNS,
    Utterance,
    actor_for_turn,
    parse_intent_set,
    validate_dialog,
)

if TYPE_CHECKING:
    from .seeder import Seed


class TurnFailure(RuntimeError):
    def __init__(self, turn_index: int, message: str):
        super().__init__(f"turn {turn_index}: {message}")
        self.turn_index = turn_index


class Unparseable(RuntimeError):
    """No utterances could be recovered from a single-pass completion."""


_TERMINAL = ".!?"
_CLOSERS = "\"'”’)]}»"
_ROLE_PREFIX = re.compile(r"^\s*(?:user|agent)\s*:\s*", re.IGNORECASE)


def post_process(raw: str) -> str:
    """Clean one generated utterance.

    Truncates after the last terminal punctuation mark (., !, ?; closing
    quotes/brackets ride along), strips leading User:/Agent: keywords from
    each line (repeatedly, so stacked keywords cannot survive), and drops
    lines left empty. Idempotent on its own output.
    """
    cut = max(raw.rfind(c) for c in _TERMINAL)
    if cut < 0:
        raise DegenerateOutput(f"no terminal punctuation in {raw!r}")
    end = cut + 1
    while end < len(raw) and raw[end] in _CLOSERS:
        end += 1
    lines = []
    for line in raw[:end].splitlines():
        s = line.strip()
        while True:
            m = _ROLE_PREFIX.match(s)
            if not m:
                break
            s = s[m.end():]
        if s:
            lines.append(s)
    result = "\n".join(lines).strip()
    if not result:
        raise DegenerateOutput(f"nothing left after post-processing {raw!r}")
    return result


@dataclass(frozen=True)
class GenerationContext:
    global_instruction: str
    entity_name: str
    entity_type: str
    background: str
    history: tuple[Utterance, ...]


def render_history(history: Sequence[Utterance]) -> str:
    return "\n".join(f"{u.actor.value}: {u.text}" for u in history)


def build_turn_prompt(ctx: GenerationContext, instruction: str) -> list[ChatMessage]:
    if not instruction.strip():
        raise ValueError("instruction must be non-empty")
    parts = [
        f"Entity: {ctx.entity_name}",
        f"Entity type: {ctx.entity_type}",
        f"Background: {ctx.background}",
        "Conversation so far:",
        render_history(ctx.history),
        f"Instruction: {instruction}",
    ]
    user = "\n".join(p for p in parts if p)
    return [ChatMessage("system", ctx.global_instruction), ChatMessage("user", user)]


def generate_dialog(
    backend: ChatBackend,
    seed: "Seed",
    params: GenerationParams | None = None,
    cache: InstructionCache | None = None,
    rule_based_merge: bool = False,
    base_prompt: str = prompts.BASE_PROMPT,
    dialog_id: str | None = None,
) -> Dialog:
    """Generate one dialog turn by turn; its length always equals the
    seed's intent-sequence length. The conversation starter consumes the
    first sequence element."""
    params = params or GenerationParams()
    sequence = seed.intent_sequence
    try:
        starter = post_process(seed.conversation_starter)
    except DegenerateOutput as exc:
        raise TurnFailure(0, str(exc)) from exc
    utterances = [Utterance(Actor.User, starter, sequence[0])]
    for k in range(1, len(sequence)):
        actor = actor_for_turn(k)
        try:
            instruction = instructor.instruction_for(
                backend, cache, actor, sequence[k], params=params, rule_based=rule_based_merge
            )
            block = f"{instruction}\nTarget intents: {prompts.intent_tags(sequence[k])}"
            ctx = GenerationContext(
                global_instruction=base_prompt,
                entity_name=seed.entity_name,
                entity_type=seed.entity_type,
                background=seed.background_document,
                history=tuple(utterances),
            )
            raw = backend.complete(build_turn_prompt(ctx, block), params)
            text = post_process(raw)
        except Exception as exc:
            raise TurnFailure(k, str(exc)) from exc
        utterances.append(Utterance(actor, text, sequence[k]))
    dialog = Dialog(
        id=dialog_id or f"dlg-{seed.id}",
        seed_id=seed.id,
        utterances=tuple(utterances),
    )
    return validate_dialog(dialog)


# --- single-pass ("rejected") generation -------------------------------------

_UTT_HEADER = re.compile(r"^\s*utterance\s+\d+\s*:\s*$", re.IGNORECASE)
_TEXT_LINE = re.compile(r"^\s*text\s*:\s*(.*)$", re.IGNORECASE)
_INTENT_LINE = re.compile(r"^\s*intent(?:s)?\s*:\s*(.*)$", re.IGNORECASE)


def _parse_blocks(raw: str) -> list[tuple[str, str | None]]:
    """Strict block grammar: 'Utterance k:' / 'Text: ...' / 'Intent: ...'."""
    entries: list[dict] = []
    current: dict | None = None
    for line in raw.splitlines():
        if _UTT_HEADER.match(line):
            current = {"text": [], "intent": None, "in_text": False}
            entries.append(current)
            continue
        if current is None:
            continue
        m = _TEXT_LINE.match(line)
        if m:
            current["text"] = [m.group(1)]
            current["in_text"] = True
            continue
        m = _INTENT_LINE.match(line)
        if m:
            current["intent"] = m.group(1)
            current["in_text"] = False
            continue
        if current["in_text"]:
            current["text"].append(line)
    return [("\n".join(e["text"]), e["intent"]) for e in entries if any(t.strip() for t in e["text"])]


def _parse_intent_labels(field: str | None) -> tuple[IntentCode, ...] | None:
    if not field or not field.strip():
        return None
    try:
        return parse_intent_set(field.strip().rstrip(".,;"), separators=(",",))
    except ValueError:
        return None


def generate_dialog_single_pass(
    backend: ChatBackend,
    seed: "Seed",
    params: GenerationParams | None = None,
    dialog_id: str | None = None,
) -> Dialog:
    """Ask for the whole dialog in one completion and parse it back.

    The utterance count may differ from the intent sequence; the divergence
    is kept on the returned dialog's length_mismatch flag, not raised. Blocks
    that the strict grammar misses are recovered by splitting on blank lines.
    """
    params = params or GenerationParams()
    sequence = seed.intent_sequence
    prompt = prompts.single_pass_prompt(
        seed.entity_name, seed.entity_type, seed.background_document,
        seed.conversation_starter, sequence,
    )
    raw = backend.complete([ChatMessage("user", prompt)], params)

    blocks = _parse_blocks(raw)
    if not blocks:
        blocks = [(chunk, None) for chunk in re.split(r"\n\s*\n", raw) if chunk.strip()]

    utterances: list[Utterance] = []
    for text, intent_field in blocks:
        if len(utterances) >= MAX_DIALOG_TURNS:
            break
        try:
            clean = post_process(text)
        except DegenerateOutput:
            continue
        k = len(utterances)
        intents = _parse_intent_labels(intent_field)
        if intents is None:
            intents = sequence[k] if k < len(sequence) else (IntentCode.O,)
        utterances.append(Utterance(actor_for_turn(k), clean, intents))
    if not utterances:
        raise Unparseable(f"no utterances recovered from completion: {raw[:200]!r}")

    dialog = Dialog(
        id=dialog_id or f"sp-{seed.id}",
        seed_id=seed.id,
        utterances=tuple(utterances),
        length_mismatch=len(utterances) != len(sequence),
    )
    return validate_dialog(dialog)
