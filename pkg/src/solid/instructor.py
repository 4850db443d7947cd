"""
Per-intent prompt instructions and multi-intent instruction merging.

Single-intent utterances use one of 24 hand-written instructions (12 intents
x 2 actors). Utterances carrying several intents get a merged instruction
produced by the backend, cached under the canonicalized intent set: writing
one instruction per combination by hand stops scaling once sets of 2+ out of
12 codes are in play.
"""

from __future__ import annotations

import json
import os
import threading
from typing import Iterable, Sequence

from . import prompts
from .backend import ChatBackend, ChatMessage, GenerationParams
from .taxonomy import Actor, IntentCode, canonical_intents


class DegenerateOutput(RuntimeError):
    """The backend returned text the pipeline cannot use."""


AGENT_INSTRUCTIONS: dict[IntentCode, str] = {
    IntentCode.CQ: "Reply with one follow-up response in conversation style.",
    IntentCode.FD: "Reply with further details in conversation style.",
    IntentCode.GG: "Continue the conversation by expressing gratitude for the user's questions.",
    IntentCode.PA: "Provide a potential solution or answer in conversation style.",
    IntentCode.IR: "Ask the user to provide relevant information needed for their previous question.",
    IntentCode.OQ: "Formulate an original question posed by an agent.",
    IntentCode.FQ: "Formulate a follow-up question from an agent, seeking further clarification or information.",
    IntentCode.RQ: "Now you are talking from the point of view of a third participant in the conversation. Repeat Question:",
    IntentCode.PF: "Express satisfaction and appreciation for the conversation.",
    IntentCode.NF: "Convey dissatisfaction for the previous response.",
    IntentCode.JK: "Reply with gibberish information. It can contain emojis.",
    IntentCode.O: "Reply with a system error. Return N/A",
}

USER_INSTRUCTIONS: dict[IntentCode, str] = {
    IntentCode.CQ: "Reply with one question asking for clarification in conversation style.",
    IntentCode.FD: "Reply with more details in conversation style.",
    IntentCode.GG: "Continue the conversation by expressing gratitude for the agent's help.",
    IntentCode.PA: "Provide a potential solution or answer in conversation style.",
    IntentCode.IR: "Reply with relevant information.",
    IntentCode.OQ: "Formulate the first question posed by a user that initiates a QA dialog.",
    IntentCode.FQ: "Formulate a follow-up question from a user, seeking further clarification or information.",
    IntentCode.RQ: "Now you are talking from the point of view of a third participant in the conversation. Repeat Question:",
    IntentCode.PF: "Express satisfaction and appreciation for a working solution.",
    IntentCode.NF: "Convey dissatisfaction for the previous response.",
    IntentCode.JK: "Reply with gibberish information. It can contain emojis.",
    IntentCode.O: "Reply with a system error. Return N/A",
}

INSTRUCTION_TABLE: dict[tuple[Actor, IntentCode], str] = {
    **{(Actor.Agent, code): text for code, text in AGENT_INSTRUCTIONS.items()},
    **{(Actor.User, code): text for code, text in USER_INSTRUCTIONS.items()},
}
assert len(INSTRUCTION_TABLE) == 24


def lookup_instruction(actor: Actor, intent: IntentCode) -> str:
    return INSTRUCTION_TABLE[(actor, intent)]


def rule_based_merge(actor: Actor, intents: Sequence[IntentCode]) -> str:
    """Ablation joiner: individual instructions glued with \" and \"."""
    parts = [lookup_instruction(actor, c).rstrip(".") for c in canonical_intents(intents)]
    return " and ".join(parts) + "."


def merge_instructions(
    backend: ChatBackend,
    actor: Actor,
    intents: Iterable[IntentCode],
    params: GenerationParams | None = None,
) -> str:
    intents = canonical_intents(intents)
    if len(intents) < 2:
        raise ValueError("merge_instructions needs at least two intents")
    instructions = [lookup_instruction(actor, c) for c in intents]
    raw = backend.complete(
        [ChatMessage("user", prompts.merge_prompt(instructions))],
        params or GenerationParams(),
    )
    merged = " ".join(raw.split())
    if not merged:
        raise DegenerateOutput(f"empty merged instruction for {actor.value} {intents}")
    return merged


class InstructionCache:
    """Merged-instruction cache keyed by (actor, canonical intent set).

    Concurrent readers are lock-free on hits; misses on the same key are
    single-flight (exactly one backend call). If a sidecar path is given,
    entries persist as JSON lines {actor, intents, instruction} so reruns
    stay backend-free.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = os.fspath(path) if path is not None else None
        self._data: dict[tuple[Actor, tuple[IntentCode, ...]], str] = {}
        self._master = threading.Lock()
        self._key_locks: dict[tuple, threading.Lock] = {}
        if self.path and os.path.exists(self.path):
            self._load()

    def __len__(self) -> int:
        return len(self._data)

    @staticmethod
    def _key(actor: Actor, intents: Iterable[IntentCode]):
        return (actor, canonical_intents(intents))

    def _load(self) -> None:
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                key = (Actor(obj["actor"]), canonical_intents(IntentCode[c] for c in obj["intents"]))
                self._data[key] = obj["instruction"]

    def _persist(self, key, instruction: str) -> None:
        if not self.path:
            return
        actor, intents = key
        row = {"actor": actor.value, "intents": [c.name for c in intents], "instruction": instruction}
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    def peek(self, actor: Actor, intents: Iterable[IntentCode]) -> str | None:
        return self._data.get(self._key(actor, intents))

    def get_or_create(self, actor: Actor, intents: Iterable[IntentCode], factory) -> str:
        key = self._key(actor, intents)
        if len(key[1]) < 2:
            raise ValueError("single-intent instructions are never cached; the table is authoritative")
        hit = self._data.get(key)
        if hit is not None:
            return hit
        with self._master:
            hit = self._data.get(key)
            if hit is not None:
                return hit
            lock = self._key_locks.setdefault(key, threading.Lock())
        with lock:
            hit = self._data.get(key)
            if hit is not None:
                return hit
            value = factory()
            with self._master:
                self._data[key] = value
                self._key_locks.pop(key, None)
            self._persist(key, value)
            return value


def instruction_for(
    backend: ChatBackend,
    cache: InstructionCache | None,
    actor: Actor,
    intents: Iterable[IntentCode],
    params: GenerationParams | None = None,
    rule_based: bool = False,
) -> str:
    """Resolve the instruction for one utterance's intent set."""
    intents = canonical_intents(intents)
    if len(intents) == 1:
        return lookup_instruction(actor, intents[0])
    if rule_based:
        return rule_based_merge(actor, intents)
    if cache is None:
        return merge_instructions(backend, actor, intents, params)
    return cache.get_or_create(actor, intents, lambda: merge_instructions(backend, actor, intents, params))
