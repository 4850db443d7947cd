"""Shared builders for the test suite."""

from __future__ import annotations

from solid.backend import ChatBackend
from solid.seeder import Seed
from solid.taxonomy import Dialog, IntentCode, Utterance, actor_for_turn, canonical_intents, parse_sequence


class ScriptedBackend(ChatBackend):
    """Returns canned completions in order; Exception entries raise instead.
    The last entry repeats once the script runs out."""

    def __init__(self, replies, max_in_flight=8):
        super().__init__(max_in_flight)
        self.replies = list(replies)
        self.calls = 0

    def identity(self):
        return "scripted"

    def _complete(self, messages, params):
        reply = self.replies[min(self.calls, len(self.replies) - 1)]
        self.calls += 1
        if isinstance(reply, Exception):
            raise reply
        return reply

    def _embed(self, texts):
        raise NotImplementedError


def make_dialog(dialog_id: str, turn_codes, seed_id=None, texts=None) -> Dialog:
    """Valid dialog from per-turn intent code lists, e.g. [["OQ"], ["PA", "IR"]]."""
    utterances = []
    for i, codes in enumerate(turn_codes):
        intents = canonical_intents(IntentCode[c] for c in codes)
        text = texts[i] if texts else f"Turn {i} says {' '.join(c.lower() for c in codes)}."
        utterances.append(Utterance(actor=actor_for_turn(i), text=text, intents=intents))
    d = Dialog(id=dialog_id, seed_id=seed_id, utterances=tuple(utterances))
    d.validate()
    return d


def make_seed(seed_id="s1", sequence="OQ; PA; PF", name="Abel Hale", etype="Person") -> Seed:
    return Seed(
        id=seed_id,
        entity_type=etype,
        attributes=("Occupation", "Era"),
        entity_name=name,
        background_document=f"{name} was a {etype.lower()} of note.",
        conversation_starter=f"MARK_oq What can you say about {name}?",
        intent_sequence=parse_sequence(sequence),
    )
