"""
Length-tiered quality labels and preference-pair emission.

Shorter dialogs are empirically higher quality, so each dialog gets a
textual quality-tier prefix keyed purely on its utterance count. A
preference pair renders the turn-wise dialog as `chosen` and the
single-pass dialog as `rejected` under one shared prompt; the tier prefix,
when enabled, sits on the prompt's last line so both sides inherit it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .taxonomy import Dialog, MAX_DIALOG_TURNS, render_intent_labels, render_sequence

if TYPE_CHECKING:
    from .seeder import Seed


class OutOfRange(ValueError):
    pass


class SeedMismatch(ValueError):
    pass


class QualityTier(Enum):
    Excellent = "Excellent quality dialog:"
    Good = "Good quality dialog:"
    Average = "Average quality dialog:"
    Poor = "Poor quality dialog:"
    VeryPoor = "Very poor quality dialog:"

    @property
    def prefix(self) -> str:
        return self.value


ASSISTANT_CUE = "<|assistant|>"


def quality_tier(n_utterances: int) -> QualityTier:
    """Map an utterance count to its quality tier (1-3 excellent, 4 good,
    5-10 average, 11-15 poor, 16-20 very poor)."""
    if not 1 <= n_utterances <= MAX_DIALOG_TURNS:
        raise OutOfRange(f"utterance count {n_utterances} outside [1, {MAX_DIALOG_TURNS}]")
    if n_utterances <= 3:
        return QualityTier.Excellent
    if n_utterances == 4:
        return QualityTier.Good
    if n_utterances <= 10:
        return QualityTier.Average
    if n_utterances <= 15:
        return QualityTier.Poor
    return QualityTier.VeryPoor


def inference_prefix() -> str:
    """The prefix used for every generation at inference time, regardless
    of the target length."""
    return QualityTier.Excellent.prefix


def render_dialog(dialog: Dialog, tier: QualityTier | None = None) -> str:
    blocks = [
        f"Utterance {k}:\nText: {u.text}\nIntent: {render_intent_labels(u.intents)}"
        for k, u in enumerate(dialog.utterances, 1)
    ]
    body = "\n\n".join(blocks)
    if tier is None:
        return body
    return f"{tier.prefix}\n\n{body}"


def render_seed_prompt(seed: "Seed") -> str:
    return "\n".join(
        [
            f"Entity: {seed.entity_name}",
            f"Entity type: {seed.entity_type}",
            f"Background: {seed.background_document}",
            f"Conversation starter: {seed.conversation_starter}",
            f"Intent sequence: {render_sequence(seed.intent_sequence)}",
        ]
    )


@dataclass(frozen=True)
class PreferencePair:
    prompt: str
    chosen: str
    rejected: str
    meta: Mapping

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "chosen": self.chosen,
            "rejected": self.rejected,
            "meta": dict(self.meta),
        }


def build_preference_pair(seed: "Seed", chosen: Dialog, rejected: Dialog,
                          use_lmq: bool = True) -> PreferencePair:
    """Build one pair. The tier is computed from the chosen dialog's length
    only; it is independent of which side is chosen or rejected, so both
    sides share the same prompt byte for byte."""
    if chosen.seed_id != seed.id or rejected.seed_id != seed.id:
        raise SeedMismatch(
            f"seed {seed.id} vs chosen {chosen.seed_id} / rejected {rejected.seed_id}"
        )
    lines = [render_seed_prompt(seed), ASSISTANT_CUE]
    if use_lmq:
        lines.append(quality_tier(len(chosen.utterances)).prefix)
    meta = {
        "seed_id": seed.id,
        "chosen_len": len(chosen.utterances),
        "rejected_len": len(rejected.utterances),
        "length_mismatch": len(rejected.utterances) != len(seed.intent_sequence),
    }
    return PreferencePair(
        prompt="\n".join(lines),
        chosen=render_dialog(chosen),
        rejected=render_dialog(rejected),
        meta=meta,
    )


def build_pairs(
    seeds: Sequence["Seed"],
    chosen: Iterable[Dialog],
    rejected: Iterable[Dialog],
    use_lmq: bool = True,
) -> tuple[list[PreferencePair], int]:
    """Join seeds with their chosen/rejected dialogs by seed id.

    Seeds missing either side (e.g. the single-pass output was unparseable
    and never written) are skipped and counted. Output follows seed order.
    """
    chosen_by_seed = {d.seed_id: d for d in chosen}
    rejected_by_seed = {d.seed_id: d for d in rejected}
    pairs = []
    skipped = 0
    for seed in seeds:
        c = chosen_by_seed.get(seed.id)
        r = rejected_by_seed.get(seed.id)
        if c is None or r is None:
            skipped += 1
            continue
        pairs.append(build_preference_pair(seed, c, r, use_lmq=use_lmq))
    return pairs, skipped
