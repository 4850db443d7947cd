"""
Prompt templates for every generation task in the pipeline.

Each template opens with a distinctive task phrase; the offline mock backend
recognizes tasks by these sentinels, so edit them in lockstep with
backend.MockBackend. Intent-tag lines use machine-readable `<<INTENT:xx>>`
tokens (lowercase 2-letter codes) that double as the mock's fidelity markers.
"""

from __future__ import annotations

from typing import Iterable

from .taxonomy import INTENT_DESCRIPTIONS, IntentCode, render_intent_labels

# Base instruction for turn-wise generation. The opening sentence is fixed;
# the completion of the paragraph is configuration, not contract.
BASE_PROMPT = (
    "I will give you an entity, its type, a background document, a conversation "
    "history that ends in a turn awaiting a reply, and an instruction. Write only "
    "the next utterance of the conversation, following the instruction. Do not "
    "write more than one turn and do not prefix the utterance with a speaker name."
)

ENTITY_TYPES_SENTINEL = "Provide a list of"
ENTITY_TYPES_PROMPT = "Provide a list of {n} entity types. Write one entity type per line."

ENTITY_ATTRIBUTES_PROMPT = (
    "List {n} entity attributes associated with the entity type '{entity_type}' "
    "(for example 'Occupation'). Write one attribute per line."
)
ENTITY_ATTRIBUTES_SENTINEL = "entity attributes associated with"

# Name generation needs a one-shot example block to behave; lines longer than
# 20 characters are filtered out downstream.
ENTITY_NAMES_PROMPT = (
    "Generate {n} names of entities of type '{entity_type}' starting with the "
    "letter '{letter}'. Write one name per line, nothing else. Examples of "
    "well-formed entity names:\n{examples}"
)
ENTITY_NAMES_SENTINEL = "names of entities of type"
ENTITY_NAME_EXAMPLES = (
    "Albert Einstein",
    "Marie Curie",
    "Mount Fuji",
    "Silk Road",
    "Blue Whale",
    "Jazz",
    "Photosynthesis",
    "Amazon River",
    "Chess",
    "Aurora Borealis",
)

BACKGROUND_PROMPT = (
    "Write a background document about the {entity_type} '{entity_name}'. "
    "Touch on attributes such as {attributes} where they fit. "
    "Write a single informative paragraph."
)
BACKGROUND_SENTINEL = "Write a background document about"

STARTER_PROMPT = (
    "Create the first utterance of an information-seeking conversation grounded "
    "in the entity below. {instruction}\n"
    "Entity: {entity_name}\n"
    "Entity type: {entity_type}\n"
    "Background: {background}\n"
    "Target intents: {intent_tags}"
)
STARTER_SENTINEL = "Create the first utterance of an information-seeking conversation"

MERGE_PROMPT = (
    "Merge the following prompt instructions into one cohesive instruction for a "
    "single conversational reply that satisfies all of them. Answer with the "
    "merged instruction only, as one paragraph.\n{instructions}"
)
MERGE_SENTINEL = "Merge the following prompt instructions"

SINGLE_PASS_PROMPT = (
    "Generate an entire information-seeking conversation about the entity below "
    "in one go. Produce exactly one utterance per intent line, alternating "
    "between User and Agent turns, starting from the conversation starter. "
    "Format every turn as three lines: 'Utterance k:', 'Text: ...', "
    "'Intent: ...'.\n"
    "Entity: {entity_name}\n"
    "Entity type: {entity_type}\n"
    "Background: {background}\n"
    "Conversation starter: {starter}\n"
    "Intent lines:\n{intent_lines}"
)
SINGLE_PASS_SENTINEL = "Generate an entire information-seeking conversation"

FEWSHOT_HEADER = (
    "You label utterances from information-seeking conversations with intent "
    "codes. The codes are:\n{code_lines}\n"
    "Here are labeled examples:\n"
)
FEWSHOT_TARGET_SENTINEL = "Now classify this utterance:"
FEWSHOT_FOOTER = "Answer with the matching intent codes, comma-separated."


def intent_tag(code: IntentCode) -> str:
    return f"<<INTENT:{code.name.lower()}>>"


def intent_tags(intents: Iterable[IntentCode]) -> str:
    return " ".join(intent_tag(c) for c in intents)


def entity_types_prompt(n: int) -> str:
    return ENTITY_TYPES_PROMPT.format(n=n)


def entity_attributes_prompt(entity_type: str, n: int) -> str:
    return ENTITY_ATTRIBUTES_PROMPT.format(n=n, entity_type=entity_type)


def entity_names_prompt(entity_type: str, letter: str, n: int) -> str:
    return ENTITY_NAMES_PROMPT.format(
        n=n, entity_type=entity_type, letter=letter, examples="\n".join(ENTITY_NAME_EXAMPLES)
    )


def background_prompt(entity_name: str, entity_type: str,
                      attributes: Iterable[str] = ()) -> str:
    listed = ", ".join(attributes) or "origin, purpose, reputation"
    return BACKGROUND_PROMPT.format(
        entity_name=entity_name, entity_type=entity_type, attributes=listed)


def starter_prompt(entity_name: str, entity_type: str, background: str,
                   instruction: str, intents: Iterable[IntentCode]) -> str:
    return STARTER_PROMPT.format(
        entity_name=entity_name,
        entity_type=entity_type,
        background=background,
        instruction=instruction,
        intent_tags=intent_tags(intents),
    )


def merge_prompt(instructions: Iterable[str]) -> str:
    numbered = "\n".join(f"{i + 1}. {ins}" for i, ins in enumerate(instructions))
    return MERGE_PROMPT.format(instructions=numbered)


def single_pass_prompt(entity_name: str, entity_type: str, background: str,
                       starter: str, sequence) -> str:
    lines = []
    for k, intents in enumerate(sequence, 1):
        lines.append(f"Utterance {k} intents: {render_intent_labels(intents)} {intent_tags(intents)}")
    return SINGLE_PASS_PROMPT.format(
        entity_name=entity_name,
        entity_type=entity_type,
        background=background,
        starter=starter,
        intent_lines="\n".join(lines),
    )


def fewshot_prompt(shots: Iterable[tuple[str, Iterable[IntentCode]]], target_text: str) -> str:
    code_lines = "\n".join(
        f"{c.name} ({c.label}): {INTENT_DESCRIPTIONS[c]}" for c in IntentCode
    )
    parts = [FEWSHOT_HEADER.format(code_lines=code_lines)]
    for text, intents in shots:
        parts.append(f"Utterance: {text}\nIntents: {', '.join(c.name for c in intents)}\n")
    parts.append(f"{FEWSHOT_TARGET_SENTINEL}\nText: {target_text}\n{FEWSHOT_FOOTER}")
    return "\n".join(parts)
