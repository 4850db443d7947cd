"""
Self-seeding: the backend generates its own dialog seeds.

The chain per seed is entity type -> attributes -> entity name ->
background document -> intent sequence -> conversation starter. Intent
sequences are drawn with replacement from a reference corpus so their
distribution tracks the source data. The sequence is sampled before the
starter so the opener can be conditioned on the first intent set.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
import string
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Sequence

from . import instructor, prompts
from .backend import ChatBackend, ChatMessage, GenerationParams
from .generator import DegenerateOutput, post_process
from .instructor import InstructionCache
from .taxonomy import (
    Actor,
    IntentCode,
    MAX_DIALOG_TURNS,
    ParseError,
    parse_intent_set,
    parse_sequence,
    render_sequence,
)

log = logging.getLogger(__name__)


class EmptyCorpus(ValueError):
    pass


@dataclass(frozen=True)
class Seed:
    id: str
    entity_type: str
    attributes: tuple[str, ...]
    entity_name: str
    background_document: str
    conversation_starter: str
    intent_sequence: tuple[tuple[IntentCode, ...], ...]
    hallucinated: bool | None = None

    def validate(self) -> None:
        if filter_entity_name(self.entity_name) != self.entity_name:
            raise ValueError(f"entity name fails the name filter: {self.entity_name!r}")
        if not self.conversation_starter.strip():
            raise ValueError("conversation starter must be non-empty")
        if not 1 <= len(self.intent_sequence) <= MAX_DIALOG_TURNS:
            raise ValueError(f"intent sequence length {len(self.intent_sequence)} outside [1, {MAX_DIALOG_TURNS}]")


@dataclass
class SequenceCorpus:
    """Multiset of intent sequences; `dropped` counts over-length records."""

    sequences: list[tuple[tuple[IntentCode, ...], ...]]
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.sequences)


# --- parsing helpers ----------------------------------------------------------

_LIST_MARKER = re.compile(r"^\s*(?:\d+[.)]\s*|[-*•]+\s*)")
_SPECIALS = re.compile(r"[^\w\s\-'’.]")


def _clean_name_once(s: str) -> str:
    s = _LIST_MARKER.sub("", s)
    s = _SPECIALS.sub("", s)
    s = s.replace("_", "")
    s = re.sub(r"\s+", " ", s)
    return s.strip()


def filter_entity_name(raw: str) -> str | None:
    """Normalize a candidate entity name; None when rejected.

    Keeps letters, digits, spaces, hyphens, apostrophes, and periods; strips
    list markers; collapses whitespace. Rejects empty results and names
    longer than 20 characters. Runs to a fixed point, so accepted outputs
    are their own fixed points.
    """
    s = raw
    while True:
        cleaned = _clean_name_once(s)
        if cleaned == s:
            break
        s = cleaned
    if not s or len(s) > 20:
        return None
    return s


def _parse_list_lines(text: str) -> list[str]:
    items = []
    for line in text.splitlines():
        s = _LIST_MARKER.sub("", line.strip())
        s = s.rstrip(".,;:").strip()
        if s:
            items.append(s)
    return items


def _complete(backend: ChatBackend, prompt: str, params: GenerationParams | None) -> str:
    return backend.complete([ChatMessage("user", prompt)], params or GenerationParams())


# --- the five generation steps ------------------------------------------------


def gen_entity_types(backend: ChatBackend, n: int = 100,
                     params: GenerationParams | None = None) -> list[str]:
    if n < 1:
        raise ValueError("n must be >= 1")
    raw = _complete(backend, prompts.entity_types_prompt(n), params)
    seen: set[str] = set()
    types: list[str] = []
    for item in _parse_list_lines(raw):
        key = item.lower()
        if key in seen:
            continue
        seen.add(key)
        types.append(item)
    if len(types) < max(1, n // 2):
        raise DegenerateOutput(f"only {len(types)} entity types parsed, wanted {n}")
    return types


def gen_entity_attributes(backend: ChatBackend, entity_type: str, n: int = 10,
                          params: GenerationParams | None = None) -> list[str]:
    if n < 1:
        raise ValueError("n must be >= 1")
    raw = _complete(backend, prompts.entity_attributes_prompt(entity_type, n), params)
    attrs = _parse_list_lines(raw)
    if len(attrs) < max(1, n // 2):
        raise DegenerateOutput(f"only {len(attrs)} attributes parsed for {entity_type!r}")
    return attrs[:n]


def gen_entity_names(backend: ChatBackend, entity_type: str, letter: str, n: int = 100,
                     params: GenerationParams | None = None) -> list[str]:
    if len(letter) != 1 or letter.lower() not in string.ascii_lowercase:
        raise ValueError(f"letter must be a single English letter, got {letter!r}")
    if n < 1:
        raise ValueError("n must be >= 1")
    raw = _complete(backend, prompts.entity_names_prompt(entity_type, letter, n), params)
    names = []
    for line in raw.splitlines():
        name = filter_entity_name(line)
        if name and name.lower().startswith(letter.lower()):
            names.append(name)
    if not names:
        raise DegenerateOutput(f"no usable names for {entity_type!r} starting with {letter!r}")
    return names


def gen_background(backend: ChatBackend, entity_name: str, entity_type: str,
                   attributes: Sequence[str] = (),
                   params: GenerationParams | None = None) -> str:
    """Attributes steer the prompt but are not otherwise consumed downstream."""
    if not entity_name.strip():
        raise ValueError("entity name must be non-empty")
    raw = _complete(
        backend, prompts.background_prompt(entity_name, entity_type, attributes), params
    ).strip()
    if not raw:
        raise DegenerateOutput(f"empty background for {entity_name!r}")
    return raw


def gen_conversation_starter(
    backend: ChatBackend,
    entity_name: str,
    entity_type: str,
    background: str,
    intents: Sequence[IntentCode],
    params: GenerationParams | None = None,
    cache: InstructionCache | None = None,
) -> str:
    if not background.strip():
        raise ValueError("background must be present before generating a starter")
    instruction = instructor.instruction_for(backend, cache, Actor.User, intents, params=params)
    raw = _complete(
        backend,
        prompts.starter_prompt(entity_name, entity_type, background, instruction, intents),
        params,
    )
    return post_process(raw)


# --- intent-sequence corpus -----------------------------------------------------


def sample_intent_sequence(corpus: SequenceCorpus, rng: random.Random):
    """Uniform draw over corpus entries, respecting multiplicity."""
    if not corpus.sequences:
        raise EmptyCorpus("sequence corpus is empty")
    return corpus.sequences[rng.randrange(len(corpus.sequences))]


def import_sequence_corpus(path, format: str = "canonical") -> SequenceCorpus:
    if format == "canonical":
        return _import_canonical(path)
    if format == "msdialog":
        return _import_msdialog(path)
    raise ValueError(f"unknown corpus format {format!r}")


def _import_canonical(path) -> SequenceCorpus:
    sequences = []
    dropped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                seq = parse_sequence(line)
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
            if len(seq) > MAX_DIALOG_TURNS:
                dropped += 1
                continue
            sequences.append(seq)
    if dropped:
        log.warning("dropped %d sequences longer than %d utterances", dropped, MAX_DIALOG_TURNS)
    return SequenceCorpus(sequences, dropped)


def _import_msdialog(path) -> SequenceCorpus:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ParseError(f"{path}: expected a top-level id → record map")
    sequences = []
    dropped = 0
    for rec_id, record in data.items():
        try:
            seq = tuple(parse_intent_set(u["tags"]) for u in record["utterances"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: record {rec_id!r}: {exc}") from exc
        if not seq:
            continue
        if len(seq) > MAX_DIALOG_TURNS:
            dropped += 1
            continue
        sequences.append(seq)
    if dropped:
        log.warning("dropped %d sequences longer than %d utterances", dropped, MAX_DIALOG_TURNS)
    return SequenceCorpus(sequences, dropped)


# --- seed assembly --------------------------------------------------------------


def seed_id(entity_name: str, sequence, draw_index: int) -> str:
    payload = f"{entity_name}|{render_sequence(sequence)}|{draw_index}"
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def build_seeds(
    backend: ChatBackend,
    corpus: SequenceCorpus,
    budget: int,
    rng: random.Random,
    params: GenerationParams | None = None,
    cache: InstructionCache | None = None,
    n_types: int = 100,
    n_attributes: int = 10,
    n_names: int = 100,
) -> Iterator[Seed]:
    """Compose the full chain `budget` times, skipping per-seed failures.

    Entity-type, attribute, and name pools are generated lazily and shared
    across seeds; the rng draw order is fixed so a given (corpus, rng seed)
    pair always yields the same stream.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not corpus.sequences:
        raise EmptyCorpus("sequence corpus is empty")
    return _build_seeds(backend, corpus, budget, rng, params, cache, n_types, n_attributes, n_names)


def _build_seeds(
    backend: ChatBackend,
    corpus: SequenceCorpus,
    budget: int,
    rng: random.Random,
    params: GenerationParams | None,
    cache: InstructionCache | None,
    n_types: int,
    n_attributes: int,
    n_names: int,
) -> Iterator[Seed]:
    types: list[str] | None = None
    attributes: dict[str, tuple[str, ...]] = {}
    name_pools: dict[tuple[str, str], list[str]] = {}

    produced = 0
    for i in range(budget):
        letter = string.ascii_lowercase[rng.randrange(26)]
        type_draw = rng.random()
        name_draw = rng.random()
        sequence = sample_intent_sequence(corpus, rng)
        try:
            if types is None:
                types = gen_entity_types(backend, n_types, params)
            entity_type = types[int(type_draw * len(types))]
            if entity_type not in attributes:
                attributes[entity_type] = tuple(
                    gen_entity_attributes(backend, entity_type, n_attributes, params)
                )
            pool_key = (entity_type, letter)
            if pool_key not in name_pools:
                name_pools[pool_key] = gen_entity_names(backend, entity_type, letter, n_names, params)
            pool = name_pools[pool_key]
            entity_name = pool[int(name_draw * len(pool))]
            background = gen_background(
                backend, entity_name, entity_type, attributes[entity_type], params)
            starter = gen_conversation_starter(
                backend, entity_name, entity_type, background, sequence[0], params, cache
            )
            seed = Seed(
                id=seed_id(entity_name, sequence, i),
                entity_type=entity_type,
                attributes=attributes[entity_type],
                entity_name=entity_name,
                background_document=background,
                conversation_starter=starter,
                intent_sequence=sequence,
            )
            seed.validate()
        except Exception as exc:
            log.warning("seed %d failed: %s", i, exc)
            continue
        produced += 1
        yield seed
    if produced == 0:
        raise DegenerateOutput(f"all {budget} seeds failed")


# --- serialization ---------------------------------------------------------------


def seed_to_dict(seed: Seed) -> dict:
    return {
        "id": seed.id,
        "entity_type": seed.entity_type,
        "attributes": list(seed.attributes),
        "entity_name": seed.entity_name,
        "background_document": seed.background_document,
        "conversation_starter": seed.conversation_starter,
        "intent_sequence": render_sequence(seed.intent_sequence),
        "hallucinated": seed.hallucinated,
    }


def seed_from_dict(obj: dict) -> Seed:
    try:
        return Seed(
            id=str(obj["id"]),
            entity_type=obj["entity_type"],
            attributes=tuple(obj.get("attributes", ())),
            entity_name=obj["entity_name"],
            background_document=obj["background_document"],
            conversation_starter=obj["conversation_starter"],
            intent_sequence=parse_sequence(obj["intent_sequence"]),
            hallucinated=obj.get("hallucinated"),
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad seed record {obj.get('id', '?')!r}: {exc}") from exc


def write_seeds(path, seeds: Iterable[Seed]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for seed in seeds:
            fh.write(json.dumps(seed_to_dict(seed), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_seeds(path) -> list[Seed]:
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
            out.append(seed_from_dict(obj))
    return out


def mark(seed: Seed, hallucinated: bool | None) -> Seed:
    return replace(seed, hallucinated=hallucinated)
