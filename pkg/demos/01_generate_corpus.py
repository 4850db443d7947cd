"""Walk through corpus generation end to end with the offline mock backend.

Builds seeds from the bundled intent-sequence fixture, generates dialogs
turn by turn and in a single pass, and emits preference pairs. Everything
is deterministic: rerunning prints byte-identical output.

Run:  python demos/01_generate_corpus.py
"""

import random

from solid.backend import MockBackend
from solid.cli import fixture_corpus_path
from solid.generator import generate_dialog, generate_dialog_single_pass
from solid.instructor import InstructionCache
from solid.preference import build_preference_pair, quality_tier, render_dialog
from solid.seeder import build_seeds, import_sequence_corpus
from solid.taxonomy import render_intent_codes, render_sequence

backend = MockBackend()
corpus = import_sequence_corpus(fixture_corpus_path())
print(f"sequence corpus: {len(corpus)} sequences ({corpus.dropped} dropped)")

# 1. Self-seeding: entity type -> attributes -> name -> background ->
#    intent sequence -> conversation starter.
seeds = list(build_seeds(backend, corpus, budget=3, rng=random.Random(7)))
seed = seeds[0]
print("\n--- seed ---")
print("entity:", seed.entity_name, f"({seed.entity_type})")
print("attributes:", ", ".join(seed.attributes[:4]), "...")
print("background:", seed.background_document[:90], "...")
print("starter:", seed.conversation_starter)
print("intent sequence:", render_sequence(seed.intent_sequence))

# 2. Turn-wise generation: one backend call per utterance, each conditioned
#    on its intent set via the instruction tables (merged when multi-intent).
cache = InstructionCache()
dialog = generate_dialog(backend, seed, cache=cache)
print("\n--- turn-wise dialog ---")
for utt in dialog.utterances:
    print(f"{utt.actor.value} [{render_intent_codes(utt.intents)}]: {utt.text}")

# 3. Single-pass generation: the whole dialog from one completion. Lower
#    quality by design; it becomes the rejected side of preference pairs.
rejected = generate_dialog_single_pass(backend, seed)
print(f"\nsingle-pass came back with {len(rejected.utterances)} utterances "
      f"(length mismatch: {rejected.length_mismatch})")

# 4. A preference pair: shared prompt with a length-based quality prefix.
pair = build_preference_pair(seed, dialog, rejected)
print("\n--- preference pair prompt ---")
print(pair.prompt)
print("\ntier for", len(dialog.utterances), "utterances:",
      quality_tier(len(dialog.utterances)).prefix)
print("\nchosen rendering starts:\n" + render_dialog(dialog)[:160], "...")
