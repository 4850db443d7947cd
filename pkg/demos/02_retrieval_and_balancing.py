"""Build training subsets: BM25 / embedding retrieval and the three
balancing strategies.

A small mock-generated corpus plays the synthetic side; a skewed slice of
it plays the human-labeled side.

Run:  python demos/02_retrieval_and_balancing.py
"""

import random

from solid.backend import MockBackend
from solid.generator import generate_dialog
from solid.instructor import InstructionCache
from solid.sampler import (
    bm25_build,
    bm25_topk,
    int_bal,
    intent_counts,
    random_eq,
    retrieve_subset,
    seqint_bal,
    sequence_signature,
)
from solid.seeder import SequenceCorpus, build_seeds
from solid.taxonomy import ALL_INTENTS, parse_sequence


def corpus_from(lines, budget, rng_seed, prefix):
    backend = MockBackend()
    seq_corpus = SequenceCorpus([parse_sequence(line) for line in lines])
    seeds = build_seeds(backend, seq_corpus, budget, random.Random(rng_seed))
    cache = InstructionCache()
    return [generate_dialog(backend, s, cache=cache, dialog_id=f"{prefix}{i:03d}")
            for i, s in enumerate(seeds)]


human = corpus_from(["OQ; PA", "OQ; PA; PA"], 15, 1, "h")
# Pure single-intent sequences give the balancer free rein over every label.
synthetic = corpus_from([f"{c.name}; {c.name}" for c in ALL_INTENTS], 120, 2, "s")
print(f"human: {len(human)} dialogs | synthetic: {len(synthetic)} dialogs")

# Retrieval: human dialogs are queries, synthetic dialogs the collection.
index = bm25_build(synthetic)
top = bm25_topk(index, human[0], k=3)
print("\nBM25 top-3 for the first human dialog:")
for doc_id, score in top:
    print(f"  {doc_id}  score={score:.3f}")

subset, report = retrieve_subset(human, synthetic, k=5, method="bm25")
print(f"bm25 subset: pre-dedup {report['pre_dedup']}, post-dedup {report['post_dedup']}")

subset, report = retrieve_subset(human, synthetic, k=5, method="embed",
                                 backend=MockBackend())
print(f"embedding subset: pre-dedup {report['pre_dedup']}, post-dedup {report['post_dedup']}")

# Balancing: per-signature floors, per-intent equalization, size matching.
sampled, shortfalls = seqint_bal(human, synthetic, min_count=4, rng=random.Random(0))
print(f"\nseqint-bal sampled {len(sampled)} dialogs; "
      f"{len(shortfalls)} signatures under-supplied")
print("example signature:", sequence_signature(human[0]))

before = intent_counts(human)
balanced = int_bal(human, synthetic, random.Random(0))
after = intent_counts(human + balanced)
spread = lambda c: max(c[i] for i in ALL_INTENTS) - min(c[i] for i in ALL_INTENTS)
print(f"int-bal: spread {spread(before)} -> {spread(after)} "
      f"with {len(balanced)} sampled dialogs")

matched = random_eq(human, synthetic, random.Random(0))
print(f"random-eq: {len(matched)} synthetic dialogs for {len(human)} human ones")
