"""Train and evaluate the native intent predictor on a mock corpus.

Generates a corpus whose utterances carry machine-checkable intent
markers, trains the TF-IDF + logistic-heads model, evaluates with the
shared metric definitions, and shows few-shot classification through the
backend for comparison.

Run:  python demos/03_intent_prediction.py
"""

import random

from solid.backend import MockBackend
from solid.cli import fixture_corpus_path
from solid.generator import generate_dialog
from solid.instructor import InstructionCache
from solid.ipeval import (
    TrainConfig,
    corpus_stats,
    evaluate,
    fewshot_predict,
    majority_singleton,
    predict_corpus,
    predict_intents,
    train_ip,
)
from solid.seeder import build_seeds, import_sequence_corpus
from solid.taxonomy import render_intent_codes

backend = MockBackend()
corpus = import_sequence_corpus(fixture_corpus_path())
seeds = list(build_seeds(backend, corpus, budget=300, rng=random.Random(42)))
cache = InstructionCache()
dialogs = [generate_dialog(backend, s, cache=cache) for s in seeds]

stats = corpus_stats(dialogs)
print(f"corpus: {stats.n_dialogs} dialogs, {stats.avg_turns:.2f} avg turns, "
      f"{stats.avg_utterance_tokens:.1f} avg utterance tokens")

split = int(len(dialogs) * 0.8)
train, test = dialogs[:split], dialogs[split:]

model = train_ip(train, TrainConfig())
print(f"trained {len(model.vocab)} features; "
      f"loss {model.epoch_losses[0]:.3f} -> {model.epoch_losses[-1]:.3f}")

golds, preds = predict_corpus(model, test)
report = evaluate(golds, preds)
print(f"\nheld-out: precision={report.precision:.4f} "
      f"f1_micro={report.f1_micro:.4f} f1_macro={report.f1_macro:.4f}")

train_golds = [u.intents for d in train for u in d.utterances]
baseline = evaluate(golds, [majority_singleton(train_golds)] * len(golds))
print(f"majority-singleton baseline: f1_micro={baseline.f1_micro:.4f}")

example = test[0]
print("\nper-turn predictions for one dialog:")
for i, utt in enumerate(example.utterances):
    predicted = predict_intents(model, example, i)
    print(f"  gold={render_intent_codes(utt.intents):8s} "
          f"pred={render_intent_codes(predicted):8s} | {utt.text[:60]}")

shots = [(train[0].utterances[0].text, train[0].utterances[0].intents)]
fewshot = fewshot_predict(backend, example, 0, shots)
print(f"\nfew-shot backend prediction for turn 0: {render_intent_codes(fewshot)}")
