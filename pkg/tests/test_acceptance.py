"""Acceptance suite: ten release criteria, one test each.

Every test prints one [PASS]/[FAIL] line (run with -s to see them inline).
All criteria run offline: mock text backend, fixture everything else.
"""

from __future__ import annotations

import functools
import math
import random
import string
import time
from collections import Counter

import numpy as np
import pytest
from scipy import sparse

from solid import taxonomy
from solid.backend import MockBackend, mark_token
from solid.cli import main
from solid.generator import generate_dialog, post_process
from solid.instructor import InstructionCache
from solid.ipeval import (
    TrainConfig,
    evaluate,
    loss_and_grad,
    majority_singleton,
    predict_corpus,
    train_ip,
)
from solid.jsonl import read_jsonl
from solid.preference import OutOfRange, QualityTier, quality_tier, render_seed_prompt
from solid.sampler import bm25_build, bm25_topk, int_bal, intent_counts, random_eq, retrieve_subset, seqint_bal, tokenize
from solid.seeder import SequenceCorpus, build_seeds, read_seeds
from solid.taxonomy import ALL_INTENTS, Actor, IntentCode, parse_sequence

from helpers import make_dialog


def criterion(number, description):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\n[FAIL] criterion {number}: {description}")
                raise
            print(f"\n[PASS] criterion {number}: {description}")
        return wrapper
    return decorate


# --- 1. BM25 oracle equivalence -------------------------------------------------


def _brute_force_bm25(corpus, query, k, k1=1.2, b=0.75):
    docs = [tokenize(d.text()) for d in corpus]
    n = len(docs)
    avgdl = sum(len(d) for d in docs) / n
    df = Counter()
    for d in docs:
        for term in set(d):
            df[term] += 1
    ranked = []
    for tokens, dialog in zip(docs, corpus):
        tf = Counter(tokens)
        score = 0.0
        for term in tokenize(query.text()):
            f = tf.get(term, 0)
            if not f:
                continue
            idf = math.log((n - df[term] + 0.5) / (df[term] + 0.5) + 1.0)
            score += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * len(tokens) / avgdl))
        ranked.append((dialog.id, score))
    ranked.sort(key=lambda pair: (-pair[1], pair[0]))
    return ranked[: min(k, n)]


def _text_doc(doc_id, text):
    return make_dialog(doc_id, [["OQ"]], texts=[text])


def _random_docs(rng, n, vocab_size=400, max_len=10, prefix="d"):
    vocab = [f"w{i}" for i in range(vocab_size)]
    return [
        _text_doc(f"{prefix}{i:05d}",
                  " ".join(rng.choice(vocab) for _ in range(rng.randint(1, max_len))) + ".")
        for i in range(n)
    ]


@criterion(1, "BM25 ranking exactly matches the brute-force Okapi oracle")
def test_criterion_01_bm25_oracle_equivalence():
    started = time.monotonic()
    rng = random.Random(2024)
    for trial in range(20):
        corpus = _random_docs(rng, rng.randint(20, 500), vocab_size=rng.choice([50, 200, 400]))
        index = bm25_build(corpus)
        for q in range(20):
            query = _random_docs(rng, 1, prefix="q")[0]
            k = rng.choice([1, 5, 15, len(corpus) + 5])
            got = bm25_topk(index, query, k)
            want = _brute_force_bm25(corpus, query, k)
            assert [i for i, _ in got] == [i for i, _ in want]
            assert [s for _, s in got] == pytest.approx([s for _, s in want], rel=1e-9, abs=1e-12)
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"took {elapsed:.1f}s, budget 30s"


# --- 2. LMQ tier table ---------------------------------------------------------


@criterion(2, "length tiers reproduce the quality-prefix table for 1..20")
def test_criterion_02_lmq_tier_table():
    expected = (
        [(n, QualityTier.Excellent) for n in (1, 2, 3)]
        + [(4, QualityTier.Good)]
        + [(n, QualityTier.Average) for n in range(5, 11)]
        + [(n, QualityTier.Poor) for n in range(11, 16)]
        + [(n, QualityTier.VeryPoor) for n in range(16, 21)]
    )
    assert len(expected) == 20
    for n, tier in expected:
        assert quality_tier(n) is tier, f"n={n}"
    for bad in (0, 21):
        with pytest.raises(OutOfRange):
            quality_tier(bad)


# --- 3. Turn-wise generation contract -------------------------------------------


@criterion(3, "500 mock dialogs: length, alternation, clean text, marker fidelity")
def test_criterion_03_turnwise_contract(fixture_corpus):
    started = time.monotonic()
    backend = MockBackend()
    rng = random.Random(33)
    seeds = list(build_seeds(backend, fixture_corpus, 500, rng))
    assert len(seeds) == 500
    cache = InstructionCache()
    checked = 0
    for seed in seeds:
        dialog = generate_dialog(backend, seed, cache=cache)
        assert len(dialog.utterances) == len(seed.intent_sequence)
        for i, (utterance, intents) in enumerate(zip(dialog.utterances, seed.intent_sequence)):
            assert utterance.actor is (Actor.User if i % 2 == 0 else Actor.Agent)
            assert utterance.text[-1] in ".!?\"'\u201d\u2019)]}\u00bb"
            lowered = utterance.text.lower()
            assert not lowered.startswith("user:") and not lowered.startswith("agent:")
            for code in intents:
                assert mark_token(code) in utterance.text
        checked += 1
    assert checked == 500
    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"took {elapsed:.1f}s, budget 60s"


# --- 4. Retrieval arithmetic ------------------------------------------------------


@criterion(4, "1,760 queries x k=15 retrieve 26,400 pre-dedup")
def test_criterion_04_retrieval_arithmetic():
    rng = random.Random(44)
    corpus = _random_docs(rng, 2000, vocab_size=600, max_len=8, prefix="c")
    queries = _random_docs(rng, 1760, vocab_size=600, max_len=6, prefix="q")
    subset, report = retrieve_subset(queries, corpus, k=15, method="bm25")
    assert report["pre_dedup"] == 1760 * 15 == 26_400
    assert report["post_dedup"] <= 26_400
    assert report["post_dedup"] == len(subset) == len({d.id for d in subset})


# --- 5. Balance invariants ---------------------------------------------------------


@criterion(5, "SeqInt-Bal hits exact floors; Int-Bal never widens intent spread")
def test_criterion_05_balance_invariants():
    rng = random.Random(55)

    # SeqInt-Bal: every sufficiently-supplied signature reaches exactly 10.
    signatures = ["OQ; PA", "OQ; IR+PA; FD", "OQ; GG"]
    human, synthetic = [], []
    for s, sig in enumerate(signatures):
        turns = [list(c.name for c in intents) for intents in parse_sequence(sig)]
        for i in range(rng.randint(0, 6)):
            human.append(make_dialog(f"h{s}_{i}", turns))
        for i in range(20):
            synthetic.append(make_dialog(f"s{s}_{i:02d}", turns))
    sampled, shortfalls = seqint_bal(human, synthetic, min_count=10, rng=random.Random(0))
    assert shortfalls == {}
    combined = Counter(
        "; ".join("+".join(c.name for c in u.intents) for u in d.utterances)
        for d in human + sampled
    )
    for sig in signatures:
        assert combined[sig] == 10, sig

    # Int-Bal: spread shrinks (or is already at optimum) on imbalanced fixtures.
    def spread(counts):
        values = [counts[c] for c in ALL_INTENTS]
        return max(values) - min(values)

    for trial in range(10):
        trial_rng = random.Random(100 + trial)
        majority = trial_rng.sample([c.name for c in ALL_INTENTS], 3)
        human = [
            make_dialog(f"h{trial}_{i}", [[trial_rng.choice(majority)]])
            for i in range(trial_rng.randint(5, 30))
        ]
        synthetic = [
            make_dialog(f"s{trial}_{i:03d}", [[trial_rng.choice([c.name for c in ALL_INTENTS])]])
            for i in range(150)
        ]
        before = spread(intent_counts(human))
        selected = int_bal(human, synthetic, random.Random(trial))
        after = spread(intent_counts(human + selected))
        assert after <= before
        if before > 1:
            assert after < before  # supply guarantees strict improvement here


# --- 6. Metric oracle -----------------------------------------------------------


@criterion(6, "metrics match the hand-enumerated oracle to 1e-9")
def test_criterion_06_metric_oracle():
    gold = [{IntentCode.OQ}, {IntentCode.PA, IntentCode.IR}, {IntentCode.GG}]
    pred = [{IntentCode.OQ}, {IntentCode.PA}, {IntentCode.PF}]
    report = evaluate(gold, pred)
    assert abs(report.precision - 2 / 3) < 1e-9
    assert abs(report.f1_micro - 4 / 7) < 1e-9

    perfect = evaluate(gold, gold)
    assert perfect.precision == 1.0 and perfect.f1_micro == 1.0

    disjoint = evaluate(gold, [{IntentCode.JK}] * 3)
    assert disjoint.precision == 0.0 and disjoint.f1_micro == 0.0


# --- 7. Gradient check ------------------------------------------------------------


@criterion(7, "analytic gradients agree with central differences on 50 instances")
def test_criterion_07_gradient_check():
    rng = np.random.RandomState(7)
    eps = 1e-6
    for _ in range(50):
        n, v = rng.randint(2, 7), rng.randint(2, 5)
        x = sparse.csr_matrix(rng.randn(n, v) * (rng.rand(n, v) > 0.3))
        y = (rng.rand(n, 12) > 0.6).astype(float)
        weights = rng.randn(12, v) * 0.5
        bias = rng.randn(12) * 0.5
        l2 = 10.0 ** rng.uniform(-5, -2)
        _, grad_w, grad_b = loss_and_grad(weights, bias, x, y, l2)

        flat_params = np.concatenate([weights.ravel(), bias])
        analytic = np.concatenate([grad_w.ravel(), grad_b])
        numeric = np.zeros_like(flat_params)
        for j in range(flat_params.size):
            bump = np.zeros_like(flat_params)
            bump[j] = eps

            def unpack(p):
                return p[: weights.size].reshape(weights.shape), p[weights.size:]

            w_hi, b_hi = unpack(flat_params + bump)
            w_lo, b_lo = unpack(flat_params - bump)
            numeric[j] = (loss_and_grad(w_hi, b_hi, x, y, l2)[0]
                          - loss_and_grad(w_lo, b_lo, x, y, l2)[0]) / (2 * eps)
        rel = np.linalg.norm(analytic - numeric) / max(
            np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
        assert rel < 1e-5


# --- 8. End-to-end learnability -------------------------------------------------------


@criterion(8, "mock pipeline at 1,000 seeds trains to F1-micro >= 0.95 held-out")
def test_criterion_08_end_to_end_learnability(fixture_corpus):
    started = time.monotonic()
    backend = MockBackend()
    seeds = list(build_seeds(backend, fixture_corpus, 1000, random.Random(88)))
    cache = InstructionCache()
    dialogs = [generate_dialog(backend, s, cache=cache) for s in seeds]

    split = int(len(dialogs) * 0.8)
    train, held_out = dialogs[:split], dialogs[split:]
    model = train_ip(train, TrainConfig())
    golds, preds = predict_corpus(model, held_out)
    report = evaluate(golds, preds)
    assert report.f1_micro >= 0.95, f"held-out F1-micro {report.f1_micro:.4f}"

    train_golds = [u.intents for d in train for u in d.utterances]
    baseline = evaluate(golds, [majority_singleton(train_golds)] * len(golds))
    assert baseline.f1_micro < report.f1_micro

    elapsed = time.monotonic() - started
    assert elapsed < 180.0, f"took {elapsed:.1f}s, budget 180s"


# --- 9. Directional sampling effect ---------------------------------------------------


def _generate_corpus(backend, lines, budget, rng_seed, id_prefix):
    corpus = SequenceCorpus([parse_sequence(line) for line in lines])
    seeds = list(build_seeds(backend, corpus, budget, random.Random(rng_seed)))
    cache = InstructionCache()
    return [
        generate_dialog(backend, s, cache=cache, dialog_id=f"{id_prefix}{i:04d}")
        for i, s in enumerate(seeds)
    ]


@criterion(9, "Int-Bal >= Random-Eq and mixed >= human-only, on mean macro-F1")
def test_criterion_09_directional_sampling():
    backend = MockBackend()
    human_lines = ["OQ; PA", "OQ; PA; PA", "OQ; PA; PA; PA"]
    full_lines = [f"OQ; {c.name}" for c in ALL_INTENTS] + ["OQ; IR+PA; FD"]

    human = _generate_corpus(backend, human_lines, 40, 1, "h")
    synthetic = _generate_corpus(backend, full_lines, 300, 2, "s")
    test_set = _generate_corpus(backend, full_lines, 80, 3, "t")

    def macro_f1(training, run_seed):
        model = train_ip(training, TrainConfig(rng_seed=run_seed))
        golds, preds = predict_corpus(model, test_set)
        return evaluate(golds, preds).f1_macro

    int_bal_scores, random_eq_scores, human_only_scores = [], [], []
    for run_seed in range(1, 6):
        rng = random.Random(run_seed)
        balanced = int_bal(human, synthetic, rng)
        matched = random_eq(human, synthetic, random.Random(run_seed))
        int_bal_scores.append(macro_f1(human + balanced, run_seed))
        random_eq_scores.append(macro_f1(human + matched, run_seed))
        human_only_scores.append(macro_f1(human, run_seed))

    mean = lambda xs: sum(xs) / len(xs)
    assert mean(int_bal_scores) >= mean(random_eq_scores), (int_bal_scores, random_eq_scores)
    assert mean(int_bal_scores) >= mean(human_only_scores), (int_bal_scores, human_only_scores)


# --- 10. Determinism ---------------------------------------------------------------


def _random_noise(rng, size):
    alphabet = string.ascii_letters + string.digits + " .!?\n:\"'()"
    pieces = []
    for _ in range(size):
        if rng.random() < 0.1:
            pieces.append(rng.choice(["User:", "Agent:", "user :", "AGENT:"]))
        pieces.append("".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12))))
    return " ".join(pieces)


@criterion(10, "pipeline runs are byte-identical; prompts shared; post_process idempotent")
def test_criterion_10_determinism(tmp_path):
    run_a, run_b = tmp_path / "a", tmp_path / "b"
    for out_dir in (run_a, run_b):
        assert main(["pipeline", "--backend", "mock", "--budget", "10",
                     "--rng-seed", "1", "--out-dir", str(out_dir)]) == 0
    for name in ("seeds.jsonl", "dialogs.jsonl", "rejected.jsonl", "pairs.jsonl", "subset.jsonl"):
        assert (run_a / name).read_bytes() == (run_b / name).read_bytes(), name

    # Chosen and rejected sides of every pair share one prompt whose tier
    # depends only on the chosen dialog's length.
    seeds_by_id = {s.id: s for s in read_seeds(run_a / "seeds.jsonl")}
    pairs = list(read_jsonl(run_a / "pairs.jsonl"))
    assert pairs
    for row in pairs:
        seed = seeds_by_id[row["meta"]["seed_id"]]
        tier = quality_tier(row["meta"]["chosen_len"])
        expected_prompt = "\n".join([render_seed_prompt(seed), "<|assistant|>", tier.prefix])
        assert row["prompt"] == expected_prompt

    rng = random.Random(0)
    checked = 0
    for _ in range(10_000):
        raw = _random_noise(rng, rng.randint(1, 6))
        try:
            once = post_process(raw)
        except Exception:
            continue
        assert post_process(once) == once
        checked += 1
    assert checked > 1000  # the sample must actually exercise the success path
