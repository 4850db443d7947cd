"""
Training-subset construction.

Retrieval subsets treat real dialogs as queries against the synthetic
corpus (Okapi BM25 or embedding dot product); the balancing strategies mix
synthetic data into a human-labeled set so that intent-sequence signatures
(SeqInt-Bal) or individual intents (Int-Bal) even out, with Random-Eq as
the size-matched control. Every sampler is a pure function of its inputs
and the rng seed.
"""

from __future__ import annotations

import math
import random
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .backend import ChatBackend
from .taxonomy import ALL_INTENTS, Dialog, render_sequence


class EmptyCorpus(ValueError):
    pass


class Undersupply(ValueError):
    pass


_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    return _TOKEN.findall(text.lower())


# --- Okapi BM25 -----------------------------------------------------------------


@dataclass
class Bm25Index:
    k1: float
    b: float
    doc_ids: list[str]
    doc_lengths: list[int]
    avg_doc_length: float
    n_docs: int
    term_freqs: list[Counter]
    df: dict[str, int]
    postings: dict[str, list[int]]

    def idf(self, term: str) -> float:
        d = self.df.get(term, 0)
        return math.log((self.n_docs - d + 0.5) / (d + 0.5) + 1.0)


def bm25_build(corpus: Sequence[Dialog], k1: float = 1.2, b: float = 0.75) -> Bm25Index:
    """Index dialog documents (concatenated utterance texts) for Okapi
    scoring with idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1)."""
    if not corpus:
        raise EmptyCorpus("cannot index an empty corpus")
    doc_ids = [d.id for d in corpus]
    term_freqs = [Counter(tokenize(d.text())) for d in corpus]
    doc_lengths = [sum(tf.values()) for tf in term_freqs]
    df: dict[str, int] = {}
    postings: dict[str, list[int]] = {}
    for i, tf in enumerate(term_freqs):
        for term in tf:
            df[term] = df.get(term, 0) + 1
            postings.setdefault(term, []).append(i)
    return Bm25Index(
        k1=k1,
        b=b,
        doc_ids=doc_ids,
        doc_lengths=doc_lengths,
        avg_doc_length=sum(doc_lengths) / len(doc_lengths),
        n_docs=len(corpus),
        term_freqs=term_freqs,
        df=df,
        postings=postings,
    )


def _bm25_score(index: Bm25Index, query_tf: Counter, doc_idx: int) -> float:
    tf = index.term_freqs[doc_idx]
    dl = index.doc_lengths[doc_idx]
    norm = index.k1 * (1.0 - index.b + index.b * dl / index.avg_doc_length)
    score = 0.0
    for term, qtf in query_tf.items():
        f = tf.get(term, 0)
        if f == 0:
            continue
        score += qtf * index.idf(term) * f * (index.k1 + 1.0) / (f + norm)
    return score


def bm25_topk(index: Bm25Index, query: Dialog, k: int) -> list[tuple[str, float]]:
    """Top-k (doc id, score), non-increasing score, ties by ascending id.

    Only documents sharing a term with the query can score above zero, so
    scoring walks the postings; zero-score documents fill the tail in id
    order, matching a full brute-force sort by (-score, id).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    query_tf = Counter(tokenize(query.text()))
    candidates: set[int] = set()
    for term in query_tf:
        candidates.update(index.postings.get(term, ()))
    scored = sorted(
        ((index.doc_ids[i], _bm25_score(index, query_tf, i)) for i in candidates),
        key=lambda pair: (-pair[1], pair[0]),
    )
    if len(scored) < min(k, index.n_docs):
        hit_ids = {index.doc_ids[i] for i in candidates}
        zeros = sorted(doc_id for doc_id in index.doc_ids if doc_id not in hit_ids)
        scored.extend((doc_id, 0.0) for doc_id in zeros)
    return scored[: min(k, index.n_docs)]


# --- embedding retrieval ----------------------------------------------------------


def _dot(u: Sequence[float], v: Sequence[float]) -> float:
    return sum(a * b for a, b in zip(u, v))


def embed_topk(backend: ChatBackend, corpus: Sequence[Dialog], query: Dialog,
               k: int) -> list[tuple[str, float]]:
    if not corpus:
        raise EmptyCorpus("cannot rank an empty corpus")
    if k < 1:
        raise ValueError("k must be >= 1")
    vectors = backend.embed([d.text() for d in corpus])
    query_vec = backend.embed([query.text()])[0]
    return _rank_by_dot(corpus, vectors, query_vec, k)


def _rank_by_dot(corpus: Sequence[Dialog], vectors, query_vec, k: int) -> list[tuple[str, float]]:
    scored = sorted(
        ((d.id, _dot(query_vec, v)) for d, v in zip(corpus, vectors)),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return scored[: min(k, len(corpus))]


# --- retrieval subsets --------------------------------------------------------------


def retrieve_subset(
    queries: Sequence[Dialog],
    corpus: Sequence[Dialog],
    k: int,
    method: str = "bm25",
    backend: ChatBackend | None = None,
    k1: float = 1.2,
    b: float = 0.75,
) -> tuple[list[Dialog], dict]:
    """Union of per-query top-k with exact-duplicate removal by dialog id.

    Returns (subset sorted by id, report) where the report carries the
    pre-dedup count (|queries| x k when the corpus is large enough).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if method == "bm25":
        index = bm25_build(corpus, k1=k1, b=b)
        rankings = [bm25_topk(index, q, k) for q in queries]
    elif method == "embed":
        if backend is None:
            raise ValueError("embedding retrieval needs a backend")
        if not corpus:
            raise EmptyCorpus("cannot rank an empty corpus")
        vectors = backend.embed([d.text() for d in corpus])
        query_vecs = backend.embed([q.text() for q in queries]) if queries else []
        rankings = [_rank_by_dot(corpus, vectors, qv, k) for qv in query_vecs]
    else:
        raise ValueError(f"unknown retrieval method {method!r}")

    pre_dedup = sum(len(r) for r in rankings)
    by_id = {d.id: d for d in corpus}
    kept: dict[str, Dialog] = {}
    for ranking in rankings:
        for doc_id, _score in ranking:
            kept.setdefault(doc_id, by_id[doc_id])
    subset = [kept[doc_id] for doc_id in sorted(kept)]
    report = {"method": method, "k": k, "pre_dedup": pre_dedup, "post_dedup": len(subset)}
    return subset, report


# --- balancing strategies -------------------------------------------------------------


def sequence_signature(dialog: Dialog) -> str:
    """Canonical text of the dialog's intent sequence (the SeqInt-Bal key)."""
    return render_sequence(dialog.intent_sequence())


def seqint_bal(
    human: Sequence[Dialog],
    synthetic: Sequence[Dialog],
    min_count: int = 1000,
    rng: random.Random | None = None,
) -> tuple[list[Dialog], dict[str, int]]:
    """Sample synthetic dialogs so every intent-sequence signature reaches
    min_count combined, supply permitting.

    Returns (sampled synthetic dialogs, shortfall per signature). Signatures
    short on synthetic supply are reported, never fatal.
    """
    rng = rng or random.Random(0)
    human_counts = Counter(sequence_signature(d) for d in human)
    pools: dict[str, list[Dialog]] = {}
    for d in synthetic:
        pools.setdefault(sequence_signature(d), []).append(d)

    sampled: list[Dialog] = []
    shortfalls: dict[str, int] = {}
    for sig in sorted(set(human_counts) | set(pools)):
        need = max(0, min_count - human_counts.get(sig, 0))
        pool = sorted(pools.get(sig, ()), key=lambda d: d.id)
        take = min(need, len(pool))
        if take:
            sampled.extend(rng.sample(pool, take))
        if need > take:
            shortfalls[sig] = need - take
    return sampled, shortfalls


def intent_counts(dialogs: Iterable[Dialog]) -> Counter:
    counts: Counter = Counter({code: 0 for code in ALL_INTENTS})
    for d in dialogs:
        for u in d.utterances:
            for code in u.intents:
                counts[code] += 1
    return counts


def _spread(counts: Counter) -> int:
    values = [counts[code] for code in ALL_INTENTS]
    return max(values) - min(values)


def _deficit(counts: Counter) -> int:
    values = [counts[code] for code in ALL_INTENTS]
    top = max(values)
    return sum(top - v for v in values)


def int_bal(
    human: Sequence[Dialog],
    synthetic: Sequence[Dialog],
    rng: random.Random | None = None,
    tolerance: int = 1,
) -> list[Dialog]:
    """Greedily sample synthetic dialogs to equalize per-intent utterance
    counts of the combined set.

    Each accepted dialog strictly reduces (spread, total deficit)
    lexicographically and never increases the max-min spread, so the
    combined spread after balancing is <= the unbalanced spread. Stops at
    the tolerance or when no candidate helps.
    """
    rng = rng or random.Random(0)
    pool = sorted(synthetic, key=lambda d: d.id)
    rng.shuffle(pool)
    contrib = [intent_counts([d]) for d in pool]
    used = [False] * len(pool)

    counts = intent_counts(human)
    selected: list[Dialog] = []
    while _spread(counts) > tolerance:
        base = (_spread(counts), _deficit(counts))
        best: tuple[tuple[int, int], int] | None = None
        for i, d in enumerate(pool):
            if used[i]:
                continue
            trial = counts.copy()
            trial.update(contrib[i])
            cand = (_spread(trial), _deficit(trial))
            if cand >= base:
                continue
            if best is None or cand < best[0]:
                best = (cand, i)
        if best is None:
            break
        _, idx = best
        used[idx] = True
        counts.update(contrib[idx])
        selected.append(pool[idx])
    return selected


def random_eq(
    human: Sequence[Dialog],
    synthetic: Sequence[Dialog],
    rng: random.Random | None = None,
) -> list[Dialog]:
    """Uniform sample without replacement of exactly |human| synthetic dialogs."""
    if len(synthetic) < len(human):
        raise Undersupply(f"need {len(human)} synthetic dialogs, have {len(synthetic)}")
    rng = rng or random.Random(0)
    pool = sorted(synthetic, key=lambda d: d.id)
    return rng.sample(pool, len(human))
