"""
Fine-tuning driver for both prediction modes.

Encoder mode trains a multi-label classification head (sigmoid per intent,
threshold 0.5, argmax fallback so predictions are never empty). Seq2seq
mode generates the comma-joined label string and parses it back, falling
back to the catch-all code when parsing fails. Both evaluate with the
shared metric definitions and write the shared MetricsReport JSON.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .data import Example, build_examples, read_dialogs
from .labels import CODES, FALLBACK_CODE, UnknownIntent, parse_label_string
from .metrics import MetricsReport, evaluate
from .models import TINY, ModelSize, build_encoder, build_seq2seq
from .vocab import Vocab

log = logging.getLogger("ip_train")

MAX_TARGET_TOKENS = 40


@dataclass
class TrainJob:
    mode: str  # encoder | seq2seq
    train_path: str
    test_path: str
    dev_path: str | None = None
    epochs: int = 3
    batch_size: int = 16
    learning_rate: float = 3e-3
    rng_seed: int = 0
    threshold: float = 0.5
    output_dir: str | None = None
    size: ModelSize = field(default_factory=lambda: TINY)

    def __post_init__(self):
        if self.mode not in ("encoder", "seq2seq"):
            raise ValueError(f"unknown mode {self.mode!r}")


def _pad_batch(rows: list[list[int]], pad_id: int) -> tuple[torch.Tensor, torch.Tensor]:
    width = max(len(r) for r in rows)
    ids = torch.full((len(rows), width), pad_id, dtype=torch.long)
    mask = torch.zeros((len(rows), width), dtype=torch.long)
    for i, row in enumerate(rows):
        ids[i, : len(row)] = torch.tensor(row, dtype=torch.long)
        mask[i, : len(row)] = 1
    return ids, mask


def _batches(n: int, batch_size: int, generator: torch.Generator):
    order = torch.randperm(n, generator=generator).tolist()
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


class EncoderRunner:
    def __init__(self, job: TrainJob, vocab: Vocab):
        self.job = job
        self.vocab = vocab
        self.model = build_encoder(vocab, job.size)

    def _encode(self, examples: list[Example]) -> list[tuple[list[int], list[int]]]:
        return [
            self.vocab.encode_pair(e.context, e.text, self.job.size.max_len)
            for e in examples
        ]

    def _tensors(self, encoded: list[tuple[list[int], list[int]]]):
        input_ids, mask = _pad_batch([ids for ids, _ in encoded], self.vocab.pad_id)
        type_ids, _ = _pad_batch([types for _, types in encoded], 0)
        return input_ids, mask, type_ids

    def train(self, examples: list[Example]) -> None:
        encoded = self._encode(examples)
        targets = torch.tensor([e.multi_hot for e in examples], dtype=torch.float)
        optimizer = torch.optim.Adam(self.model.parameters(), lr=self.job.learning_rate)
        generator = torch.Generator().manual_seed(self.job.rng_seed)
        self.model.train()
        for epoch in range(self.job.epochs):
            total = 0.0
            for batch in _batches(len(encoded), self.job.batch_size, generator):
                input_ids, mask, type_ids = self._tensors([encoded[i] for i in batch])
                _, loss = self.model(input_ids=input_ids, attention_mask=mask,
                                     token_type_ids=type_ids, labels=targets[batch])
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total += loss.detach().item()
            log.info("encoder epoch %d loss %.4f", epoch, total)

    @torch.no_grad()
    def predict(self, examples: list[Example]) -> list[tuple[str, ...]]:
        self.model.eval()
        encoded = self._encode(examples)
        preds = []
        for start in range(0, len(encoded), self.job.batch_size):
            input_ids, mask, type_ids = self._tensors(encoded[start:start + self.job.batch_size])
            logits, _ = self.model(input_ids=input_ids, attention_mask=mask,
                                   token_type_ids=type_ids)
            probs = torch.sigmoid(logits)
            for row in probs:
                above = [CODES[j] for j in range(len(CODES)) if float(row[j]) > self.job.threshold]
                if not above:
                    above = [CODES[int(torch.argmax(row))]]
                preds.append(tuple(above))
        return preds

    def save(self, out_dir: str) -> None:
        torch.save(self.model.state_dict(), os.path.join(out_dir, "encoder.pt"))


class Seq2SeqRunner:
    def __init__(self, job: TrainJob, vocab: Vocab):
        self.job = job
        self.vocab = vocab
        self.model = build_seq2seq(vocab, job.size)

    def _encode_inputs(self, examples: list[Example]) -> list[list[int]]:
        return [self.vocab.encode(e.seq2seq_input, self.job.size.max_len) for e in examples]

    def train(self, examples: list[Example]) -> None:
        inputs = self._encode_inputs(examples)
        targets = [
            self.vocab.encode(e.target, MAX_TARGET_TOKENS, add_eos=True) for e in examples
        ]
        optimizer = torch.optim.Adam(self.model.parameters(), lr=self.job.learning_rate)
        generator = torch.Generator().manual_seed(self.job.rng_seed)
        self.model.train()
        for epoch in range(self.job.epochs):
            total = 0.0
            for batch in _batches(len(inputs), self.job.batch_size, generator):
                input_ids, mask = _pad_batch([inputs[i] for i in batch], self.vocab.pad_id)
                label_ids, label_mask = _pad_batch([targets[i] for i in batch], self.vocab.pad_id)
                label_ids[label_mask == 0] = -100
                out = self.model(input_ids=input_ids, attention_mask=mask, labels=label_ids)
                optimizer.zero_grad()
                out.loss.backward()
                optimizer.step()
                total += out.loss.detach().item()
            log.info("seq2seq epoch %d loss %.4f", epoch, total)

    @torch.no_grad()
    def predict(self, examples: list[Example]) -> list[tuple[str, ...]]:
        self.model.eval()
        inputs = self._encode_inputs(examples)
        preds = []
        for start in range(0, len(inputs), self.job.batch_size):
            chunk = inputs[start:start + self.job.batch_size]
            input_ids, mask = _pad_batch(chunk, self.vocab.pad_id)
            generated = self.model.generate(
                input_ids=input_ids,
                attention_mask=mask,
                max_new_tokens=MAX_TARGET_TOKENS,
                do_sample=False,
                num_beams=1,
            )
            for row in generated:
                decoded = self.vocab.decode_words(row.tolist())
                try:
                    preds.append(parse_label_string(decoded))
                except UnknownIntent:
                    preds.append((FALLBACK_CODE,))
        return preds

    def save(self, out_dir: str) -> None:
        torch.save(self.model.state_dict(), os.path.join(out_dir, "seq2seq.pt"))


def finetune(job: TrainJob) -> MetricsReport:
    """Train on the job's train split, evaluate on its test split, and
    return (and optionally persist) the metrics report."""
    torch.manual_seed(job.rng_seed)
    np.random.seed(job.rng_seed)

    train_examples = build_examples(read_dialogs(job.train_path), job.mode)
    test_examples = build_examples(read_dialogs(job.test_path), job.mode)
    if not train_examples:
        raise ValueError("training split has no labeled utterances")

    texts = [e.text for e in train_examples] + [e.context for e in train_examples]
    if job.mode == "seq2seq":
        texts += [e.seq2seq_input for e in train_examples] + [e.target for e in train_examples]
    vocab = Vocab.build(texts)
    runner = EncoderRunner(job, vocab) if job.mode == "encoder" else Seq2SeqRunner(job, vocab)
    runner.train(train_examples)

    if job.dev_path:
        dev_examples = build_examples(read_dialogs(job.dev_path), job.mode)
        if dev_examples:
            dev_report = evaluate([e.codes for e in dev_examples], runner.predict(dev_examples))
            log.info("dev f1_micro %.4f f1_macro %.4f", dev_report.f1_micro, dev_report.f1_macro)

    report = evaluate([e.codes for e in test_examples], runner.predict(test_examples))

    if job.output_dir:
        os.makedirs(job.output_dir, exist_ok=True)
        runner.save(job.output_dir)
        vocab.save(os.path.join(job.output_dir, "vocab.json"))
        with open(os.path.join(job.output_dir, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    return report
