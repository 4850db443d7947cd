"""
Tiny transformer constructors.

Models are built from configs with random init and a corpus-specific
vocabulary; nothing is downloaded. The defaults are sized so a few epochs
on a few hundred utterances finish in seconds on CPU, which is the point:
full-size encoder/seq2seq checkpoints drop in by changing the config.

The encoder classifies from a mean-pool over the current-utterance tokens
rather than a [CLS] pooler: with random init the residual stream keeps the
pooled vector near-linear in the token embeddings, so from-scratch training
converges in a handful of epochs instead of hundreds.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from transformers import BertConfig, BertModel, T5Config, T5ForConditionalGeneration

from .labels import N_LABELS
from .vocab import Vocab


@dataclass(frozen=True)
class ModelSize:
    hidden: int = 64
    layers: int = 2
    heads: int = 2
    ffn: int = 128
    max_len: int = 96


TINY = ModelSize()


class EncoderClassifier(nn.Module):
    """BERT-style body with a multi-label head over mean-pooled segment-1
    (current utterance) token states."""

    def __init__(self, config: BertConfig):
        super().__init__()
        self.config = config
        self.bert = BertModel(config, add_pooling_layer=False)
        self.head = nn.Linear(config.hidden_size, config.num_labels)
        self.loss_fn = nn.BCEWithLogitsLoss()

    def forward(self, input_ids, attention_mask, token_type_ids, labels=None):
        hidden = self.bert(
            input_ids=input_ids,
            attention_mask=attention_mask,
            token_type_ids=token_type_ids,
        ).last_hidden_state
        pool_mask = (attention_mask * token_type_ids).unsqueeze(-1).to(hidden.dtype)
        denom = pool_mask.sum(dim=1).clamp(min=1.0)
        pooled = (hidden * pool_mask).sum(dim=1) / denom
        logits = self.head(pooled)
        loss = self.loss_fn(logits, labels) if labels is not None else None
        return logits, loss


def build_encoder(vocab: Vocab, size: ModelSize = TINY) -> EncoderClassifier:
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=size.hidden,
        num_hidden_layers=size.layers,
        num_attention_heads=size.heads,
        intermediate_size=size.ffn,
        max_position_embeddings=size.max_len,
        pad_token_id=vocab.pad_id,
        num_labels=N_LABELS,
        hidden_dropout_prob=0.0,
        attention_probs_dropout_prob=0.0,
    )
    return EncoderClassifier(config)


def build_seq2seq(vocab: Vocab, size: ModelSize = TINY) -> T5ForConditionalGeneration:
    config = T5Config(
        vocab_size=len(vocab),
        d_model=size.hidden,
        d_kv=size.hidden // size.heads,
        d_ff=size.ffn,
        num_layers=size.layers,
        num_decoder_layers=size.layers,
        num_heads=size.heads,
        pad_token_id=vocab.pad_id,
        eos_token_id=vocab.eos_id,
        decoder_start_token_id=vocab.pad_id,
    )
    return T5ForConditionalGeneration(config)
