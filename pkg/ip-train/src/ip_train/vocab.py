"""Whitespace-level vocabulary for the tiny from-scratch models.

No pretrained tokenizer is assumed (or downloadable); the vocabulary is
built from the training split. Commas survive as their own token so
seq2seq label strings can be decoded back into label lists.
"""

from __future__ import annotations

import json
import re

_TOKEN = re.compile(r"[\w]+|,")

PAD, UNK, CLS, EOS, SEP = "<pad>", "<unk>", "<cls>", "</s>", "<sep>"
SPECIALS = (PAD, UNK, CLS, EOS, SEP)


def split_tokens(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


class Vocab:
    def __init__(self, tokens: dict[str, int]):
        self.tokens = tokens
        self.inverse = {i: t for t, i in tokens.items()}

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def pad_id(self) -> int:
        return self.tokens[PAD]

    @property
    def unk_id(self) -> int:
        return self.tokens[UNK]

    @property
    def cls_id(self) -> int:
        return self.tokens[CLS]

    @property
    def eos_id(self) -> int:
        return self.tokens[EOS]

    @property
    def sep_id(self) -> int:
        return self.tokens[SEP]

    @classmethod
    def build(cls, texts, min_count: int = 1) -> "Vocab":
        counts: dict[str, int] = {}
        for text in texts:
            for token in split_tokens(text):
                counts[token] = counts.get(token, 0) + 1
        tokens = {special: i for i, special in enumerate(SPECIALS)}
        for token in sorted(counts):
            if counts[token] >= min_count:
                tokens[token] = len(tokens)
        return cls(tokens)

    def encode(self, text: str, max_len: int, add_cls: bool = False,
               add_eos: bool = False) -> list[int]:
        ids = [self.tokens.get(t, self.unk_id) for t in split_tokens(text)]
        budget = max_len - int(add_cls) - int(add_eos)
        ids = ids[:budget]
        if add_cls:
            ids = [self.cls_id] + ids
        if add_eos:
            ids = ids + [self.eos_id]
        return ids

    def encode_pair(self, context: str, text: str, max_len: int) -> tuple[list[int], list[int]]:
        """[CLS] context [SEP] text, with segment ids 0 for the context part
        and 1 for the current-utterance part."""
        text_ids = [self.tokens.get(t, self.unk_id) for t in split_tokens(text)]
        ctx_ids = [self.tokens.get(t, self.unk_id) for t in split_tokens(context)]
        room = max_len - 3 - len(text_ids)
        ctx_ids = ctx_ids[-max(room, 0):] if room > 0 else []
        ids = [self.cls_id] + ctx_ids + [self.sep_id] + text_ids[: max_len - 3]
        types = [0] * (2 + len(ctx_ids)) + [1] * (len(ids) - 2 - len(ctx_ids))
        return ids, types

    def decode_words(self, ids) -> str:
        words = []
        for i in ids:
            token = self.inverse.get(int(i))
            if token is None or token in (PAD, CLS, UNK):
                continue
            if token == EOS:
                break
            words.append(token)
        # reattach commas: "a , b" -> "a, b"
        return " ".join(words).replace(" ,", ",")

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.tokens, fh, ensure_ascii=False)

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))
