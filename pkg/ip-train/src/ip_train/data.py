"""
Dialog JSON-lines reading and training-example construction.

Input files hold one dialog per line: {"id", "seed_id", "utterances":
[{"actor", "text", "intents"}]} with intents as 2-letter codes. Each
utterance becomes one example whose text is the previous utterance (when
any) concatenated with the current one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .labels import canonical_codes, multi_hot, render_label_string

SEQ2SEQ_PREFIX = "multilabel classification: "


@dataclass(frozen=True)
class Example:
    context: str  # previous utterance, "" on dialog openers
    text: str  # current utterance
    codes: tuple[str, ...]

    @property
    def multi_hot(self) -> list[float]:
        return multi_hot(self.codes)

    @property
    def target(self) -> str:
        return render_label_string(self.codes)

    @property
    def seq2seq_input(self) -> str:
        return SEQ2SEQ_PREFIX + f"{self.context} {self.text}".strip()


def read_dialogs(path) -> list[dict]:
    dialogs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                if not obj["utterances"]:
                    raise ValueError("dialog has no utterances")
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
            dialogs.append(obj)
    return dialogs


def build_examples(dialogs, mode: str) -> list[Example]:
    """One example per utterance, carrying the previous utterance as context.

    Encoder mode consumes (context, text) as a sentence pair with
    Example.multi_hot targets; seq2seq mode consumes Example.seq2seq_input
    (prefix + context + text) with Example.target label strings.
    """
    if mode not in ("encoder", "seq2seq"):
        raise ValueError(f"unknown mode {mode!r}")
    examples = []
    for dialog in dialogs:
        prev = ""
        for utt in dialog["utterances"]:
            codes = canonical_codes(utt["intents"])
            examples.append(Example(context=prev, text=utt["text"], codes=codes))
            prev = utt["text"]
    return examples
