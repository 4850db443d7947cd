"""Builders for the harness tests: marker dialogs in the canonical format.

Dialogs are written straight to JSON lines; the file format is the only
contract with the data-producing pipeline. Utterance texts carry MARK_<code>
tokens for their gold intents plus neutral filler, so the corpus is
learnable by construction.
"""

from __future__ import annotations

import json
import random

CODES = ("OQ", "RQ", "CQ", "FD", "FQ", "IR", "PA", "PF", "NF", "GG", "JK", "O")
_FILLER = ("amber", "breeze", "copper", "drift", "ember", "fable", "grove", "harbor")


def marker_dialog(dialog_id: str, turn_codes, rng: random.Random) -> dict:
    utterances = []
    for i, codes in enumerate(turn_codes):
        marks = " ".join(f"MARK_{c.lower()}" for c in codes)
        pad = " ".join(rng.choice(_FILLER) for _ in range(3))
        utterances.append({
            "actor": "User" if i % 2 == 0 else "Agent",
            "text": f"{marks} {pad}.",
            "intents": list(codes),
        })
    return {"id": dialog_id, "seed_id": None, "utterances": utterances}


def marker_corpus(n: int, rng: random.Random, codes=CODES) -> list[dict]:
    dialogs = []
    for i in range(n):
        length = rng.randint(2, 5)
        turns = [[rng.choice(codes)] for _ in range(length)]
        turns[0] = ["OQ"]
        if length > 2 and rng.random() < 0.3:
            turns[1] = sorted({rng.choice(codes), rng.choice(codes)}, key=CODES.index)
        dialogs.append(marker_dialog(f"m{i:04d}", turns, rng))
    return dialogs


def write_dialogs(path, dialogs) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        for d in dialogs:
            fh.write(json.dumps(d, ensure_ascii=False) + "\n")
    return str(path)
