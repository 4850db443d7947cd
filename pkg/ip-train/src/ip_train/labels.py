"""
Intent label contract.

The 12 utterance-level intent codes, in canonical order, as used by the
dialog JSON-lines format this harness consumes. Kept self-contained on
purpose: the only coupling to the data-producing pipeline is the file
format itself.
"""

from __future__ import annotations

CODES: tuple[str, ...] = ("OQ", "RQ", "CQ", "FD", "FQ", "IR", "PA", "PF", "NF", "GG", "JK", "O")

LABELS: dict[str, str] = {
    "OQ": "original question",
    "RQ": "repeat question",
    "CQ": "clarifying question",
    "FD": "further details",
    "FQ": "follow up question",
    "IR": "information request",
    "PA": "potential answer",
    "PF": "positive feedback",
    "NF": "negative feedback",
    "GG": "greetings/gratitude",
    "JK": "junk",
    "O": "others",
}

N_LABELS = len(CODES)
CODE_INDEX = {code: i for i, code in enumerate(CODES)}
_BY_LABEL = {label: code for code, label in LABELS.items()}

FALLBACK_CODE = "O"


class UnknownIntent(ValueError):
    pass


def canonical_codes(codes) -> tuple[str, ...]:
    """Deduplicate and order codes canonically; reject unknown ones."""
    unique = set(codes)
    for code in unique:
        if code not in CODE_INDEX:
            raise UnknownIntent(f"unknown intent code {code!r}")
    if not unique:
        raise UnknownIntent("empty intent set")
    return tuple(sorted(unique, key=CODE_INDEX.__getitem__))


def render_label_string(codes) -> str:
    """Comma-joined lowercase labels in canonical order, the seq2seq target."""
    return ", ".join(LABELS[c] for c in canonical_codes(codes))


def parse_label_string(text: str) -> tuple[str, ...]:
    """Inverse of render_label_string; tolerates case, spacing, and a
    trailing period. Raises UnknownIntent when nothing parses."""
    found = []
    for chunk in text.lower().strip().rstrip(".").split(","):
        key = " ".join(chunk.split())
        if not key:
            continue
        code = _BY_LABEL.get(key) or (key.upper() if key.upper() in CODE_INDEX else None)
        if code is None:
            raise UnknownIntent(f"unknown intent label {chunk!r}")
        found.append(code)
    return canonical_codes(found)


def multi_hot(codes) -> list[float]:
    row = [0.0] * N_LABELS
    for code in canonical_codes(codes):
        row[CODE_INDEX[code]] = 1.0
    return row
