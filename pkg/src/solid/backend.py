"""
Text-generation and embedding backends.

One uniform client interface with two implementations: an OpenAI-compatible
HTTP backend for live runs, and a deterministic offline mock whose outputs
are a pure function of (messages, request_seed). The mock understands the
pipeline's own prompt templates (see prompts.py) and embeds `MARK_xx` tokens
for every `<<INTENT:xx>>` tag it sees, which makes mock-generated corpora
learnable by the intent predictors in tests.
"""

from __future__ import annotations

import hashlib
import random
import re
import threading
import time
from dataclasses import dataclass
from typing import Sequence

from . import prompts
from .taxonomy import IntentCode, parse_intent_code


class BackendError(Exception):
    pass


class Transport(BackendError):
    """Network-level failure that survived the retry budget."""


class RateLimited(Transport):
    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class BadRequest(BackendError):
    """Malformed request; never retried."""


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str


@dataclass(frozen=True)
class GenerationParams:
    model: str = "mock"
    temperature: float = 0.7
    max_tokens: int = 512
    stop: tuple[str, ...] | None = None
    request_seed: int | None = None

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


def _validate_messages(messages: Sequence[ChatMessage]) -> None:
    if not messages:
        raise BadRequest("messages must be non-empty")
    for m in messages:
        if m.role not in ("system", "user", "assistant"):
            raise BadRequest(f"unknown role {m.role!r}")
        if m.role in ("user", "assistant") and not m.content.strip():
            raise BadRequest(f"{m.role} message content must be non-empty")


class ChatBackend:
    """Shared surface: bounded-concurrency complete() and embed()."""

    def __init__(self, max_in_flight: int = 8):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.max_in_flight = max_in_flight
        self._gate = threading.BoundedSemaphore(max_in_flight)

    def identity(self) -> str:
        raise NotImplementedError

    def complete(self, messages: Sequence[ChatMessage], params: GenerationParams) -> str:
        _validate_messages(messages)
        with self._gate:
            return self._complete(list(messages), params)

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        if not texts:
            raise BadRequest("texts must be non-empty")
        for t in texts:
            if not t or not t.strip():
                raise BadRequest("cannot embed empty text")
        with self._gate:
            return self._embed(list(texts))

    def _complete(self, messages: list[ChatMessage], params: GenerationParams) -> str:
        raise NotImplementedError

    def _embed(self, texts: list[str]) -> list[list[float]]:
        raise NotImplementedError


# --- deterministic offline mock ----------------------------------------------

_FILLER = (
    "amber", "breeze", "copper", "drift", "ember", "fable", "grove", "harbor",
    "inlet", "juniper", "kestrel", "lantern", "meadow", "nectar", "orchid",
    "pebble", "quarry", "ridge", "saffron", "thicket", "umber", "violet",
    "willow", "zephyr",
)

_TYPE_HEADS = (
    "Person", "Artist", "Book", "City", "Company", "Planet", "Animal", "Song",
    "Festival", "Language", "Invention", "Monument", "Recipe", "Sport",
    "Instrument", "River", "Mountain", "Museum", "Theory", "Vehicle",
)
_TYPE_MODS = (
    "Ancient", "Modern", "Coastal", "Nomadic", "Digital", "Folk", "Orbital",
    "Regional", "Ceremonial", "Industrial",
)

_ATTRIBUTES = (
    "Occupation", "Financial", "Origin", "Era", "Location", "Reputation",
    "Influence", "Composition", "Scale", "Purpose", "Audience", "Legacy",
    "Rivalries", "Controversies", "Founders", "Materials", "Traditions",
    "Records", "Symbolism", "Affiliations",
)

_NAME_SYLLABLES = ("ba", "ri", "lo", "ven", "da", "mir", "sel", "tor", "una", "wick")
_SURNAMES = ("Hale", "Marsh", "Quill", "Sorel", "Vance", "Wren", "Ferro", "Lark")

_TAG_RE = re.compile(r"<<INTENT:([a-z]+)>>")
_MARK_RE = re.compile(r"MARK_([a-z]+)")


def extract_intent_tags(text: str) -> list[IntentCode]:
    out = []
    for tok in _TAG_RE.findall(text):
        try:
            out.append(parse_intent_code(tok))
        except ValueError:
            continue
    return out


def mark_token(code: IntentCode) -> str:
    return f"MARK_{code.name.lower()}"


class MockBackend(ChatBackend):
    """Pure, offline stand-in for a chat-completion and embedding service.

    Completions are a deterministic function of (messages, request_seed).
    The in-flight counter instruments the concurrency gate for tests; set a
    small nonzero latency to make overlap observable.
    """

    embedding_dim = 64

    def __init__(self, max_in_flight: int = 8, latency: float = 0.0):
        super().__init__(max_in_flight)
        self.latency = latency
        self.completion_calls = 0
        self.embedding_calls = 0
        self.max_observed_in_flight = 0
        self._in_flight = 0
        self._counter_lock = threading.Lock()

    def identity(self) -> str:
        return "mock"

    # -- instrumentation

    def _enter(self):
        with self._counter_lock:
            self._in_flight += 1
            self.max_observed_in_flight = max(self.max_observed_in_flight, self._in_flight)
        if self.latency:
            time.sleep(self.latency)

    def _exit(self):
        with self._counter_lock:
            self._in_flight -= 1

    # -- completion

    def _complete(self, messages: list[ChatMessage], params: GenerationParams) -> str:
        self._enter()
        try:
            with self._counter_lock:
                self.completion_calls += 1
            return self._render(messages, params)
        finally:
            self._exit()

    def _digest(self, messages: list[ChatMessage], params: GenerationParams) -> str:
        h = hashlib.sha256()
        for m in messages:
            h.update(m.role.encode("utf-8"))
            h.update(b"\x1f")
            h.update(m.content.encode("utf-8"))
            h.update(b"\x1e")
        h.update(str(params.request_seed).encode("utf-8"))
        return h.hexdigest()

    def _filler(self, digest: str, n_words: int, offset: int = 0) -> str:
        words = []
        for i in range(n_words):
            nibble = int(digest[(offset + i) % len(digest)], 16)
            words.append(_FILLER[(nibble + i) % len(_FILLER)])
        return " ".join(words)

    def _render(self, messages: list[ChatMessage], params: GenerationParams) -> str:
        last = messages[-1].content
        digest = self._digest(messages, params)

        if prompts.SINGLE_PASS_SENTINEL in last:
            return self._render_single_pass(last, digest)
        if prompts.FEWSHOT_TARGET_SENTINEL in last:
            return self._render_fewshot(last)
        if prompts.MERGE_SENTINEL in last:
            return self._render_merge(last)
        if prompts.ENTITY_TYPES_SENTINEL in last and "entity types" in last:
            return self._render_types(last)
        if prompts.ENTITY_ATTRIBUTES_SENTINEL in last:
            return self._render_attributes(last)
        if prompts.ENTITY_NAMES_SENTINEL in last:
            return self._render_names(last, digest)
        if prompts.BACKGROUND_SENTINEL in last:
            return self._render_background(last, digest)
        if prompts.STARTER_SENTINEL in last:
            return self._render_turn(last, digest, opener=True)
        tags = extract_intent_tags(last)
        if tags:
            return self._render_turn(last, digest, opener=False)
        return f"Mock completion {digest[:12]} {self._filler(digest, 4)}."

    def _render_types(self, last: str) -> str:
        m = re.search(r"list of (\d+) entity types", last)
        n = int(m.group(1)) if m else 100
        combos = len(_TYPE_MODS) * len(_TYPE_HEADS)
        lines = []
        for i in range(n):
            if i < len(_TYPE_HEADS):
                name = _TYPE_HEADS[i]
            else:
                j = i - len(_TYPE_HEADS)
                name = f"{_TYPE_MODS[j % len(_TYPE_MODS)]} {_TYPE_HEADS[(j // len(_TYPE_MODS)) % len(_TYPE_HEADS)]}"
                if j >= combos:
                    name = f"{name} {j}"
            lines.append(f"{i + 1}. {name}.")
        return "\n".join(lines)

    def _render_attributes(self, last: str) -> str:
        m = re.search(r"List (\d+) entity attributes", last)
        n = int(m.group(1)) if m else 10
        lines = []
        for i in range(n):
            base = _ATTRIBUTES[i % len(_ATTRIBUTES)]
            name = base if i < len(_ATTRIBUTES) else f"{base} {i}"
            lines.append(f"{i + 1}. {name}.")
        return "\n".join(lines)

    def _render_names(self, last: str, digest: str) -> str:
        n = int(re.search(r"Generate (\d+) names", last).group(1))
        letter = re.search(r"letter '([A-Za-z])'", last).group(1).lower()
        offset = int(digest[:8], 16)
        lines = []
        for i in range(n):
            s1 = _NAME_SYLLABLES[(offset + i) % len(_NAME_SYLLABLES)]
            s2 = _NAME_SYLLABLES[(offset + 3 * i + 1) % len(_NAME_SYLLABLES)]
            surname = _SURNAMES[(offset + 7 * i) % len(_SURNAMES)]
            lines.append(f"{letter.upper()}{s1}{s2} {surname}")
        closing = f"Every name above starts with the letter {letter} as requested."
        return "\n".join(lines + [closing])

    def _render_background(self, last: str, digest: str) -> str:
        m = re.search(r"about the (.+?) '(.+?)'", last, re.DOTALL)
        etype, name = (m.group(1), m.group(2)) if m else ("entity", "Unknown")
        return (
            f"{name} was a widely discussed {etype.lower()} remembered for the "
            f"{self._filler(digest, 2)} affair. Accounts connect {name} with the "
            f"{self._filler(digest, 2, offset=8)} circle and with years of "
            f"{self._filler(digest, 1, offset=16)} work."
        )

    def _render_turn(self, last: str, digest: str, opener: bool) -> str:
        tags = extract_intent_tags(last)
        marks = " ".join(mark_token(c) for c in tags)
        if opener:
            m = re.search(r"^Entity: (.*)$", last, re.MULTILINE)
            name = m.group(1).strip() if m else "the subject"
            body = f"Tell me about {name} and the {self._filler(digest, 2)} story behind it."
        else:
            body = f"Consider the {self._filler(digest, 3)} and the {self._filler(digest, 2, offset=10)} angle."
        return f"{marks} {body}".strip()

    def _render_merge(self, last: str) -> str:
        parts = []
        for line in last.splitlines():
            m = re.match(r"^\s*\d+\.\s+(.*)$", line)
            if m:
                parts.append(m.group(1).strip().rstrip("."))
        if not parts:
            return "Reply in conversation style."
        return " and ".join(parts) + "."

    def _render_single_pass(self, last: str, digest: str) -> str:
        starter = ""
        m = re.search(r"^Conversation starter: (.*)$", last, re.MULTILINE)
        if m:
            starter = m.group(1).strip()
        blocks = []
        k = 0
        for line in last.splitlines():
            m = re.match(r"^Utterance (\d+) intents: (.*)$", line)
            if not m:
                continue
            k += 1
            labels = _TAG_RE.sub("", m.group(2)).strip()
            tags = extract_intent_tags(m.group(2))
            marks = " ".join(mark_token(c) for c in tags)
            if k == 1 and starter:
                text = starter
            else:
                text = f"{marks} On the {self._filler(digest, 2, offset=k)} side there is more to say.".strip()
            blocks.append(f"Utterance {k}:\nText: {text}\nIntent: {labels}.")
        if not blocks:
            return f"Mock completion {digest[:12]}."
        return "\n\n".join(blocks)

    def _render_fewshot(self, last: str) -> str:
        target = last.rsplit(prompts.FEWSHOT_TARGET_SENTINEL, 1)[1]
        codes = []
        for tok in _MARK_RE.findall(target):
            try:
                code = parse_intent_code(tok)
            except ValueError:
                continue
            if code not in codes:
                codes.append(code)
        if not codes:
            return "O."
        return ", ".join(c.name for c in codes) + "."

    # -- embeddings: stable bag-of-words hashing, L2-normalized

    def _embed(self, texts: list[str]) -> list[list[float]]:
        self._enter()
        try:
            with self._counter_lock:
                self.embedding_calls += 1
            return [self._embed_one(t) for t in texts]
        finally:
            self._exit()

    def _embed_one(self, text: str) -> list[float]:
        vec = [0.0] * self.embedding_dim
        for token in text.lower().split():
            idx = int(hashlib.sha256(token.encode("utf-8")).hexdigest()[:8], 16) % self.embedding_dim
            vec[idx] += 1.0
        norm = sum(v * v for v in vec) ** 0.5
        if norm > 0:
            vec = [v / norm for v in vec]
        return vec


# --- OpenAI-compatible HTTP backend ------------------------------------------


class HttpBackend(ChatBackend):
    """Client for an OpenAI-compatible chat-completions and embeddings endpoint.

    Transient failures (connection errors, 5xx, 429) are retried with jittered
    exponential backoff; 4xx responses other than 429 raise BadRequest
    immediately and are never retried.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        embed_model: str | None = None,
        max_in_flight: int = 8,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        timeout: float = 60.0,
        session=None,
        sleep=time.sleep,
    ):
        super().__init__(max_in_flight)
        if session is None:
            import requests

            session = requests.Session()
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.embed_model = embed_model or model
        self.api_key = api_key
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.timeout = timeout
        self._session = session
        self._sleep = sleep
        self._jitter = random.Random(0x5EED)

    def identity(self) -> str:
        return f"{self.endpoint}::{self.model}"

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _post(self, path: str, body: dict) -> dict:
        url = f"{self.endpoint}{path}"
        last_error: Exception | None = None
        retry_hint = 0.0
        for attempt in range(self.max_attempts):
            if attempt:
                delay = max(self.backoff_base * (2 ** (attempt - 1)), retry_hint)
                self._sleep(delay * (1.0 + 0.25 * self._jitter.random()))
                retry_hint = 0.0
            try:
                resp = self._session.post(url, json=body, headers=self._headers(), timeout=self.timeout)
            except Exception as exc:
                last_error = exc
                continue
            status = getattr(resp, "status_code", 0)
            if status == 429:
                retry_after = None
                try:
                    retry_after = float(resp.headers.get("Retry-After", ""))
                except (TypeError, ValueError):
                    pass
                retry_hint = retry_after or 0.0
                last_error = RateLimited(f"{url}: rate limited", retry_after=retry_after)
                continue
            if 400 <= status < 500:
                raise BadRequest(f"{url}: HTTP {status}: {getattr(resp, 'text', '')[:500]}")
            if status >= 500:
                last_error = Transport(f"{url}: HTTP {status}")
                continue
            return resp.json()
        if isinstance(last_error, RateLimited):
            raise last_error
        raise Transport(f"{url}: failed after {self.max_attempts} attempts: {last_error}")

    def _complete(self, messages: list[ChatMessage], params: GenerationParams) -> str:
        body = {
            "model": params.model if params.model != "mock" else self.model,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        if params.stop:
            body["stop"] = list(params.stop)
        if params.request_seed is not None:
            body["seed"] = params.request_seed
        data = self._post("/chat/completions", body)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise Transport(f"malformed completion response: {exc}") from exc

    def _embed(self, texts: list[str]) -> list[list[float]]:
        data = self._post("/embeddings", {"model": self.embed_model, "input": texts})
        try:
            rows = sorted(data["data"], key=lambda d: d["index"])
            vectors = [list(map(float, r["embedding"])) for r in rows]
        except (KeyError, TypeError) as exc:
            raise Transport(f"malformed embedding response: {exc}") from exc
        if len(vectors) != len(texts):
            raise Transport(f"expected {len(texts)} embeddings, got {len(vectors)}")
        return vectors
