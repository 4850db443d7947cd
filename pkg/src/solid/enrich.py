"""
Hallucinated-entity flagging.

An entity name that cannot be located through the Wikipedia search API is
treated as probably hallucinated. The check is a proxy, not a guarantee;
raw responses are logged for audit. A fixture mode serves tests and
offline runs with zero network calls.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .backend import Transport
from .seeder import Seed, mark

log = logging.getLogger(__name__)

WIKIPEDIA_API = "https://en.wikipedia.org/w/api.php"
USER_AGENT = "solid-entity-check/0.1 (batch data tooling)"


def normalize_title(s: str) -> str:
    return " ".join(s.split()).casefold()


@dataclass
class WikiClient:
    """`fixture` mode answers from a title → exists map; `live` mode hits
    the search API through a rate limiter with one retry."""

    mode: str = "fixture"
    fixture: dict[str, bool] | None = None
    endpoint: str = WIKIPEDIA_API
    user_agent: str = USER_AGENT
    rate_limit: float = 10.0  # requests per second
    session: object = None
    sleep: object = time.sleep
    check_failures: int = field(default=0, init=False)
    _normalized: dict[str, bool] = field(default_factory=dict, init=False, repr=False)
    _last_request: float = field(default=0.0, init=False, repr=False)

    def __post_init__(self):
        if self.mode not in ("live", "fixture"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "fixture":
            self._normalized = {
                normalize_title(k): bool(v) for k, v in (self.fixture or {}).items()
            }
        elif self.session is None:
            import requests

            self.session = requests.Session()

    def _throttle(self) -> None:
        min_interval = 1.0 / self.rate_limit
        now = time.monotonic()
        wait = self._last_request + min_interval - now
        if wait > 0:
            self.sleep(wait)
        self._last_request = time.monotonic()

    def _search(self, query: str) -> list[str]:
        params = {
            "action": "query",
            "list": "search",
            "srsearch": query,
            "srlimit": 10,
            "format": "json",
        }
        last_error = None
        for attempt in range(2):
            self._throttle()
            try:
                resp = self.session.get(
                    self.endpoint,
                    params=params,
                    headers={"User-Agent": self.user_agent},
                    timeout=30,
                )
                if resp.status_code != 200:
                    raise Transport(f"wikipedia search HTTP {resp.status_code}")
                data = resp.json()
                log.debug("wikipedia search %r -> %s", query, json.dumps(data)[:500])
                return [hit.get("title", "") for hit in data["query"]["search"]]
            except Transport as exc:
                last_error = exc
            except Exception as exc:
                last_error = Transport(f"wikipedia search failed: {exc}")
        raise last_error


def entity_exists(client: WikiClient, entity_name: str) -> bool:
    """True iff some search result title matches the name case-insensitively
    after whitespace normalization."""
    if not entity_name.strip():
        raise ValueError("entity name must be non-empty")
    wanted = normalize_title(entity_name)
    if client.mode == "fixture":
        return client._normalized.get(wanted, False)
    titles = client._search(entity_name)
    return any(normalize_title(t) == wanted for t in titles)


def mark_hallucinated(client: WikiClient, seeds: Iterable[Seed]) -> Iterator[Seed]:
    """Set hallucinated = not entity_exists on each seed; a failed check
    leaves the flag unset and bumps client.check_failures. Passing an
    already-flagged stream through again yields identical seeds."""
    for seed in seeds:
        try:
            exists = entity_exists(client, seed.entity_name)
        except Transport as exc:
            log.warning("existence check failed for %r: %s", seed.entity_name, exc)
            client.check_failures += 1
            yield seed
            continue
        yield mark(seed, not exists)


def partition_seeds(seeds: Iterable[Seed]) -> tuple[list[Seed], list[Seed], list[Seed]]:
    """Split flagged seeds into (hallucinated, non_hallucinated, unflagged)."""
    yes: list[Seed] = []
    no: list[Seed] = []
    unknown: list[Seed] = []
    for seed in seeds:
        if seed.hallucinated is None:
            unknown.append(seed)
        elif seed.hallucinated:
            yes.append(seed)
        else:
            no.append(seed)
    return yes, no, unknown
