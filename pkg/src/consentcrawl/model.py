"""Shared domain types: sites, visit phases, HTTP transactions, cookies, visit logs.

Everything here is an immutable value record, safe to hand between worker
threads. Timestamps inside a visit are monotonic milliseconds from navigation
start; cookie times are wall-clock seconds. The two are never compared.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from typing import Optional
from urllib.parse import urlparse

SITE_LIST_HEADER = ["url", "country", "category", "rank"]

# Cookies without an expiry use None, the "session cookie" marker.
SESSION = None


class MalformedRow(ValueError):
    """A site-list row with an unparsable URL or non-integer rank."""

    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"malformed site-list row at line {line_no}" + (f": {reason}" if reason else ""))


class PhaseKind(str, Enum):
    WARM_UP = "warmup"
    BEFORE = "before"
    AFTER = "after"
    ADDITIONAL = "additional"


class CacheMode(str, Enum):
    WARM = "warm"
    COLD = "cold"


class AcceptStatus(str, Enum):
    ACCEPTED = "accepted"
    NO_BANNER_MATCH = "no_banner_match"
    CLICK_FAILED = "click_failed"
    VISIT_ERROR = "visit_error"


@dataclass(frozen=True)
class SiteEntry:
    """One target website, with the country/category/rank tags used in breakdowns."""

    url: str
    country: str = ""
    category: str = ""
    rank: Optional[int] = None

    def __post_init__(self):
        parsed = urlparse(self.url)
        if parsed.scheme not in ("http", "https") or not parsed.hostname:
            raise ValueError(f"SiteEntry.url must be an absolute http(s) URL: {self.url!r}")
        if self.rank is not None and self.rank < 1:
            raise ValueError(f"SiteEntry.rank must be >= 1, got {self.rank}")

    @property
    def hostname(self) -> str:
        return urlparse(self.url).hostname or ""


@dataclass(frozen=True)
class VisitPhase:
    """Which leg of the test sequence a visit belongs to.

    additional_index is 1-based and present only for ADDITIONAL phases.
    """

    kind: PhaseKind
    additional_index: Optional[int] = None

    def __post_init__(self):
        if self.kind is PhaseKind.ADDITIONAL:
            if self.additional_index is None or self.additional_index < 1:
                raise ValueError("additional phases need additional_index >= 1")
        elif self.additional_index is not None:
            raise ValueError(f"additional_index only valid for additional phases, not {self.kind}")

    def encode(self) -> str:
        if self.kind is PhaseKind.ADDITIONAL:
            return f"additional:{self.additional_index}"
        return self.kind.value

    @classmethod
    def decode(cls, text: str) -> "VisitPhase":
        if text.startswith("additional:"):
            return cls(PhaseKind.ADDITIONAL, int(text.split(":", 1)[1]))
        return cls(PhaseKind(text))


WARM_UP = VisitPhase(PhaseKind.WARM_UP)
BEFORE = VisitPhase(PhaseKind.BEFORE)
AFTER = VisitPhase(PhaseKind.AFTER)


def additional(index: int) -> VisitPhase:
    return VisitPhase(PhaseKind.ADDITIONAL, index)


@dataclass(frozen=True)
class CookieRecord:
    """One stored cookie. expires_at is wall-clock seconds, or SESSION (None)."""

    name: str
    value: str
    domain: str
    set_at: float = 0.0
    expires_at: Optional[float] = SESSION

    def __post_init__(self):
        if self.expires_at is not SESSION and self.expires_at < self.set_at:
            raise ValueError("cookie expires before it is set")

    @property
    def is_session(self) -> bool:
        return self.expires_at is SESSION

    @property
    def lifetime_s(self) -> Optional[float]:
        if self.is_session:
            return None
        return self.expires_at - self.set_at


@dataclass(frozen=True)
class HttpTransaction:
    """One network fetch observed during a visit.

    status 0 means the fetch failed before a response arrived. Times are
    monotonic milliseconds relative to navigation start. bytes counts the
    decoded response body. klass is filled by the tracker classifier at log
    time and is None while the transaction is raw.
    """

    request_url: str
    host: str
    status: int
    bytes: int
    started_at: float
    finished_at: float
    set_cookies: tuple[CookieRecord, ...] = ()
    klass: Optional[str] = None

    def __post_init__(self):
        if self.finished_at < self.started_at:
            raise ValueError("transaction finished before it started")
        if self.bytes < 0:
            raise ValueError("transaction bytes must be >= 0")


@dataclass(frozen=True)
class AcceptOutcome:
    """Result of the banner detect-and-click attempt on a Before visit."""

    status: AcceptStatus
    matched_keyword: Optional[str] = None
    element_tag: Optional[str] = None

    def __post_init__(self):
        needs_keyword = self.status in (AcceptStatus.ACCEPTED, AcceptStatus.CLICK_FAILED)
        if needs_keyword and not self.matched_keyword:
            raise ValueError(f"{self.status.value} outcome requires matched_keyword")
        if not needs_keyword and self.matched_keyword is not None:
            raise ValueError(f"{self.status.value} outcome must not carry matched_keyword")


@dataclass(frozen=True)
class VisitLog:
    """Everything observed in one page visit.

    Exactly one of onload_ms / error is present. Warm-up logs may carry empty
    transaction and cookie lists even though the browser fetched the page.
    """

    site: SiteEntry
    phase: VisitPhase
    repetition: int
    visited_url: str
    cache_mode: CacheMode
    onload_ms: Optional[float] = None
    transactions: tuple[HttpTransaction, ...] = ()
    cookies_after: tuple[CookieRecord, ...] = ()
    accept: Optional[AcceptOutcome] = None
    screenshot_path: Optional[str] = None
    error: Optional[str] = None

    def __post_init__(self):
        if (self.onload_ms is None) == (self.error is None):
            raise ValueError("exactly one of onload_ms / error must be set")
        if self.repetition < 1:
            raise ValueError("repetition is 1-based")
        if self.onload_ms is not None and self.onload_ms < 0:
            raise ValueError("onload_ms must be >= 0")

    @property
    def ok(self) -> bool:
        return self.error is None


def parse_site_list(content: str) -> list[SiteEntry]:
    """Parse the site-list CSV (header ``url,country,category,rank``).

    Full-line ``#`` comments are skipped. Duplicate URLs are retained: a URL
    may rank in several countries. Raises MalformedRow with the physical
    1-based line number on bad rows.
    """
    entries: list[SiteEntry] = []
    lines = content.splitlines()
    header_seen = False
    for line_no, line in enumerate(lines, start=1):
        if line.strip().startswith("#") or not line.strip():
            continue
        row = next(csv.reader([line]))
        if not header_seen:
            if [c.strip() for c in row] != SITE_LIST_HEADER:
                raise MalformedRow(line_no, f"expected header {','.join(SITE_LIST_HEADER)}")
            header_seen = True
            continue
        row = row + [""] * (len(SITE_LIST_HEADER) - len(row))
        url, country, category, rank_text = (c.strip() for c in row[:4])
        rank: Optional[int]
        if rank_text:
            try:
                rank = int(rank_text)
            except ValueError:
                raise MalformedRow(line_no, f"non-integer rank {rank_text!r}") from None
        else:
            rank = None
        try:
            entries.append(SiteEntry(url=url, country=country, category=category, rank=rank))
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from None
    if not header_seen:
        raise MalformedRow(1, "missing header")
    return entries


def serialize_site_list(entries: list[SiteEntry]) -> str:
    """Inverse of parse_site_list: parse(serialize(entries)) == entries."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SITE_LIST_HEADER)
    for entry in entries:
        writer.writerow([entry.url, entry.country, entry.category,
                         "" if entry.rank is None else str(entry.rank)])
    return buf.getvalue()
