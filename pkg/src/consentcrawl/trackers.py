"""Tracker-set construction and transaction classification.

A domain counts as tracking when it appears in at least two of the configured
source lists. A transaction is a Tracker only when its registrable domain is
tracking AND the transaction sets a profiling cookie (lifetime strictly longer
than 30 days) scoped to that domain. Everything else from a foreign domain is
Third-Party; same registrable domain as the site is First-Party.
"""

from __future__ import annotations

import importlib.resources
import ipaddress
import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .model import CookieRecord, HttpTransaction

logger = logging.getLogger(__name__)

# "One month" fixed to 30 days; strictly longer than this is profiling.
PROFILING_LIFETIME_S = 30 * 86400


class InvalidHostname(ValueError):
    pass


class MissingSourceFile(FileNotFoundError):
    pass


class TrackerConfigError(ValueError):
    pass


class DomainClass(str, Enum):
    FIRST_PARTY = "first_party"
    THIRD_PARTY = "third_party"
    TRACKER = "tracker"


def _load_two_label_suffixes() -> frozenset[str]:
    content = importlib.resources.files("consentcrawl.data").joinpath(
        "two_label_suffixes.txt").read_text(encoding="utf-8")
    return frozenset(
        line.strip() for line in content.splitlines()
        if line.strip() and not line.startswith("#")
    )


TWO_LABEL_SUFFIXES = _load_two_label_suffixes()


def _is_ip_literal(hostname: str) -> bool:
    try:
        ipaddress.ip_address(hostname.strip("[]"))
        return True
    except ValueError:
        return False


def registrable_domain(hostname: str) -> str:
    """Truncate a hostname after its second label (third for co.uk-style TLDs).

    Expects a lowercase hostname without a trailing dot. IP literals pass
    through unchanged. Raises InvalidHostname for empty or single-label names
    and for bare two-label ccTLD suffixes, which have no registrable part.
    """
    if not hostname:
        raise InvalidHostname("empty hostname")
    if _is_ip_literal(hostname):
        return hostname
    labels = hostname.split(".")
    if len(labels) < 2 or not all(labels):
        raise InvalidHostname(f"no registrable domain in {hostname!r}")
    last_two = ".".join(labels[-2:])
    if last_two in TWO_LABEL_SUFFIXES:
        if len(labels) < 3:
            raise InvalidHostname(f"{hostname!r} is a public suffix")
        return ".".join(labels[-3:])
    return last_two


@dataclass(frozen=True)
class TrackerSet:
    """Registrable domains seen in tracker source lists, with per-domain counts."""

    domains: Mapping[str, int]
    sources: tuple[str, ...]

    def is_tracking(self, domain: str) -> bool:
        return self.domains.get(domain, 0) >= 2

    def tracking_domains(self) -> set[str]:
        return {d for d, n in self.domains.items() if n >= 2}


def load_tracker_set(manifest: Mapping[str, str | Path] | str | Path) -> TrackerSet:
    """Build the merged tracker set from a manifest of source-name -> list file.

    The manifest is either a mapping or the path of a JSON file holding one.
    Each list file has one hostname per line (UTF-8, ``#`` comments); every
    hostname is reduced to its registrable domain, and a domain's count is the
    number of distinct sources listing it. Unreducible lines are skipped with
    a warning. Fewer than two sources makes the >=2-lists rule inapplicable.
    """
    if isinstance(manifest, (str, Path)):
        manifest_path = Path(manifest)
        if not manifest_path.exists():
            raise MissingSourceFile(str(manifest_path))
        mapping: Mapping[str, str | Path] = json.loads(manifest_path.read_text(encoding="utf-8"))
        base = manifest_path.parent
    else:
        mapping = manifest
        base = Path(".")

    if len(mapping) < 2:
        raise TrackerConfigError("need at least two tracker sources for the >=2-lists rule")

    counts: dict[str, int] = {}
    for source, file_path in mapping.items():
        path = Path(file_path)
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise MissingSourceFile(f"{source}: {path}")
        listed: set[str] = set()
        for line in path.read_text(encoding="utf-8").splitlines():
            entry = line.strip().lower().lstrip(".")
            if not entry or entry.startswith("#"):
                continue
            try:
                listed.add(registrable_domain(entry))
            except InvalidHostname:
                logger.warning("tracker source %s: skipping unreducible entry %r", source, entry)
        for domain in listed:
            counts[domain] = counts.get(domain, 0) + 1
    return TrackerSet(domains=counts, sources=tuple(mapping))


def is_profiling_cookie(cookie: CookieRecord) -> bool:
    """True iff the cookie outlives 30 days. Session cookies never profile."""
    if cookie.is_session:
        return False
    return (cookie.expires_at - cookie.set_at) > PROFILING_LIFETIME_S


def _reduce_or_self(hostname: str) -> str:
    try:
        return registrable_domain(hostname.lower().rstrip("."))
    except InvalidHostname:
        return hostname.lower().rstrip(".")


def classify_transaction(txn: HttpTransaction, site_domain: str,
                         tracker_set: TrackerSet) -> DomainClass:
    """Assign First-Party / Third-Party / Tracker to one transaction.

    site_domain must already be registrable-reduced. Tracker status requires a
    profiling cookie set by this transaction whose domain scope matches the
    transaction host; a tracking domain without one stays Third-Party.
    """
    txn_domain = _reduce_or_self(txn.host)
    if txn_domain == site_domain:
        return DomainClass.FIRST_PARTY
    if tracker_set.is_tracking(txn_domain):
        for cookie in txn.set_cookies:
            if _reduce_or_self(cookie.domain.lstrip(".")) == txn_domain and is_profiling_cookie(cookie):
                return DomainClass.TRACKER
    return DomainClass.THIRD_PARTY


def classify_all(transactions: Iterable[HttpTransaction], site_domain: str,
                 tracker_set: TrackerSet) -> list[DomainClass]:
    return [classify_transaction(t, site_domain, tracker_set) for t in transactions]
