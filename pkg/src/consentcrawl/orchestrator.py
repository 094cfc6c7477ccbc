"""Per-site test sequence and the multi-worker campaign runner.

One site sequence is: warm-up visit (cache fill), before-visit with banner
detection and accept click, after-visit when the click landed, then a handful
of randomly sampled internal pages. The campaign repeats the sequence per
repetition with a seeded per-repetition site shuffle and fans sites out over a
pool of workers, each owning one session. Per-site randomness is derived from
the seed and the site URL, so sampling does not depend on scheduling.
"""

from __future__ import annotations

import hashlib
import logging
import queue
import random
import threading
import traceback
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence
from urllib.parse import urldefrag, urljoin, urlparse

from .detector import DomNode, detect_and_accept
from .model import (AcceptOutcome, AcceptStatus, CacheMode, SiteEntry, VisitLog,
                    VisitPhase, additional, AFTER, BEFORE, WARM_UP)
from .session import PageSession, SessionError
from .trackers import InvalidHostname, registrable_domain

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CrawlConfig:
    workers: int = 16
    repetitions: int = 5
    additional_pages: int = 5
    cache_mode: CacheMode = CacheMode.WARM
    settle_ms: int = 5000
    seed: int = 0
    screenshots: bool = False
    screenshot_dir: Optional[str] = None

    def __post_init__(self):
        if self.workers < 1 or self.repetitions < 1 or self.additional_pages < 0:
            raise ValueError("workers/repetitions >= 1, additional_pages >= 0")


@dataclass(frozen=True)
class SiteResult:
    """All visit logs of one site in one repetition, in phase order."""

    site: SiteEntry
    repetition: int
    logs: tuple[VisitLog, ...]
    accept: AcceptOutcome

    def __post_init__(self):
        has_after = any(log.phase == AFTER for log in self.logs)
        if has_after != (self.accept.status is AcceptStatus.ACCEPTED):
            raise ValueError("after-visit log present iff the banner was accepted")


def _site_rng(seed: int, url: str) -> random.Random:
    """Stable per-site stream: scheduling must not change link sampling."""
    digest = hashlib.sha256(url.encode("utf-8")).digest()
    return random.Random(seed ^ int.from_bytes(digest[:8], "big"))


def extract_internal_links(snapshot: Sequence[DomNode], site: SiteEntry,
                           page_url: str) -> list[str]:
    """Anchor destinations on the page that stay within the site.

    http(s) only, resolved against the page URL, same registrable domain as
    the site, deduplicated, the page itself excluded; first-appearance order.
    """
    try:
        site_domain = registrable_domain((urlparse(site.url).hostname or "").lower())
    except InvalidHostname:
        site_domain = (urlparse(site.url).hostname or "").lower()
    links: list[str] = []
    seen: set[str] = set()
    for node in sorted(snapshot, key=lambda n: n.doc_order):
        if node.tag != "a" or not node.href:
            continue
        resolved = urldefrag(urljoin(page_url, node.href)).url
        parsed = urlparse(resolved)
        if parsed.scheme not in ("http", "https") or not parsed.hostname:
            continue
        try:
            link_domain = registrable_domain(parsed.hostname.lower())
        except InvalidHostname:
            continue
        if link_domain != site_domain or resolved == page_url or resolved in seen:
            continue
        seen.add(resolved)
        links.append(resolved)
    return links


def sample_links(links: Sequence[str], k: int, rng: random.Random) -> list[str]:
    """min(k, len) distinct links, uniform without replacement, rng-driven."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return rng.sample(list(links), min(k, len(links)))


def _error_log(site: SiteEntry, phase: VisitPhase, repetition: int, url: str,
               cache_mode: CacheMode, error: Exception,
               accept: Optional[AcceptOutcome] = None) -> VisitLog:
    return VisitLog(site=site, phase=phase, repetition=repetition, visited_url=url,
                    cache_mode=cache_mode, accept=accept,
                    error=f"{type(error).__name__}: {error}")


def run_site(site: SiteEntry, config: CrawlConfig, session: PageSession,
             keywords, repetition: int = 1) -> SiteResult:
    """Run the full test sequence for one site on a fresh profile.

    Cold cache mode clears the cache before every navigate and skips the
    warm-up. A failed before-visit aborts the remaining phases; failures in
    later phases are recorded and the sequence continues.
    """
    session.reset_profile()
    cache = config.cache_mode
    logs: list[VisitLog] = []
    accept = AcceptOutcome(status=AcceptStatus.VISIT_ERROR)

    def shot(phase: VisitPhase) -> Optional[str]:
        if not (config.screenshots and config.screenshot_dir):
            return None
        host = urlparse(site.url).hostname or "site"
        path = f"{config.screenshot_dir}/{host}-r{repetition}-{phase.encode().replace(':', '-')}.png"
        try:
            session.screenshot(path)
            return path
        except SessionError:
            return None

    if cache is CacheMode.WARM:
        try:
            onload = session.navigate(site.url, cache)
            session.drain_observations()  # warm-up traffic is not recorded
            logs.append(VisitLog(site=site, phase=WARM_UP, repetition=repetition,
                                 visited_url=site.url, cache_mode=cache, onload_ms=onload))
        except SessionError as exc:
            logs.append(_error_log(site, WARM_UP, repetition, site.url, cache, exc))

    links_snapshot: list[DomNode] = []
    links_page_url = site.url
    try:
        onload = session.navigate(site.url, cache)
        accept = detect_and_accept(session, keywords, config.settle_ms)
        links_snapshot = session.snapshot_dom()
        transactions, jar = session.drain_observations()
        logs.append(VisitLog(site=site, phase=BEFORE, repetition=repetition,
                             visited_url=site.url, cache_mode=cache, onload_ms=onload,
                             transactions=tuple(transactions), cookies_after=tuple(jar),
                             accept=accept, screenshot_path=shot(BEFORE)))
    except SessionError as exc:
        logs.append(_error_log(site, BEFORE, repetition, site.url, cache, exc, accept=accept))
        return SiteResult(site=site, repetition=repetition, logs=tuple(logs), accept=accept)

    if accept.status is AcceptStatus.ACCEPTED:
        try:
            onload = session.navigate(site.url, cache)
            after_snapshot = session.snapshot_dom()
            transactions, jar = session.drain_observations()
            logs.append(VisitLog(site=site, phase=AFTER, repetition=repetition,
                                 visited_url=site.url, cache_mode=cache, onload_ms=onload,
                                 transactions=tuple(transactions), cookies_after=tuple(jar),
                                 screenshot_path=shot(AFTER)))
            # sample links from the page users actually browse
            links_snapshot = after_snapshot
        except SessionError as exc:
            logs.append(_error_log(site, AFTER, repetition, site.url, cache, exc))

    links = extract_internal_links(links_snapshot, site, links_page_url)
    chosen = sample_links(links, config.additional_pages, _site_rng(config.seed, site.url))
    for index, link in enumerate(chosen, start=1):
        phase = additional(index)
        try:
            onload = session.navigate(link, cache)
            transactions, jar = session.drain_observations()
            logs.append(VisitLog(site=site, phase=phase, repetition=repetition,
                                 visited_url=link, cache_mode=cache, onload_ms=onload,
                                 transactions=tuple(transactions), cookies_after=tuple(jar),
                                 screenshot_path=shot(phase)))
        except SessionError as exc:
            logs.append(_error_log(site, phase, repetition, link, cache, exc))

    return SiteResult(site=site, repetition=repetition, logs=tuple(logs), accept=accept)


@dataclass(frozen=True)
class CampaignItem:
    """One finished site sequence, tagged with its slot in the visit order."""

    repetition: int
    order_index: int
    result: SiteResult


def campaign_order(sites: Sequence[SiteEntry], seed: int, repetition: int) -> list[SiteEntry]:
    """The seeded per-repetition visit order (seed XOR repetition)."""
    order = list(sites)
    random.Random(seed ^ repetition).shuffle(order)
    return order


def run_campaign(sites: Sequence[SiteEntry], config: CrawlConfig,
                 session_factory: Callable[[], PageSession], keywords,
                 ) -> Iterator[CampaignItem]:
    """Visit every site once per repetition, fanned out over a worker pool.

    Results stream out as they complete; order_index preserves the seeded
    visit order so a sink can re-serialize deterministically. Individual site
    failures become errored logs, never campaign aborts.
    """
    if not sites:
        raise ValueError("campaign needs at least one site")

    for repetition in range(1, config.repetitions + 1):
        order = campaign_order(sites, config.seed, repetition)
        jobs: queue.Queue[tuple[int, SiteEntry]] = queue.Queue()
        for index, site in enumerate(order):
            jobs.put((index, site))
        results: queue.Queue[CampaignItem] = queue.Queue()

        def worker():
            session = session_factory()
            try:
                while True:
                    try:
                        index, site = jobs.get_nowait()
                    except queue.Empty:
                        return
                    try:
                        result = run_site(site, config, session, keywords,
                                          repetition=repetition)
                    except Exception as exc:  # defensive: drivers may misbehave
                        logger.error("site %s failed hard: %s\n%s", site.url, exc,
                                     traceback.format_exc())
                        outcome = AcceptOutcome(status=AcceptStatus.VISIT_ERROR)
                        result = SiteResult(
                            site=site, repetition=repetition,
                            logs=(_error_log(site, BEFORE, repetition, site.url,
                                             config.cache_mode, exc, accept=outcome),),
                            accept=outcome)
                    results.put(CampaignItem(repetition, index, result))
            finally:
                session.close()

        threads = [threading.Thread(target=worker, daemon=True)
                   for _ in range(min(config.workers, len(order)))]
        for thread in threads:
            thread.start()
        for _ in range(len(order)):
            yield results.get()
        for thread in threads:
            thread.join()
