"""JSON-Lines persistence of visit logs.

One JSON object per line, so campaign runs can stream and a crash loses at
most one line. Classification is embedded at write time and the raw fields
stay, so analysis-only runs can re-classify under a different tracker set.
The format deliberately drops wall-clock anchors: cookies are stored with
their lifetime, not absolute set/expiry times, which keeps identical crawls
byte-identical regardless of when they ran.
"""

from __future__ import annotations

import json
from typing import IO, Iterable, Iterator, Optional

from .model import (AcceptOutcome, AcceptStatus, CacheMode, CookieRecord,
                    HttpTransaction, SESSION, SiteEntry, VisitLog, VisitPhase)
from .trackers import (TrackerSet, classify_transaction, is_profiling_cookie,
                       _reduce_or_self)


def _cookie_dict(cookie: CookieRecord) -> dict:
    return {
        "name": cookie.name,
        "domain": cookie.domain,
        "lifetime_s": cookie.lifetime_s,
        "profiling": is_profiling_cookie(cookie),
    }


def _jar_cookie_dict(cookie: CookieRecord) -> dict:
    return {
        "name": cookie.name,
        "value": cookie.value,
        "domain": cookie.domain,
        "lifetime_s": cookie.lifetime_s,
    }


def visit_log_to_dict(log: VisitLog, tracker_set: Optional[TrackerSet] = None) -> dict:
    """Render one VisitLog as its wire-format dict.

    Transactions get their class embedded; an already-classified transaction
    keeps its class unless a tracker_set forces re-classification.
    """
    site_domain = _reduce_or_self(log.site.hostname)
    transactions = []
    for txn in log.transactions:
        klass = txn.klass
        if tracker_set is not None:
            klass = classify_transaction(txn, site_domain, tracker_set).value
        transactions.append({
            "url": txn.request_url,
            "host": txn.host,
            "status": txn.status,
            "bytes": txn.bytes,
            "started_at": txn.started_at,
            "finished_at": txn.finished_at,
            "class": klass,
            "cookies": [_cookie_dict(c) for c in txn.set_cookies],
        })
    accept = None
    if log.accept is not None:
        accept = {
            "status": log.accept.status.value,
            "matched_keyword": log.accept.matched_keyword,
            "element_tag": log.accept.element_tag,
        }
    return {
        "site": {
            "url": log.site.url,
            "country": log.site.country,
            "category": log.site.category,
            "rank": log.site.rank,
        },
        "phase": log.phase.encode(),
        "repetition": log.repetition,
        "visited_url": log.visited_url,
        "onload_ms": log.onload_ms,
        "cache_mode": log.cache_mode.value,
        "accept": accept,
        "transactions": transactions,
        "cookies_after": [_jar_cookie_dict(c) for c in log.cookies_after],
        "error": log.error,
        "screenshot_path": log.screenshot_path,
    }


def write_visit_log(sink: IO[str], log: VisitLog,
                    tracker_set: Optional[TrackerSet] = None) -> None:
    sink.write(json.dumps(visit_log_to_dict(log, tracker_set), ensure_ascii=False))
    sink.write("\n")


def _cookie_from_dict(data: dict) -> CookieRecord:
    lifetime = data.get("lifetime_s")
    return CookieRecord(
        name=data["name"],
        value=data.get("value", ""),
        domain=data["domain"],
        set_at=0.0,
        expires_at=SESSION if lifetime is None else float(lifetime),
    )


def visit_log_from_dict(data: dict) -> VisitLog:
    """Rebuild a VisitLog from its wire dict.

    Cookie times are re-anchored at set_at=0 with the stored lifetime;
    absolute wall-clock anchors are not part of the format.
    """
    site = SiteEntry(url=data["site"]["url"], country=data["site"]["country"],
                     category=data["site"]["category"], rank=data["site"]["rank"])
    accept = None
    if data.get("accept") is not None:
        accept = AcceptOutcome(status=AcceptStatus(data["accept"]["status"]),
                               matched_keyword=data["accept"]["matched_keyword"],
                               element_tag=data["accept"]["element_tag"])
    transactions = tuple(
        HttpTransaction(
            request_url=t["url"], host=t["host"], status=t["status"], bytes=t["bytes"],
            started_at=t["started_at"], finished_at=t["finished_at"],
            set_cookies=tuple(_cookie_from_dict(c) for c in t.get("cookies", ())),
            klass=t.get("class"),
        )
        for t in data.get("transactions", ())
    )
    return VisitLog(
        site=site,
        phase=VisitPhase.decode(data["phase"]),
        repetition=data["repetition"],
        visited_url=data["visited_url"],
        cache_mode=CacheMode(data["cache_mode"]),
        onload_ms=data.get("onload_ms"),
        transactions=transactions,
        cookies_after=tuple(_cookie_from_dict(c) for c in data.get("cookies_after", ())),
        accept=accept,
        screenshot_path=data.get("screenshot_path"),
        error=data.get("error"),
    )


def parse_visit_log(line: str) -> VisitLog:
    return visit_log_from_dict(json.loads(line))


def read_visit_logs(lines: Iterable[str]) -> Iterator[VisitLog]:
    for line in lines:
        if line.strip():
            yield parse_visit_log(line)
