"""Page-session contract plus the deterministic fixture driver.

A session owns one browser-like context: navigation, DOM snapshots, clicks,
network observations, cache and profile control. The fixture driver replays
PageModel documents with a fake clock, so identical corpus + seed gives
byte-identical logs; the live driver (cdp module) speaks the remote-debugging
wire protocol of a real browser.
"""

from __future__ import annotations

import abc
import threading
from dataclasses import dataclass
from typing import Optional
from urllib.parse import urlparse

from .detector import DomNode
from .model import CacheMode, CookieRecord, HttpTransaction, SESSION
from .trackers import InvalidHostname, registrable_domain

DEFAULT_USER_AGENT = ("Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 "
                      "(KHTML, like Gecko) Chrome/120.0.0.0 Safari/537.36")
DEFAULT_ACCEPT_LANGUAGE = "en-US,en;q=0.9"
DEFAULT_PAGE_TIMEOUT_MS = 60_000


class SessionError(Exception):
    pass


class NavFailure(SessionError):
    """DNS/TLS/connection-level navigation failure."""


class PageTimeout(SessionError):
    """Load event did not fire within the page timeout."""


class StaleRef(SessionError):
    """The clicked node no longer exists in the page."""


class Unsupported(SessionError):
    """The driver cannot perform this operation."""


@dataclass(frozen=True)
class SessionConfig:
    user_agent: str = DEFAULT_USER_AGENT
    accept_language: str = DEFAULT_ACCEPT_LANGUAGE
    page_timeout_ms: int = DEFAULT_PAGE_TIMEOUT_MS


class PageSession(abc.ABC):
    """Behavioral contract shared by the fixture and live drivers.

    All calls for one site-visit sequence must come from the single worker
    that owns the session. After navigate returns, the load event has fired;
    drain_observations returns each transaction exactly once.
    """

    config: SessionConfig

    @abc.abstractmethod
    def navigate(self, url: str, cache_mode: CacheMode) -> float:
        """Load url; COLD clears the cache first. Returns onLoad milliseconds."""

    @abc.abstractmethod
    def snapshot_dom(self) -> list[DomNode]:
        """Preorder snapshot of the rendered document's elements."""

    @abc.abstractmethod
    def click(self, node_ref: str) -> None:
        """Click a node from the most recent snapshot. Raises StaleRef."""

    @abc.abstractmethod
    def drain_observations(self) -> tuple[list[HttpTransaction], list[CookieRecord]]:
        """Transactions since the last drain plus the full cookie jar."""

    @abc.abstractmethod
    def settle(self, ms: int) -> None:
        """Let the page settle for ms before DOM inspection."""

    @abc.abstractmethod
    def clear_cache(self) -> None: ...

    @abc.abstractmethod
    def reset_profile(self) -> None:
        """Fresh profile: empty cache, cookie storage and consent state."""

    @abc.abstractmethod
    def screenshot(self, path: str) -> None:
        """Write a PNG of the current page. Fixture driver raises Unsupported."""

    def close(self) -> None:
        pass


class FakeClock:
    """Deterministic per-session clock; reset at every profile reset."""

    def __init__(self):
        self._now_ms = 0.0

    def now_ms(self) -> float:
        return self._now_ms

    def now_s(self) -> float:
        return self._now_ms / 1000.0

    def advance_ms(self, ms: float) -> None:
        self._now_ms += ms

    def reset(self) -> None:
        self._now_ms = 0.0


# ---------------------------------------------------------------------------
# fixture page model


@dataclass(frozen=True)
class CookieSpec:
    name: str
    value: str = ""
    lifetime_s: Optional[float] = None  # None: session cookie


@dataclass(frozen=True)
class ResourceSpec:
    """One subresource a page pulls in. Resources that set cookies are never
    cached (trackers mark their responses uncacheable)."""

    url: str
    bytes: int
    delay_ms: int = 0
    status: int = 200
    set_cookies: tuple[CookieSpec, ...] = ()

    @property
    def cacheable(self) -> bool:
        return not self.set_cookies and self.status == 200

    @property
    def host(self) -> str:
        return urlparse(self.url).hostname or ""


@dataclass(frozen=True)
class PageModel:
    """Deterministic stand-in for one rendered page.

    post_accept_resources activate for the whole site once the accept_ref node
    has been clicked; they stay empty when no accept node is designated.
    vanish_on_snapshot is a test hook: those refs disappear right after being
    served in a snapshot, so a later click on them raises StaleRef.
    """

    url: str
    dom: tuple[DomNode, ...] = ()
    pre_accept_resources: tuple[ResourceSpec, ...] = ()
    post_accept_resources: tuple[ResourceSpec, ...] = ()
    internal_links: tuple[str, ...] = ()
    accept_ref: Optional[str] = None
    banner_refs: tuple[str, ...] = ()
    doc_bytes: int = 2048
    doc_delay_ms: int = 10
    nav_error: Optional[str] = None
    vanish_on_snapshot: tuple[str, ...] = ()

    def __post_init__(self):
        if self.post_accept_resources and self.accept_ref is None:
            raise ValueError("post_accept_resources need a designated accept_ref")

    @property
    def host(self) -> str:
        return urlparse(self.url).hostname or ""

    def to_json_dict(self) -> dict:
        return {
            "url": self.url,
            "dom": [vars(n) for n in self.dom],
            "pre_accept_resources": [_resource_dict(r) for r in self.pre_accept_resources],
            "post_accept_resources": [_resource_dict(r) for r in self.post_accept_resources],
            "internal_links": list(self.internal_links),
            "accept_ref": self.accept_ref,
            "banner_refs": list(self.banner_refs),
            "doc_bytes": self.doc_bytes,
            "doc_delay_ms": self.doc_delay_ms,
            "nav_error": self.nav_error,
            "vanish_on_snapshot": list(self.vanish_on_snapshot),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PageModel":
        return cls(
            url=data["url"],
            dom=tuple(DomNode(**n) for n in data["dom"]),
            pre_accept_resources=tuple(_resource_from_dict(r)
                                       for r in data["pre_accept_resources"]),
            post_accept_resources=tuple(_resource_from_dict(r)
                                        for r in data["post_accept_resources"]),
            internal_links=tuple(data["internal_links"]),
            accept_ref=data.get("accept_ref"),
            banner_refs=tuple(data.get("banner_refs", ())),
            doc_bytes=data.get("doc_bytes", 2048),
            doc_delay_ms=data.get("doc_delay_ms", 10),
            nav_error=data.get("nav_error"),
            vanish_on_snapshot=tuple(data.get("vanish_on_snapshot", ())),
        )


def _resource_dict(res: ResourceSpec) -> dict:
    return {
        "url": res.url, "bytes": res.bytes, "delay_ms": res.delay_ms,
        "status": res.status,
        "set_cookies": [vars(c) for c in res.set_cookies],
    }


def _resource_from_dict(data: dict) -> ResourceSpec:
    return ResourceSpec(
        url=data["url"], bytes=data["bytes"], delay_ms=data.get("delay_ms", 0),
        status=data.get("status", 200),
        set_cookies=tuple(CookieSpec(**c) for c in data.get("set_cookies", ())),
    )


def _site_scope(url: str) -> str:
    host = (urlparse(url).hostname or "").lower()
    try:
        return registrable_domain(host)
    except InvalidHostname:
        return host


class FixtureOrigin:
    """Shared in-process origin: the corpus index plus request counters.

    Counters are keyed (host, path) and updated under a lock, so concurrent
    sessions can share one origin.
    """

    def __init__(self, models: dict[str, PageModel] | list[PageModel]):
        if isinstance(models, list):
            models = {m.url: m for m in models}
        self._models = dict(models)
        self._counters: dict[tuple[str, str], int] = {}
        self._lock = threading.Lock()

    def model_for(self, url: str) -> PageModel:
        try:
            return self._models[url]
        except KeyError:
            raise NavFailure(f"no fixture page at {url}") from None

    def record(self, url: str) -> None:
        parsed = urlparse(url)
        key = (parsed.hostname or "", parsed.path or "/")
        with self._lock:
            self._counters[key] = self._counters.get(key, 0) + 1

    def counters(self) -> dict[tuple[str, str], int]:
        with self._lock:
            return dict(self._counters)

    def reset_counters(self) -> None:
        with self._lock:
            self._counters.clear()


class FixtureSession(PageSession):
    """Deterministic driver replaying PageModels against a FixtureOrigin.

    Fetch model: the document is always fetched from the origin; subresources
    start once the document arrived and load in parallel, so onLoad is the
    document delay plus the slowest uncached fetch.
    """

    def __init__(self, origin: FixtureOrigin, config: SessionConfig = SessionConfig(),
                 clock: Optional[FakeClock] = None):
        self.origin = origin
        self.config = config
        self.clock = clock or FakeClock()
        self._cache: set[str] = set()
        self._consented_sites: set[str] = set()
        self._jar: dict[tuple[str, str], CookieRecord] = {}
        self._pending: list[HttpTransaction] = []
        self._model: Optional[PageModel] = None
        self._gone_refs: set[str] = set()

    # -- navigation ---------------------------------------------------------

    def navigate(self, url: str, cache_mode: CacheMode) -> float:
        model = self.origin.model_for(url)
        if model.nav_error == "timeout":
            raise PageTimeout(f"load event not fired within {self.config.page_timeout_ms} ms")
        if model.nav_error:
            raise NavFailure(model.nav_error)
        if cache_mode is CacheMode.COLD:
            self.clear_cache()
        self._model = model
        self._gone_refs = set()

        nav_start_s = self.clock.now_s()
        doc_done = float(model.doc_delay_ms)
        self.origin.record(url)
        self._pending.append(HttpTransaction(
            request_url=url, host=model.host, status=200, bytes=model.doc_bytes,
            started_at=0.0, finished_at=doc_done))

        onload = doc_done
        consented = _site_scope(url) in self._consented_sites
        resources = list(model.pre_accept_resources)
        if consented:
            resources += list(model.post_accept_resources)
        for res in resources:
            if res.cacheable and res.url in self._cache:
                self._pending.append(HttpTransaction(
                    request_url=res.url, host=res.host, status=res.status,
                    bytes=res.bytes, started_at=doc_done, finished_at=doc_done))
                continue
            self.origin.record(res.url)
            finished = doc_done + res.delay_ms
            cookies = tuple(
                self._set_cookie(spec, res.host, nav_start_s + finished / 1000.0)
                for spec in res.set_cookies
            )
            self._pending.append(HttpTransaction(
                request_url=res.url, host=res.host, status=res.status,
                bytes=res.bytes, started_at=doc_done, finished_at=finished,
                set_cookies=cookies))
            if res.cacheable:
                self._cache.add(res.url)
            onload = max(onload, finished)

        if onload > self.config.page_timeout_ms:
            raise PageTimeout(f"load event not fired within {self.config.page_timeout_ms} ms")
        self.clock.advance_ms(onload)
        return onload

    def _set_cookie(self, spec: CookieSpec, host: str, set_at_s: float) -> CookieRecord:
        expires = SESSION if spec.lifetime_s is None else set_at_s + spec.lifetime_s
        record = CookieRecord(name=spec.name, value=spec.value, domain=host,
                              set_at=set_at_s, expires_at=expires)
        self._jar[(host, spec.name)] = record
        return record

    # -- inspection & interaction -------------------------------------------

    def snapshot_dom(self) -> list[DomNode]:
        if self._model is None:
            raise SessionError("snapshot before navigation")
        consented = _site_scope(self._model.url) in self._consented_sites
        hidden = set(self._model.banner_refs) if consented else set()
        nodes = [n for n in self._model.dom
                 if n.node_ref not in hidden and n.node_ref not in self._gone_refs]
        self._gone_refs.update(self._model.vanish_on_snapshot)
        return nodes

    def click(self, node_ref: str) -> None:
        if self._model is None:
            raise SessionError("click before navigation")
        if node_ref in self._gone_refs:
            raise StaleRef(node_ref)
        if not any(n.node_ref == node_ref for n in self._model.dom):
            raise StaleRef(node_ref)
        if node_ref == self._model.accept_ref:
            self._consented_sites.add(_site_scope(self._model.url))

    def drain_observations(self) -> tuple[list[HttpTransaction], list[CookieRecord]]:
        drained = self._pending
        self._pending = []
        jar = [self._jar[key] for key in sorted(self._jar)]
        return drained, jar

    # -- environment control -------------------------------------------------

    def settle(self, ms: int) -> None:
        self.clock.advance_ms(ms)

    def clear_cache(self) -> None:
        self._cache.clear()

    def reset_profile(self) -> None:
        self._cache.clear()
        self._jar.clear()
        self._consented_sites.clear()
        self._pending.clear()
        self._model = None
        self._gone_refs = set()
        self.clock.reset()

    def screenshot(self, path: str) -> None:
        raise Unsupported("fixture driver cannot take screenshots")
