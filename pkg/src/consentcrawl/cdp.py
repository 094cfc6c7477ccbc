"""Live driver: a PageSession over a browser remote-debugging endpoint.

Speaks the DevTools wire protocol directly (JSON over one WebSocket) instead
of a WebDriver stack: per-request network events and explicit cache clearing
are exactly what the cold-cache mode and transaction capture need. DOM
snapshots and clicks run through an injected in-page probe script; its source
is produced by the frontend package and loaded as text (see load_probe_script).

One CdpSession per worker thread; nothing here is shared.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import time
import urllib.request
from email.utils import parsedate_to_datetime
from pathlib import Path
from typing import Optional
from urllib.parse import urlparse

from websockets.sync.client import connect as ws_connect

from .detector import DomNode
from .model import CacheMode, CookieRecord, HttpTransaction, SESSION
from .session import (NavFailure, PageSession, PageTimeout, SessionConfig,
                      SessionError, StaleRef, Unsupported)

logger = logging.getLogger(__name__)

PROBE_ENV_VAR = "CONSENTCRAWL_PROBE_JS"
PROBE_SEARCH_PATHS = [
    "frontend/dist/dom-probe.js",
    "dist/dom-probe.js",
]


def load_probe_script(path: Optional[str] = None) -> str:
    """Locate the injectable DOM-probe script (built by the frontend package)."""
    candidates = []
    if path:
        candidates.append(Path(path))
    env = os.environ.get(PROBE_ENV_VAR)
    if env:
        candidates.append(Path(env))
    here = Path.cwd()
    for rel in PROBE_SEARCH_PATHS:
        candidates.extend(parent / rel for parent in [here, *here.parents])
    for candidate in candidates:
        if candidate.is_file():
            return candidate.read_text(encoding="utf-8")
    raise Unsupported(
        "dom-probe script not found; build the frontend package or set "
        f"${PROBE_ENV_VAR}")


# ---------------------------------------------------------------------------
# header parsing helpers (pure, unit-tested without a browser)


def split_set_cookie(headers: dict) -> list[str]:
    """DevTools merges repeated Set-Cookie headers with newlines."""
    lines: list[str] = []
    for name, value in headers.items():
        if name.lower() == "set-cookie":
            lines.extend(v for v in value.split("\n") if v.strip())
    return lines


def parse_set_cookie(line: str, request_host: str, now_s: float) -> Optional[CookieRecord]:
    """One Set-Cookie header line to a CookieRecord; Max-Age beats Expires."""
    parts = [p.strip() for p in line.split(";")]
    if not parts or "=" not in parts[0]:
        return None
    name, _, value = parts[0].partition("=")
    domain = request_host
    max_age: Optional[float] = None
    expires_abs: Optional[float] = None
    for attr in parts[1:]:
        key, _, attr_value = attr.partition("=")
        key = key.strip().lower()
        if key == "domain" and attr_value:
            domain = attr_value.strip().lstrip(".").lower()
        elif key == "max-age":
            try:
                max_age = float(attr_value.strip())
            except ValueError:
                pass
        elif key == "expires":
            try:
                expires_abs = parsedate_to_datetime(attr_value.strip()).timestamp()
            except (TypeError, ValueError):
                pass
    if max_age is not None:
        expires = now_s + max_age
    elif expires_abs is not None:
        expires = max(expires_abs, now_s)
    else:
        expires = SESSION
    return CookieRecord(name=name.strip(), value=value.strip(), domain=domain,
                        set_at=now_s, expires_at=expires)


class TransactionAssembler:
    """Folds the per-request DevTools network events into HttpTransactions.

    Times come out in milliseconds relative to the navigation-start event
    timestamp; bytes count decoded body data (dataReceived sums).
    """

    def __init__(self):
        self.nav_start_ts: Optional[float] = None
        self._live: dict[str, dict] = {}
        self.finished: list[HttpTransaction] = []

    def _rel_ms(self, timestamp: float) -> float:
        if self.nav_start_ts is None:
            self.nav_start_ts = timestamp
        return max(0.0, (timestamp - self.nav_start_ts) * 1000.0)

    def on_event(self, method: str, params: dict, now_s: float) -> None:
        if method == "Network.requestWillBeSent":
            url = params.get("request", {}).get("url", "")
            if url.startswith("data:"):
                return
            self._live[params["requestId"]] = {
                "url": url,
                "host": (urlparse(url).hostname or "").lower(),
                "status": 0,
                "bytes": 0,
                "started_at": self._rel_ms(params.get("timestamp", 0.0)),
                "finished_at": None,
                "cookies": [],
            }
        elif method == "Network.responseReceived":
            entry = self._live.get(params.get("requestId", ""))
            if entry is None:
                return
            response = params.get("response", {})
            entry["status"] = response.get("status", 0)
            for line in split_set_cookie(response.get("headers", {})):
                cookie = parse_set_cookie(line, entry["host"], now_s)
                if cookie is not None:
                    entry["cookies"].append(cookie)
        elif method == "Network.responseReceivedExtraInfo":
            entry = self._live.get(params.get("requestId", ""))
            if entry is None:
                return
            for line in split_set_cookie(params.get("headers", {})):
                cookie = parse_set_cookie(line, entry["host"], now_s)
                if cookie is not None and cookie.name not in {c.name for c in entry["cookies"]}:
                    entry["cookies"].append(cookie)
        elif method == "Network.dataReceived":
            entry = self._live.get(params.get("requestId", ""))
            if entry is not None:
                entry["bytes"] += params.get("dataLength", 0)
        elif method in ("Network.loadingFinished", "Network.loadingFailed"):
            entry = self._live.pop(params.get("requestId", ""), None)
            if entry is None:
                return
            finished = self._rel_ms(params.get("timestamp", 0.0))
            self.finished.append(HttpTransaction(
                request_url=entry["url"], host=entry["host"],
                status=entry["status"] if method == "Network.loadingFinished" else 0,
                bytes=entry["bytes"],
                started_at=entry["started_at"],
                finished_at=max(finished, entry["started_at"]),
                set_cookies=tuple(entry["cookies"]),
            ))

    def flush_incomplete(self) -> None:
        """Treat still-inflight requests as failed fetches at drain time."""
        for entry in self._live.values():
            self.finished.append(HttpTransaction(
                request_url=entry["url"], host=entry["host"], status=0,
                bytes=entry["bytes"], started_at=entry["started_at"],
                finished_at=entry["started_at"], set_cookies=tuple(entry["cookies"])))
        self._live.clear()

    def take(self) -> list[HttpTransaction]:
        done, self.finished = self.finished, []
        return done


# ---------------------------------------------------------------------------
# the session


class CdpSession(PageSession):
    def __init__(self, endpoint: str, config: SessionConfig = SessionConfig(),
                 probe_source: Optional[str] = None):
        self.config = config
        self.endpoint = endpoint
        self._probe_source = probe_source
        self._probe_injected = False
        self._message_id = 0
        self._assembler = TransactionAssembler()
        self._load_fired = False
        self._ws = ws_connect(self._debugger_url(endpoint), max_size=64 * 1024 * 1024)
        for method in ("Page.enable", "Network.enable", "Runtime.enable"):
            self._send(method)
        self._send("Network.setUserAgentOverride", {
            "userAgent": config.user_agent,
            "acceptLanguage": config.accept_language,
        })

    @staticmethod
    def _debugger_url(endpoint: str) -> str:
        if endpoint.startswith(("ws://", "wss://")):
            return endpoint
        base = f"http://{endpoint}"
        request = urllib.request.Request(f"{base}/json/list")
        try:
            with urllib.request.urlopen(request, timeout=10) as response:
                targets = json.loads(response.read())
        except OSError as exc:
            raise NavFailure(f"cannot reach debugging endpoint {endpoint}: {exc}") from exc
        for target in targets:
            if target.get("type") == "page" and target.get("webSocketDebuggerUrl"):
                return target["webSocketDebuggerUrl"]
        request = urllib.request.Request(f"{base}/json/new?url=about:blank", method="PUT")
        with urllib.request.urlopen(request, timeout=10) as response:
            target = json.loads(response.read())
        if not target.get("webSocketDebuggerUrl"):
            raise NavFailure(f"no debuggable page target at {endpoint}")
        return target["webSocketDebuggerUrl"]

    # -- wire plumbing -------------------------------------------------------

    def _send(self, method: str, params: Optional[dict] = None) -> dict:
        self._message_id += 1
        message_id = self._message_id
        self._ws.send(json.dumps({"id": message_id, "method": method,
                                  "params": params or {}}))
        deadline = time.monotonic() + self.config.page_timeout_ms / 1000.0 + 10
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise SessionError(f"no response to {method}")
            try:
                raw = self._ws.recv(timeout=remaining)
            except TimeoutError:
                raise SessionError(f"no response to {method}") from None
            message = json.loads(raw)
            if message.get("id") == message_id:
                if "error" in message:
                    raise SessionError(f"{method}: {message['error'].get('message')}")
                return message.get("result", {})
            self._dispatch_event(message)

    def _dispatch_event(self, message: dict) -> None:
        method = message.get("method", "")
        params = message.get("params", {})
        if method == "Page.loadEventFired":
            self._load_fired = True
        elif method.startswith("Network."):
            self._assembler.on_event(method, params, time.time())

    def _pump(self, timeout_s: float) -> bool:
        try:
            raw = self._ws.recv(timeout=timeout_s)
        except TimeoutError:
            return False
        self._dispatch_event(json.loads(raw))
        return True

    def _drain_pending_events(self, grace_s: float = 0.2) -> None:
        deadline = time.monotonic() + grace_s
        while time.monotonic() < deadline:
            if not self._pump(timeout_s=max(0.01, deadline - time.monotonic())):
                break

    # -- PageSession contract --------------------------------------------------

    def navigate(self, url: str, cache_mode: CacheMode) -> float:
        if cache_mode is CacheMode.COLD:
            self.clear_cache()
            self._send("Network.setCacheDisabled", {"cacheDisabled": True})
        else:
            self._send("Network.setCacheDisabled", {"cacheDisabled": False})
        self._load_fired = False
        self._probe_injected = False
        self._assembler.nav_start_ts = None
        started = time.monotonic()
        result = self._send("Page.navigate", {"url": url})
        if result.get("errorText"):
            raise NavFailure(result["errorText"])
        deadline = started + self.config.page_timeout_ms / 1000.0
        while not self._load_fired:
            if time.monotonic() > deadline:
                raise PageTimeout(f"load event not fired within {self.config.page_timeout_ms} ms")
            self._pump(timeout_s=min(0.25, max(0.01, deadline - time.monotonic())))
        self._drain_pending_events()
        measured_ms = (time.monotonic() - started) * 1000.0
        try:
            timing = self._evaluate(
                "performance.timing.loadEventStart - performance.timing.navigationStart")
            if isinstance(timing, (int, float)) and timing > 0:
                return float(timing)
        except SessionError:
            pass
        return measured_ms

    def _evaluate(self, expression: str):
        result = self._send("Runtime.evaluate", {
            "expression": expression, "returnByValue": True})
        details = result.get("exceptionDetails")
        if details:
            raise SessionError(details.get("text", "evaluation failed"))
        return result.get("result", {}).get("value")

    def _ensure_probe(self) -> None:
        if self._probe_source is None:
            self._probe_source = load_probe_script()
        if not self._probe_injected:
            self._evaluate(self._probe_source)
            self._probe_injected = True

    def snapshot_dom(self) -> list[DomNode]:
        self._ensure_probe()
        records = self._evaluate("JSON.stringify(window.__domProbe.collect())")
        nodes = []
        for record in json.loads(records):
            nodes.append(DomNode(
                node_ref=record["ref"], tag=record["tag"], own_text=record["own_text"],
                depth=record["depth"], doc_order=record["doc_order"],
                visible=record["visible"], clickable_self=record["clickable_self"],
                href=record.get("href")))
        return nodes

    def click(self, node_ref: str) -> None:
        self._ensure_probe()
        outcome = self._evaluate(
            f"JSON.stringify(window.__domProbe.click({json.dumps(node_ref)}))")
        payload = json.loads(outcome) if outcome else {"ok": False, "error": "no result"}
        if not payload.get("ok"):
            raise StaleRef(payload.get("error", node_ref))
        self._drain_pending_events()

    def drain_observations(self) -> tuple[list[HttpTransaction], list[CookieRecord]]:
        self._drain_pending_events()
        self._assembler.flush_incomplete()
        transactions = self._assembler.take()
        now = time.time()
        jar = []
        for cookie in self._send("Network.getAllCookies").get("cookies", []):
            expires = cookie.get("expires", -1)
            jar.append(CookieRecord(
                name=cookie.get("name", ""), value=cookie.get("value", ""),
                domain=cookie.get("domain", "").lstrip("."),
                set_at=now,
                expires_at=SESSION if expires is None or expires < 0 else max(expires, now)))
        jar.sort(key=lambda c: (c.domain, c.name))
        return transactions, jar

    def settle(self, ms: int) -> None:
        deadline = time.monotonic() + ms / 1000.0
        while time.monotonic() < deadline:
            self._pump(timeout_s=max(0.01, deadline - time.monotonic()))

    def clear_cache(self) -> None:
        self._send("Network.clearBrowserCache")

    def reset_profile(self) -> None:
        self._send("Network.clearBrowserCache")
        self._send("Network.clearBrowserCookies")
        try:
            self._evaluate("localStorage.clear(); sessionStorage.clear(); 0")
        except SessionError:
            pass

    def screenshot(self, path: str) -> None:
        result = self._send("Page.captureScreenshot", {"format": "png"})
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(base64.b64decode(result["data"]))

    def close(self) -> None:
        try:
            self._ws.close()
        except Exception:
            pass
