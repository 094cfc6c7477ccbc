"""Synthetic-site corpus: generation and serving.

A corpus is the shared ground truth for both drivers: the fixture driver
replays the PageModel documents, the live driver loads the equivalent HTML
over plain HTTP/1.1 from the bundled server. Simulated hosts are distinct
registrable domains (www.<site>.example, px.<tracker>.example, a few co.uk)
routed by Host header, so domain logic gets exercised without DNS; point a
real browser at them with a host-resolver rule mapping everything to the
server address.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import random
import threading
import time
from dataclasses import dataclass
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import urlparse

from .detector import DomNode
from .keywords import default_keywords_by_language
from .model import AcceptStatus, SiteEntry, parse_site_list, serialize_site_list
from .session import CookieSpec, FixtureOrigin, PageModel, ResourceSpec

logger = logging.getLogger(__name__)

DEFAULT_PORT = 8321

CONSENT_COOKIE = "__consent"


@dataclass(frozen=True)
class HarnessResource:
    """One subresource of a fixture site. host None means the site's own host."""

    path: str
    bytes: int
    delay_ms: int = 0
    host: Optional[str] = None
    cookie_name: Optional[str] = None
    cookie_lifetime_s: Optional[float] = None

    def __post_init__(self):
        if self.delay_ms < 0:
            raise ValueError("delay_ms must be >= 0")


@dataclass(frozen=True)
class BannerSpec:
    keyword: str
    wrapper_depth: int = 1
    visible: bool = True


@dataclass(frozen=True)
class FixtureSiteSpec:
    """Blueprint of one synthetic site."""

    site_id: str
    language: str = "en"
    banner: Optional[BannerSpec] = None
    pre_resources: tuple[HarnessResource, ...] = ()
    post_resources: tuple[HarnessResource, ...] = ()
    internal_pages: int = 2
    tracker_domains: tuple[str, ...] = ()
    country: str = ""
    category: str = ""
    rank: Optional[int] = None
    tld: str = "example"
    decoy_keyword: Optional[str] = None
    sentence_decoy: Optional[str] = None

    def __post_init__(self):
        if self.post_resources and self.banner is None:
            raise ValueError("post resources are unreachable without a banner")

    @property
    def host(self) -> str:
        return f"www.{self.site_id}.{self.tld}"


class RequestCounter:
    """Monotone per-(host, path) hit counts, safe under concurrent serving."""

    def __init__(self):
        self._counts: dict[tuple[str, str], int] = {}
        self._lock = threading.Lock()

    def record(self, host: str, path: str) -> None:
        with self._lock:
            self._counts[(host, path)] = self._counts.get((host, path), 0) + 1

    def snapshot(self) -> dict[tuple[str, str], int]:
        with self._lock:
            return dict(self._counts)

    def reset(self) -> None:
        with self._lock:
            self._counts.clear()


# ---------------------------------------------------------------------------
# DOM / HTML construction


class _DomBuilder:
    def __init__(self):
        self.nodes: list[DomNode] = []

    def add(self, tag: str, depth: int, own_text: str = "", visible: bool = True,
            clickable: Optional[bool] = None, href: Optional[str] = None) -> DomNode:
        ref = f"e{len(self.nodes)}"
        if clickable is None:
            clickable = tag in ("button", "a", "span", "div", "input")
        node = DomNode(node_ref=ref, tag=tag, own_text=own_text, depth=depth,
                       doc_order=len(self.nodes), visible=visible,
                       clickable_self=clickable, href=href)
        self.nodes.append(node)
        return node


def _page_url(host: str, port: int, path: str) -> str:
    return f"http://{host}:{port}{path}"


def _resource_url(spec: FixtureSiteSpec, res: HarnessResource, port: int) -> str:
    return _page_url(res.host or spec.host, port, res.path)


def _resource_spec(spec: FixtureSiteSpec, res: HarnessResource, port: int) -> ResourceSpec:
    cookies = ()
    if res.cookie_name:
        cookies = (CookieSpec(name=res.cookie_name, value="1",
                              lifetime_s=res.cookie_lifetime_s),)
    return ResourceSpec(url=_resource_url(spec, res, port), bytes=res.bytes,
                        delay_ms=res.delay_ms, set_cookies=cookies)


def _build_page(spec: FixtureSiteSpec, port: int, path: str,
                internal_hrefs: list[str]) -> tuple[PageModel, str]:
    """One page's model and its equivalent HTML document."""
    dom = _DomBuilder()
    dom.add("html", 0)
    dom.add("head", 1, visible=False)
    dom.add("meta", 2, visible=False)
    dom.add("title", 2, own_text=f"{spec.site_id} home", visible=False)
    dom.add("body", 1)
    dom.add("h1", 2, own_text=f"Welcome to {spec.site_id}")
    body_parts: list[str] = [f"<h1>Welcome to {spec.site_id}</h1>"]

    if spec.sentence_decoy:
        dom.add("p", 2, own_text=spec.sentence_decoy)
        body_parts.append(f"<p>{spec.sentence_decoy}</p>")

    accept_ref = None
    banner_refs: list[str] = []
    if spec.banner is not None:
        depth = 2
        open_tags: list[str] = []
        for level in range(spec.banner.wrapper_depth):
            node = dom.add("div", depth)
            banner_refs.append(node.node_ref)
            attrs = ' id="consent-root"' if level == 0 else ""
            open_tags.append(f"<div{attrs} class=\"consent\">")
            depth += 1
        style = "" if spec.banner.visible else ' style="display:none"'
        button = dom.add("button", depth, own_text=spec.banner.keyword,
                         visible=spec.banner.visible)
        banner_refs.append(button.node_ref)
        accept_ref = button.node_ref
        root_attr = ' id="consent-root"' if spec.banner.wrapper_depth == 0 else ""
        body_parts.append("".join(open_tags)
                          + f'<button{root_attr} id="accept-btn"{style}>{spec.banner.keyword}</button>'
                          + "</div>" * spec.banner.wrapper_depth)

    # keyword decoy sits after the banner: an invisible banner button still
    # outranks it (deeper, or earlier in document order at equal depth)
    if spec.decoy_keyword:
        dom.add("span", 2, own_text=spec.decoy_keyword, visible=False)
        body_parts.append(f'<span style="display:none">{spec.decoy_keyword}</span>')

    for href in internal_hrefs:
        dom.add("a", 2, own_text="read more", href=href)
        body_parts.append(f'<a href="{href}">read more</a>')
    external = f"http://www.elsewhere-{spec.site_id}.invalid:{port}/"
    dom.add("a", 2, own_text="partner", href=external)
    body_parts.append(f'<a href="{external}">partner</a>')

    pre_urls = [_resource_url(spec, r, port) for r in spec.pre_resources]
    post_urls = [_resource_url(spec, r, port) for r in spec.post_resources]
    loader = _loader_script(pre_urls, post_urls)
    dom.add("script", 2, visible=False)
    body_parts.append(f"<script>{loader}</script>")

    url = _page_url(spec.host, port, path)
    model = PageModel(
        url=url,
        dom=tuple(dom.nodes),
        pre_accept_resources=tuple(_resource_spec(spec, r, port) for r in spec.pre_resources),
        post_accept_resources=tuple(_resource_spec(spec, r, port) for r in spec.post_resources),
        internal_links=tuple(_page_url(spec.host, port, h) for h in internal_hrefs),
        accept_ref=accept_ref,
        banner_refs=tuple(banner_refs),
        doc_bytes=0,  # patched below to the real HTML size
        doc_delay_ms=10,
    )
    html = ("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
            f"<title>{spec.site_id} home</title>\n</head>\n<body>\n"
            + "\n".join(body_parts) + "\n</body>\n</html>\n")
    model = dataclasses.replace(model, doc_bytes=len(html.encode("utf-8")))
    return model, html


def _loader_script(pre_urls: list[str], post_urls: list[str]) -> str:
    return (
        "(function () {\n"
        f"  var pre = {json.dumps(pre_urls)};\n"
        f"  var post = {json.dumps(post_urls)};\n"
        "  var urls = pre.slice();\n"
        f"  if (document.cookie.indexOf('{CONSENT_COOKIE}=1') !== -1) {{\n"
        "    urls = urls.concat(post);\n"
        "    var root = document.getElementById('consent-root');\n"
        "    if (root) { root.style.display = 'none'; }\n"
        "  }\n"
        "  urls.forEach(function (u) { var img = new Image(); img.src = u; });\n"
        "  var btn = document.getElementById('accept-btn');\n"
        "  if (btn) { btn.addEventListener('click', function () {\n"
        f"    document.cookie = '{CONSENT_COOKIE}=1; max-age=31536000; path=/';\n"
        "    var root = document.getElementById('consent-root');\n"
        "    if (root) { root.style.display = 'none'; }\n"
        "  }); }\n"
        "})();"
    )


# ---------------------------------------------------------------------------
# corpus generation


@dataclass
class Corpus:
    root: Path
    port: int
    manifest: dict
    models: dict[str, PageModel]
    sites: list[SiteEntry]

    @property
    def tracker_manifest_path(self) -> Path:
        return self.root / "trackers" / "manifest.json"

    @property
    def site_list_path(self) -> Path:
        return self.root / "sites.csv"

    def origin(self) -> FixtureOrigin:
        return FixtureOrigin(self.models)


def generate_corpus(specs: list[FixtureSiteSpec], seed: int, out_dir: str | Path,
                    port: int = DEFAULT_PORT,
                    tracker_sources: Optional[dict[str, list[str]]] = None) -> Corpus:
    """Write per-site HTML, resource bodies, PageModel documents, site list,
    tracker source lists and the expectations manifest. Deterministic for a
    given (specs, seed)."""
    root = Path(out_dir)
    (root / "models").mkdir(parents=True, exist_ok=True)

    models: dict[str, PageModel] = {}
    model_files: dict[str, str] = {}
    site_rows: list[SiteEntry] = []
    expectations = []
    for spec in specs:
        hrefs = [f"/page-{i}.html" for i in range(1, spec.internal_pages + 1)]
        pages = {"/": ("index.html", hrefs)}
        for i, href in enumerate(hrefs, start=1):
            back = ["/"] + [h for h in hrefs if h != href]
            pages[href] = (f"page-{i}.html", back)

        www = root / "www" / spec.host
        www.mkdir(parents=True, exist_ok=True)
        for path, (filename, page_hrefs) in pages.items():
            model, html = _build_page(spec, port, path, page_hrefs)
            (www / filename).write_text(html, encoding="utf-8")
            model_name = f"{spec.site_id}{'-' + filename if path != '/' else ''}.json"
            (root / "models" / model_name).write_text(
                json.dumps(model.to_json_dict(), indent=1), encoding="utf-8")
            models[model.url] = model
            model_files[model.url] = f"models/{model_name}"

        for res in list(spec.pre_resources) + list(spec.post_resources):
            res_root = root / "www" / (res.host or spec.host)
            res_path = res_root / res.path.lstrip("/")
            res_path.parent.mkdir(parents=True, exist_ok=True)
            res_path.write_bytes(b"x" * res.bytes)

        landing = _page_url(spec.host, port, "/")
        site_rows.append(SiteEntry(url=landing, country=spec.country,
                                   category=spec.category, rank=spec.rank))
        before_urls = sorted([landing] + [_resource_url(spec, r, port)
                                          for r in spec.pre_resources])
        after_urls = sorted(before_urls + [_resource_url(spec, r, port)
                                           for r in spec.post_resources])
        expectations.append({
            "site_id": spec.site_id,
            "url": landing,
            "language": spec.language,
            "expected_accept": (AcceptStatus.ACCEPTED.value if spec.banner
                                else AcceptStatus.NO_BANNER_MATCH.value),
            "expected_keyword": spec.banner.keyword if spec.banner else None,
            "banner_visible": spec.banner.visible if spec.banner else None,
            "before_urls": before_urls,
            "after_urls": after_urls if spec.banner else before_urls,
            "tracker_domains": sorted(spec.tracker_domains),
        })

    if tracker_sources is None:
        tracker_sources = _default_tracker_sources(specs)
    trackers_dir = root / "trackers"
    trackers_dir.mkdir(parents=True, exist_ok=True)
    tracker_manifest = {}
    for source, domains in sorted(tracker_sources.items()):
        (trackers_dir / f"{source}.txt").write_text(
            "\n".join(sorted(domains)) + "\n", encoding="utf-8")
        tracker_manifest[source] = f"{source}.txt"
    (trackers_dir / "manifest.json").write_text(
        json.dumps(tracker_manifest, indent=1), encoding="utf-8")

    (root / "sites.csv").write_text(serialize_site_list(site_rows), encoding="utf-8")
    manifest = {
        "port": port,
        "seed": seed,
        "sites": expectations,
        "model_files": model_files,
    }
    (root / "corpus_manifest.json").write_text(json.dumps(manifest, indent=1),
                                               encoding="utf-8")
    return Corpus(root=root, port=port, manifest=manifest, models=models,
                  sites=site_rows)


def load_corpus(root: str | Path) -> Corpus:
    root = Path(root)
    manifest = json.loads((root / "corpus_manifest.json").read_text(encoding="utf-8"))
    models: dict[str, PageModel] = {}
    for model_file in sorted((root / "models").glob("*.json")):
        model = PageModel.from_json_dict(json.loads(model_file.read_text(encoding="utf-8")))
        models[model.url] = model
    sites = parse_site_list((root / "sites.csv").read_text(encoding="utf-8"))
    return Corpus(root=root, port=manifest["port"], manifest=manifest,
                  models=models, sites=sites)


def _default_tracker_sources(specs: list[FixtureSiteSpec]) -> dict[str, list[str]]:
    """Every referenced tracker domain lands in two of the three lists."""
    domains = sorted({d for spec in specs for d in spec.tracker_domains})
    sources: dict[str, list[str]] = {"lista": [], "listb": [], "listc": []}
    for i, domain in enumerate(domains):
        pair = [("lista", "listb"), ("listb", "listc"), ("lista", "listc")][i % 3]
        for source in pair:
            sources[source].append(domain)
    return sources


# ---------------------------------------------------------------------------
# default corpus blueprint


COUNTRIES = ["IT", "FR", "DE", "ES", "UK", "US"]
CATEGORIES = ["news", "sports", "shopping", "tech", "travel"]
LANG_BY_COUNTRY = {"IT": "it", "FR": "fr", "DE": "de", "ES": "es", "UK": "en", "US": "en"}

SENTENCE_DECOYS = {
    "en": "please accept all our terms before reading on",
    "de": "bitte alle akzeptieren bevor sie weiterlesen",
    "fr": "veuillez tout accepter avant de continuer la lecture",
    "it": "si prega di accetta tutto prima di continuare",
    "es": "por favor aceptar todo antes de continuar leyendo",
    "ca": "si us plau acceptar-ho tot abans de continuar",
}


def default_corpus_specs(banner_sites_per_language: int = 10,
                         bannerless_sites: int = 6,
                         seed: int = 7) -> list[FixtureSiteSpec]:
    """The standard test corpus: one banner site per (language, keyword) pair
    sweeping wrapper depths 0-3 and visible/invisible buttons, plus bannerless
    sites, some with sentence decoys."""
    by_language = default_keywords_by_language()
    rng = random.Random(seed)
    tracker_pool = [f"tracknet-{i:02d}.example" for i in range(1, 13)]
    specs: list[FixtureSiteSpec] = []
    rank = 1

    languages = sorted(by_language)
    for lang_index, language in enumerate(languages):
        keywords = by_language[language][:banner_sites_per_language]
        if len(keywords) < banner_sites_per_language:
            raise ValueError(f"shipped list has too few {language} keywords")
        for k_index, keyword in enumerate(keywords):
            site_id = f"site-{rank:03d}"
            tld = "co.uk" if rank % 7 == 0 else "example"
            trackers = rng.sample(tracker_pool, k=rng.randint(1, 3))
            pre: list[HarnessResource] = [
                HarnessResource(path="/static/app.js", bytes=rng.randint(2000, 20000),
                                delay_ms=rng.randint(2, 12)),
                HarnessResource(path=f"/cdn/lib-{rank}.css", bytes=rng.randint(1000, 9000),
                                delay_ms=rng.randint(2, 12),
                                host=f"static.cdnhub-{rank % 4}.example"),
            ]
            if rank % 5 == 0:
                # some sites talk to a tracker even before consent
                pre.append(HarnessResource(
                    path="/px/early.gif", bytes=rng.randint(40, 200),
                    delay_ms=rng.randint(2, 10), host=f"px.{trackers[0]}",
                    cookie_name="uid", cookie_lifetime_s=120 * 86400))
            post = [
                HarnessResource(path=f"/px/{site_id}.gif", bytes=rng.randint(40, 400),
                                delay_ms=rng.randint(5, 25), host=f"px.{domain}",
                                cookie_name="uid", cookie_lifetime_s=395 * 86400)
                for domain in trackers
            ]
            post.append(HarnessResource(path="/ads/banner.jpg",
                                        bytes=rng.randint(5000, 40000),
                                        delay_ms=rng.randint(5, 25),
                                        host=f"ads.adgrid-{rank % 3}.example"))
            other_keywords = [k for k in by_language[language] if k != keyword]
            country = COUNTRIES[(lang_index + k_index) % len(COUNTRIES)]
            specs.append(FixtureSiteSpec(
                site_id=site_id,
                language=language,
                banner=BannerSpec(keyword=keyword, wrapper_depth=k_index % 4,
                                  visible=(rank % 4 != 0)),
                pre_resources=tuple(pre),
                post_resources=tuple(post),
                internal_pages=2,
                tracker_domains=tuple(trackers),
                country=country,
                category=CATEGORIES[rank % len(CATEGORIES)],
                rank=rank,
                tld=tld,
                decoy_keyword=rng.choice(other_keywords) if other_keywords else None,
                sentence_decoy=SENTENCE_DECOYS.get(language),
            ))
            rank += 1

    for i in range(bannerless_sites):
        language = languages[i % len(languages)]
        site_id = f"site-{rank:03d}"
        specs.append(FixtureSiteSpec(
            site_id=site_id,
            language=language,
            banner=None,
            pre_resources=(
                HarnessResource(path="/static/app.js", bytes=rng.randint(2000, 20000),
                                delay_ms=rng.randint(2, 12)),
            ),
            internal_pages=2,
            country=COUNTRIES[rank % len(COUNTRIES)],
            category=CATEGORIES[rank % len(CATEGORIES)],
            rank=rank,
            sentence_decoy=SENTENCE_DECOYS.get(language) if i % 2 == 0 else None,
        ))
        rank += 1
    return specs


# ---------------------------------------------------------------------------
# HTTP serving (for the live driver and harness tests)


class _CorpusHandler(BaseHTTPRequestHandler):
    server_version = "FixtureHarness/1.0"
    counter: RequestCounter
    index: dict[tuple[str, str], dict]

    def log_message(self, fmt, *args):  # quiet by default
        logger.debug("harness: " + fmt, *args)

    def do_GET(self):
        host = (self.headers.get("Host") or "").split(":")[0].lower()
        path = self.path.split("?")[0]
        if path == "/__counters__":
            body = json.dumps(
                {f"{h}{p}": n for (h, p), n in sorted(self.counter.snapshot().items())}
            ).encode()
            self._respond(HTTPStatus.OK, body, "application/json", "no-store")
            return
        if path == "/__reset__":
            self.counter.reset()
            self._respond(HTTPStatus.OK, b"{}", "application/json", "no-store")
            return

        entry = self.index.get((host, path))
        if entry is None:
            self.counter.record(host, path)
            self._respond(HTTPStatus.NOT_FOUND, b"not found", "text/plain", "no-store")
            return
        self.counter.record(host, path)
        if entry["delay_ms"]:
            time.sleep(entry["delay_ms"] / 1000.0)
        headers = []
        for cookie in entry["cookies"]:
            attrs = f"{cookie['name']}={cookie['value']}; Path=/"
            if cookie["lifetime_s"] is not None:
                attrs += f"; Max-Age={int(cookie['lifetime_s'])}"
            headers.append(("Set-Cookie", attrs))
        self._respond(HTTPStatus.OK, entry["body"], entry["content_type"],
                      entry["cache_control"], headers)

    def _respond(self, status, body: bytes, content_type: str,
                 cache_control: str, headers=()):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Cache-Control", cache_control)
        for name, value in headers:
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(body)


def _serving_index(corpus: Corpus) -> dict[tuple[str, str], dict]:
    """(host, path) -> body/delay/cookies, built from models + written HTML."""
    index: dict[tuple[str, str], dict] = {}
    for model in corpus.models.values():
        parsed = urlparse(model.url)
        host = (parsed.hostname or "").lower()
        path = parsed.path or "/"
        filename = "index.html" if path == "/" else path.lstrip("/")
        html = (corpus.root / "www" / host / filename).read_bytes()
        index[(host, path)] = {"body": html, "delay_ms": model.doc_delay_ms,
                               "cookies": [], "content_type": "text/html; charset=utf-8",
                               "cache_control": "no-cache"}
        for res in list(model.pre_accept_resources) + list(model.post_accept_resources):
            res_parsed = urlparse(res.url)
            cookies = [{"name": c.name, "value": c.value or "1", "lifetime_s": c.lifetime_s}
                       for c in res.set_cookies]
            index[((res_parsed.hostname or "").lower(), res_parsed.path)] = {
                "body": b"x" * res.bytes, "delay_ms": res.delay_ms,
                "cookies": cookies, "content_type": "application/octet-stream",
                "cache_control": "no-store" if cookies else "max-age=3600"}
    return index


@dataclass
class ServingHandle:
    server: ThreadingHTTPServer
    thread: threading.Thread
    counter: RequestCounter
    address: tuple[str, int]

    def shutdown(self):
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)


def serve(corpus: Corpus, bind_addr: tuple[str, int] | None = None) -> ServingHandle:
    """Serve the corpus over HTTP with per-resource delays, cookie setting and
    request counters; /__counters__ and /__reset__ are control endpoints."""
    if bind_addr is None:
        bind_addr = ("127.0.0.1", corpus.port)
    counter = RequestCounter()
    handler = type("BoundHandler", (_CorpusHandler,), {
        "corpus": corpus, "counter": counter, "index": _serving_index(corpus)})
    try:
        server = ThreadingHTTPServer(bind_addr, handler)
    except OSError as exc:
        raise OSError(f"cannot bind fixture server on {bind_addr}: {exc}") from exc
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return ServingHandle(server=server, thread=thread, counter=counter,
                         address=server.server_address)
