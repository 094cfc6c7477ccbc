import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from consentcrawl.detector import DomNode
from consentcrawl.session import CookieSpec, PageModel, ResourceSpec


def dom_node(ref, tag, text="", depth=0, order=0, visible=True, clickable=None,
             href=None):
    if clickable is None:
        clickable = tag in ("button", "a", "span", "div", "input")
    return DomNode(node_ref=ref, tag=tag, own_text=text, depth=depth,
                   doc_order=order, visible=visible, clickable_self=clickable,
                   href=href)


def banner_page(url, keyword="Got it", pre=(), post=(), links=(),
                vanish_button=False, doc_delay_ms=10):
    """Minimal one-banner page: html > body > [div > button, anchors]."""
    nodes = [
        dom_node("e0", "html", depth=0, order=0),
        dom_node("e1", "body", depth=1, order=1, clickable=False),
        dom_node("e2", "div", depth=2, order=2),
        dom_node("e3", "button", text=keyword, depth=3, order=3),
    ]
    for i, link in enumerate(links):
        nodes.append(dom_node(f"e{4 + i}", "a", text="more", depth=2,
                              order=4 + i, href=link))
    return PageModel(
        url=url, dom=tuple(nodes),
        pre_accept_resources=tuple(pre), post_accept_resources=tuple(post),
        internal_links=tuple(links), accept_ref="e3", banner_refs=("e2", "e3"),
        doc_delay_ms=doc_delay_ms,
        vanish_on_snapshot=("e3",) if vanish_button else (),
    )


def plain_page(url, pre=(), links=(), doc_delay_ms=10):
    nodes = [
        dom_node("e0", "html", depth=0, order=0),
        dom_node("e1", "body", depth=1, order=1, clickable=False),
        dom_node("e2", "p", text="welcome, no banner here", depth=2, order=2,
                 clickable=False),
    ]
    for i, link in enumerate(links):
        nodes.append(dom_node(f"e{3 + i}", "a", text="more", depth=2,
                              order=3 + i, href=link))
    return PageModel(url=url, dom=tuple(nodes), pre_accept_resources=tuple(pre),
                     internal_links=tuple(links), doc_delay_ms=doc_delay_ms)


def resource(url, nbytes=100, delay_ms=10, cookie_name=None, lifetime_s=None,
             value="1"):
    cookies = ()
    if cookie_name is not None:
        cookies = (CookieSpec(name=cookie_name, value=value, lifetime_s=lifetime_s),)
    return ResourceSpec(url=url, bytes=nbytes, delay_ms=delay_ms, set_cookies=cookies)


@pytest.fixture
def keyword_list():
    from consentcrawl.keywords import load_keywords
    return load_keywords("got it\nok\naccept all")
