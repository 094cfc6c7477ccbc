"""Find accept-button candidates in a DOM snapshot and drive the click.

Matching is done on each node's own text (direct text children only), so a
page-wide container never matches because a button somewhere inside it says
"OK". When several nodes match, the innermost visible clickable one wins.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

from .keywords import KeywordList, matches
from .model import AcceptOutcome, AcceptStatus

logger = logging.getLogger(__name__)

CLICKABLE_TAGS = frozenset({"button", "a", "span", "div", "input"})

DEFAULT_SETTLE_MS = 5000


@dataclass(frozen=True)
class DomNode:
    """One element from a rendered-document snapshot.

    own_text concatenates direct text children only. doc_order is the preorder
    index, unique within a snapshot. href is set on anchors so internal links
    can be pulled from the same snapshot.
    """

    node_ref: str
    tag: str
    own_text: str
    depth: int
    doc_order: int
    visible: bool
    clickable_self: bool
    href: Optional[str] = None


@dataclass(frozen=True)
class CandidateButton:
    node: DomNode
    matched_keyword: str


def find_candidates(snapshot: Sequence[DomNode], keywords: KeywordList) -> list[CandidateButton]:
    """All nodes whose own text matches a keyword, in document order."""
    candidates = [
        CandidateButton(node=node, matched_keyword=keyword)
        for node in sorted(snapshot, key=lambda n: n.doc_order)
        if (keyword := matches(keywords, node.own_text)) is not None
    ]
    return candidates


def select_target(candidates: Sequence[CandidateButton]) -> Optional[CandidateButton]:
    """Pick the click target under a total order, independent of input order.

    Visible beats invisible, clickable beats not, deeper beats shallower
    (banners nest the real control inside matching wrappers), then first in
    document order.
    """
    if not candidates:
        return None
    return min(candidates, key=lambda c: (
        not c.node.visible,
        not c.node.clickable_self,
        -c.node.depth,
        c.node.doc_order,
    ))


def detect_and_accept(session, keywords: KeywordList,
                      settle_ms: int = DEFAULT_SETTLE_MS) -> AcceptOutcome:
    """Wait for late banner scripts, snapshot the DOM, click the accept button.

    The session must have completed navigation. One click, no retry; a click
    that raises is reported as CLICK_FAILED with the keyword that matched, a
    snapshot failure as VISIT_ERROR.
    """
    session.settle(settle_ms)
    try:
        snapshot = session.snapshot_dom()
    except Exception as exc:
        logger.warning("DOM snapshot failed: %s", exc)
        return AcceptOutcome(status=AcceptStatus.VISIT_ERROR)
    target = select_target(find_candidates(snapshot, keywords))
    if target is None:
        return AcceptOutcome(status=AcceptStatus.NO_BANNER_MATCH)
    try:
        session.click(target.node.node_ref)
    except Exception as exc:
        logger.warning("accept click failed on <%s>: %s", target.node.tag, exc)
        return AcceptOutcome(status=AcceptStatus.CLICK_FAILED,
                             matched_keyword=target.matched_keyword,
                             element_tag=target.node.tag)
    return AcceptOutcome(status=AcceptStatus.ACCEPTED,
                         matched_keyword=target.matched_keyword,
                         element_tag=target.node.tag)
