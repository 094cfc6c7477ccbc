"""Consent-banner-aware web measurement framework.

Visits websites, finds and accepts the consent banner by exact keyword match
on DOM node text, records HTTP transactions / cookies / load times before and
after acceptance, classifies trackers against merged block lists, and computes
the aggregate tracking and performance metrics.
"""

__version__ = "0.1.0"

from .model import (AcceptOutcome, AcceptStatus, CacheMode, CookieRecord,
                    HttpTransaction, SiteEntry, VisitLog, VisitPhase,
                    parse_site_list)
from .keywords import KeywordList, default_keywords, load_keywords, matches, normalize_text
from .detector import CandidateButton, DomNode, detect_and_accept, find_candidates, select_target
from .trackers import (DomainClass, TrackerSet, classify_transaction,
                       is_profiling_cookie, load_tracker_set, registrable_domain)
from .session import FixtureOrigin, FixtureSession, PageModel, PageSession, SessionConfig
from .orchestrator import CrawlConfig, SiteResult, run_campaign, run_site

__all__ = [
    "AcceptOutcome", "AcceptStatus", "CacheMode", "CandidateButton", "CookieRecord",
    "CrawlConfig", "DomNode", "DomainClass", "FixtureOrigin", "FixtureSession",
    "HttpTransaction", "KeywordList", "PageModel", "PageSession", "SessionConfig",
    "SiteEntry", "SiteResult", "TrackerSet", "VisitLog", "VisitPhase",
    "classify_transaction", "default_keywords", "detect_and_accept",
    "find_candidates", "is_profiling_cookie", "load_keywords", "load_tracker_set",
    "matches", "normalize_text", "parse_site_list", "registrable_domain",
    "run_campaign", "run_site", "select_target",
]
