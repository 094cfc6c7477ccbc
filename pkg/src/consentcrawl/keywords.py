"""Accept-button keyword list: loading, normalization, whole-string matching.

A DOM node is an accept-button candidate only when its own text, after
normalization, equals a keyword exactly. Substring matching is deliberately
not offered; it would fire on any sentence containing "ok".
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass


class EmptyKeywordList(ValueError):
    """No keywords survived loading."""


def normalize_text(raw: str) -> str:
    """Casefold and collapse every whitespace run to a single space.

    Unicode default case folding (str.casefold), not locale-aware folding,
    so behaviour is deterministic across the six list languages. str.split()
    treats NBSP, tabs and newlines as whitespace, which also strips the ends.
    """
    return " ".join(raw.casefold().split())


@dataclass(frozen=True)
class KeywordList:
    """Ordered, deduplicated set of normalized accept-button phrases."""

    entries: tuple[str, ...]
    source_languages: frozenset[str] = frozenset()

    def __post_init__(self):
        seen = set()
        for entry in self.entries:
            if not entry:
                raise ValueError("keyword entries must be non-empty")
            if normalize_text(entry) != entry:
                raise ValueError(f"keyword entry not normalized: {entry!r}")
            if entry in seen:
                raise ValueError(f"duplicate keyword entry: {entry!r}")
            seen.add(entry)
        object.__setattr__(self, "_index", seen)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, text: str) -> bool:
        return text in self._index  # type: ignore[attr-defined]


def load_keywords(content: str) -> KeywordList:
    """Load a keyword file: one keyword per line, ``#`` comments, blanks ignored.

    Lines are normalized on the way in; duplicates after normalization are
    dropped, first occurrence wins, line order is preserved. Language section
    markers of the form ``#lang: xx`` feed source_languages.
    """
    entries: list[str] = []
    seen: set[str] = set()
    languages: set[str] = set()
    for line in content.splitlines():
        stripped = line.strip()
        if stripped.startswith("#"):
            tag = stripped[1:].strip()
            if tag.lower().startswith("lang:"):
                languages.add(tag[5:].strip())
            continue
        keyword = normalize_text(line)
        if not keyword or keyword in seen:
            continue
        seen.add(keyword)
        entries.append(keyword)
    if not entries:
        raise EmptyKeywordList("no keywords in input")
    return KeywordList(entries=tuple(entries), source_languages=frozenset(languages))


def matches(keyword_list: KeywordList, node_text: str) -> str | None:
    """Return the keyword equal to normalize_text(node_text), or None.

    Whole-string equality only; "book" never matches "ok".
    """
    normalized = normalize_text(node_text)
    return normalized if normalized in keyword_list else None


def _default_content() -> str:
    return importlib.resources.files("consentcrawl.data").joinpath(
        "accept_keywords.txt").read_text(encoding="utf-8")


def default_keywords() -> KeywordList:
    """The keyword list shipped with the package (six languages)."""
    return load_keywords(_default_content())


def default_keywords_by_language() -> dict[str, list[str]]:
    """The shipped list split by its ``#lang:`` section markers."""
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    seen: set[str] = set()
    for line in _default_content().splitlines():
        stripped = line.strip()
        if stripped.startswith("#"):
            tag = stripped[1:].strip()
            if tag.lower().startswith("lang:"):
                current = sections.setdefault(tag[5:].strip(), [])
            continue
        keyword = normalize_text(line)
        if keyword and current is not None and keyword not in seen:
            seen.add(keyword)
            current.append(keyword)
    return sections
