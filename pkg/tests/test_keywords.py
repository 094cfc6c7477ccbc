import pytest
from hypothesis import given, strategies as st

from consentcrawl.keywords import (EmptyKeywordList, default_keywords,
                                   default_keywords_by_language, load_keywords,
                                   matches, normalize_text)


def test_normalize_strips_and_collapses():
    assert normalize_text("  Got\n It ") == "got it"


def test_normalize_casefolds():
    assert normalize_text("OK") == "ok"


def test_normalize_collapses_inner_runs():
    assert normalize_text("Alle auswählen,  weiterlesen") == "alle auswählen, weiterlesen"


def test_normalize_handles_nbsp_and_tabs():
    assert normalize_text("ACCEPT \tALL") == "accept all"


@given(st.text(max_size=200))
def test_normalize_idempotent(text):
    once = normalize_text(text)
    assert normalize_text(once) == once


def test_load_dedups_after_normalization():
    assert load_keywords("Ok\nok\nGot it").entries == ("ok", "got it")


def test_load_skips_comments_and_blanks():
    assert load_keywords("# comment\n\nAccept all").entries == ("accept all",)


def test_load_only_comments_is_empty():
    with pytest.raises(EmptyKeywordList):
        load_keywords("# one\n# two\n")


def test_load_preserves_first_occurrence_order():
    content = "Zeta\nAlpha\nzeta\nMid"
    assert load_keywords(content).entries == ("zeta", "alpha", "mid")


def test_match_is_whole_string():
    keyword_list = load_keywords("ok")
    assert matches(keyword_list, "book") is None
    assert matches(keyword_list, " OK ") == "ok"


def test_match_spec_examples():
    keyword_list = load_keywords("got it\ni'm fine with this")
    assert matches(keyword_list, " Got it ") == "got it"
    assert matches(keyword_list, "I'm fine with this") == "i'm fine with this"


@given(st.text(max_size=80))
def test_match_iff_normalized_in_entries(text):
    keyword_list = load_keywords("ok\ngot it\naccept all")
    result = matches(keyword_list, text)
    if normalize_text(text) in keyword_list.entries:
        assert result == normalize_text(text)
    else:
        assert result is None


def test_default_list_contains_required_phrases():
    entries = set(default_keywords().entries)
    for phrase in ["ok", "got it", "accept all", "i'm fine with this",
                   "alle auswählen, weiterlesen und unsere arbeit unterstützen"]:
        assert phrase in entries


def test_default_list_covers_six_languages():
    by_language = default_keywords_by_language()
    assert set(by_language) == {"en", "de", "fr", "it", "es", "ca"}
    for language, entries in by_language.items():
        assert len(entries) >= 10, language


def test_default_entries_are_normalized_and_unique():
    entries = default_keywords().entries
    assert len(set(entries)) == len(entries)
    assert all(normalize_text(e) == e for e in entries)
