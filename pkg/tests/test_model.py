import pytest
from hypothesis import given, strategies as st

from consentcrawl.model import (AcceptOutcome, AcceptStatus, CookieRecord,
                                HttpTransaction, MalformedRow, SiteEntry,
                                VisitPhase, PhaseKind, additional,
                                parse_site_list, serialize_site_list)


def test_parse_single_row():
    entries = parse_site_list("url,country,category,rank\nhttps://a.example,IT,News,1")
    assert entries == [SiteEntry(url="https://a.example", country="IT",
                                 category="News", rank=1)]


def test_parse_empty_body():
    assert parse_site_list("url,country,category,rank\n") == []


def test_parse_bad_url_reports_line():
    with pytest.raises(MalformedRow) as excinfo:
        parse_site_list("url,country,category,rank\nnotaurl,IT,News,1")
    assert excinfo.value.line_no == 2


def test_parse_bad_rank_reports_line():
    with pytest.raises(MalformedRow) as excinfo:
        parse_site_list("url,country,category,rank\nhttps://a.example,,,\nhttps://b.example,,,x")
    assert excinfo.value.line_no == 3


def test_parse_skips_comments_keeps_line_numbers():
    content = "# top sites\nurl,country,category,rank\n# a comment\nhttps://a.example,,,"
    assert len(parse_site_list(content)) == 1
    with pytest.raises(MalformedRow) as excinfo:
        parse_site_list(content + "\nbad,,,")
    assert excinfo.value.line_no == 5


def test_parse_keeps_duplicate_urls():
    content = ("url,country,category,rank\n"
               "https://a.example,IT,News,1\nhttps://a.example,FR,News,3")
    entries = parse_site_list(content)
    assert [e.country for e in entries] == ["IT", "FR"]


site_entries = st.builds(
    SiteEntry,
    url=st.sampled_from([f"https://site-{i}.example/x" for i in range(40)]),
    country=st.sampled_from(["", "IT", "FR", "DE"]),
    category=st.sampled_from(["", "News", "Sports"]),
    rank=st.one_of(st.none(), st.integers(min_value=1, max_value=10**6)),
)


@given(st.lists(site_entries, max_size=30))
def test_site_list_round_trip(entries):
    assert parse_site_list(serialize_site_list(entries)) == entries


def test_visit_phase_invariants():
    with pytest.raises(ValueError):
        VisitPhase(PhaseKind.BEFORE, additional_index=1)
    with pytest.raises(ValueError):
        VisitPhase(PhaseKind.ADDITIONAL)
    assert additional(3).encode() == "additional:3"
    assert VisitPhase.decode("additional:3") == additional(3)
    assert VisitPhase.decode("before").kind is PhaseKind.BEFORE


def test_transaction_invariants():
    with pytest.raises(ValueError):
        HttpTransaction(request_url="http://x.example/", host="x.example",
                        status=200, bytes=1, started_at=5.0, finished_at=4.0)
    with pytest.raises(ValueError):
        HttpTransaction(request_url="http://x.example/", host="x.example",
                        status=200, bytes=-1, started_at=0.0, finished_at=1.0)


def test_cookie_invariants():
    with pytest.raises(ValueError):
        CookieRecord(name="a", value="b", domain="x.example",
                     set_at=100.0, expires_at=50.0)
    session = CookieRecord(name="a", value="b", domain="x.example", set_at=100.0)
    assert session.is_session and session.lifetime_s is None


def test_accept_outcome_invariants():
    with pytest.raises(ValueError):
        AcceptOutcome(status=AcceptStatus.ACCEPTED)
    with pytest.raises(ValueError):
        AcceptOutcome(status=AcceptStatus.NO_BANNER_MATCH, matched_keyword="ok")
    outcome = AcceptOutcome(status=AcceptStatus.CLICK_FAILED,
                            matched_keyword="got it", element_tag="button")
    assert outcome.matched_keyword == "got it"
