import json
import random

import pytest

from consentcrawl.model import CookieRecord, HttpTransaction
from consentcrawl.trackers import (DomainClass, InvalidHostname, MissingSourceFile,
                                   TrackerConfigError, TrackerSet,
                                   classify_transaction, is_profiling_cookie,
                                   load_tracker_set, registrable_domain)

from oracles import classify_oracle, registrable_domain_oracle

DAY = 86400.0


# --- registrable_domain -------------------------------------------------------

REGISTRABLE_CASES = [
    "www.tracker.co.uk", "tracker.co.uk", "a.b.tracker.co.uk",
    "shop.example.org.uk", "x.gov.uk", "deep.sub.domain.me.uk",
    "www.loja.com.br", "a.b.c.com.br", "imprensa.gov.br",
    "www.site.co.jp", "cdn.media.ne.jp", "a.ac.jp",
    "news.com.au", "a.b.news.com.au", "edu.example.edu.au",
    "www.example.com", "a.b.example.com", "a.b.c.d.e.example.com",
    "example.com", "example.org", "sub.example.org",
    "static.cdn.example.net", "example.io", "x.y.example.io",
    "www.example.co.nz", "shop.co.in", "mail.co.kr", "web.co.za",
    "tienda.com.mx", "portal.com.ar", "haber.com.tr",
    "site.com.cn", "w3.com.tw", "bank.com.hk", "gov.com.sg",
    "news.co.il", "portal.com.ua", "shop.co.th",
    "a.com.my", "b.com.ph", "c.com.vn", "d.co.id",
    "192.168.0.1", "10.0.0.255", "8.8.8.8",
    "2001:db8::1", "::1",
    "localhost.localdomain", "a.localhost.localdomain",
    "single-label-free.example",
]


def test_registrable_domain_against_oracle_table():
    assert len(REGISTRABLE_CASES) >= 50
    for host in REGISTRABLE_CASES:
        assert registrable_domain(host) == registrable_domain_oracle(host), host


def test_registrable_domain_spec_examples():
    assert registrable_domain("www.tracker.co.uk") == "tracker.co.uk"
    assert registrable_domain("a.b.example.com") == "example.com"
    assert registrable_domain("192.168.0.1") == "192.168.0.1"


def test_registrable_domain_rejects_degenerate_names():
    with pytest.raises(InvalidHostname):
        registrable_domain("")
    with pytest.raises(InvalidHostname):
        registrable_domain("localhost")
    with pytest.raises(InvalidHostname):
        registrable_domain("co.uk")  # a bare public suffix has no registrable part


# --- tracker set loading --------------------------------------------------------


def write_sources(tmp_path, sources):
    manifest = {}
    for name, domains in sources.items():
        path = tmp_path / f"{name}.txt"
        path.write_text("\n".join(domains) + "\n", encoding="utf-8")
        manifest[name] = f"{name}.txt"
    manifest_path = tmp_path / "manifest.json"
    manifest_path.write_text(json.dumps(manifest), encoding="utf-8")
    return manifest_path


def test_two_sources_make_tracking(tmp_path):
    manifest = write_sources(tmp_path, {
        "a": ["doubleclick.net", "solo.example"],
        "b": ["www.doubleclick.net"],
    })
    tracker_set = load_tracker_set(manifest)
    assert tracker_set.is_tracking("doubleclick.net")
    assert tracker_set.domains["solo.example"] == 1
    assert not tracker_set.is_tracking("solo.example")


def test_sources_merge_on_registrable_domain(tmp_path):
    manifest = write_sources(tmp_path, {
        "a": ["ads.x.co.uk"],
        "b": ["x.co.uk"],
    })
    tracker_set = load_tracker_set(manifest)
    reduced = registrable_domain_oracle("ads.x.co.uk")
    assert reduced == "x.co.uk"
    assert tracker_set.domains["x.co.uk"] == 2
    assert tracker_set.is_tracking("x.co.uk")


def test_missing_source_file(tmp_path):
    manifest_path = tmp_path / "manifest.json"
    manifest_path.write_text(json.dumps({"a": "a.txt", "b": "b.txt"}), encoding="utf-8")
    with pytest.raises(MissingSourceFile):
        load_tracker_set(manifest_path)


def test_single_source_is_config_error(tmp_path):
    manifest = write_sources(tmp_path, {"a": ["x.example"]})
    with pytest.raises(TrackerConfigError):
        load_tracker_set(manifest)


def test_duplicate_entries_in_one_source_count_once(tmp_path):
    manifest = write_sources(tmp_path, {
        "a": ["t.example", "www.t.example", "cdn.t.example"],
        "b": ["unrelated.example"],
    })
    assert load_tracker_set(manifest).domains["t.example"] == 1


# --- profiling cookies ----------------------------------------------------------


def cookie(lifetime_s, domain="t.example", set_at=1000.0):
    expires = None if lifetime_s is None else set_at + lifetime_s
    return CookieRecord(name="uid", value="1", domain=domain,
                        set_at=set_at, expires_at=expires)


def test_profiling_cookie_rule():
    assert is_profiling_cookie(cookie(90 * DAY))
    assert not is_profiling_cookie(cookie(30 * DAY))  # strictly longer than
    assert not is_profiling_cookie(cookie(None))
    assert is_profiling_cookie(cookie(30 * DAY + 1))


# --- classification -------------------------------------------------------------


def txn(host, cookies=(), url=None):
    return HttpTransaction(request_url=url or f"http://{host}/x", host=host,
                           status=200, bytes=10, started_at=0.0, finished_at=1.0,
                           set_cookies=tuple(cookies))


TRACKING = TrackerSet(domains={"doubleclick.net": 2, "tracker.co.uk": 3,
                               "half.example": 1}, sources=("a", "b", "c"))


def test_classify_spec_examples():
    assert classify_transaction(txn("cdn.example.com"), "example.com",
                                TRACKING) is DomainClass.FIRST_PARTY
    thirteen_months = cookie(395 * DAY, domain="doubleclick.net")
    assert classify_transaction(txn("ads.doubleclick.net", [thirteen_months]),
                                "a.example", TRACKING) is DomainClass.TRACKER
    session_only = cookie(None, domain="doubleclick.net")
    assert classify_transaction(txn("ads.doubleclick.net", [session_only]),
                                "a.example", TRACKING) is DomainClass.THIRD_PARTY


def test_tracking_requires_two_lists():
    profiling = cookie(90 * DAY, domain="half.example")
    assert classify_transaction(txn("px.half.example", [profiling]), "a.example",
                                TRACKING) is DomainClass.THIRD_PARTY


def test_cookie_scope_must_match_host():
    foreign_scope = cookie(90 * DAY, domain="other.example")
    assert classify_transaction(txn("ads.doubleclick.net", [foreign_scope]),
                                "a.example", TRACKING) is DomainClass.THIRD_PARTY


def test_monotonicity_adding_source_never_demotes():
    profiling = cookie(90 * DAY, domain="doubleclick.net")
    transaction = txn("ads.doubleclick.net", [profiling])
    before = classify_transaction(transaction, "a.example", TRACKING)
    more = TrackerSet(domains={**TRACKING.domains,
                               "doubleclick.net": TRACKING.domains["doubleclick.net"] + 1},
                      sources=("a", "b", "c", "d"))
    after = classify_transaction(transaction, "a.example", more)
    assert before is DomainClass.TRACKER and after is DomainClass.TRACKER


def _random_transactions(rng, count):
    """Synthetic log spanning all three classes, tie cases included."""
    site_domain = "mysite.example"
    hosts = [
        "mysite.example", "www.mysite.example", "cdn.mysite.example",
        "ads.doubleclick.net", "doubleclick.net", "px.tracker.co.uk",
        "cdn.half.example", "static.neutral.example", "api.other.org",
        "192.168.0.1", "a.b.example.com",
    ]
    lifetimes = [None, 10 * DAY, 30 * DAY, 30 * DAY + 1, 90 * DAY, 395 * DAY]
    cookie_domains = ["doubleclick.net", ".doubleclick.net", "tracker.co.uk",
                      "half.example", "other.example", "mysite.example"]
    transactions = []
    for _ in range(count):
        host = rng.choice(hosts)
        cookies = [cookie(rng.choice(lifetimes), domain=rng.choice(cookie_domains))
                   for _ in range(rng.randint(0, 3))]
        transactions.append(txn(host, cookies))
    return site_domain, transactions


def test_classifier_matches_brute_force_oracle_on_random_log():
    rng = random.Random(1234)
    site_domain, transactions = _random_transactions(rng, 1000)
    tracking_domains = TRACKING.tracking_domains()
    agreements = 0
    for transaction in transactions:
        got = classify_transaction(transaction, site_domain, TRACKING).value
        expected = classify_oracle(
            transaction.host,
            [(c.domain, c.lifetime_s) for c in transaction.set_cookies],
            site_domain, tracking_domains)
        assert got == expected, (transaction.host, transaction.set_cookies)
        agreements += 1
    assert agreements == 1000


def test_partition_every_transaction_gets_exactly_one_class():
    rng = random.Random(99)
    site_domain, transactions = _random_transactions(rng, 300)
    for transaction in transactions:
        klass = classify_transaction(transaction, site_domain, TRACKING)
        assert klass in (DomainClass.FIRST_PARTY, DomainClass.THIRD_PARTY,
                         DomainClass.TRACKER)
        if klass is DomainClass.TRACKER:
            assert registrable_domain_oracle(transaction.host) != site_domain
