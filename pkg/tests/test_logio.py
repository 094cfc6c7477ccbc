import io
import json

from consentcrawl.logio import (parse_visit_log, read_visit_logs,
                                visit_log_from_dict, visit_log_to_dict,
                                write_visit_log)
from consentcrawl.model import (AcceptOutcome, AcceptStatus, CacheMode,
                                CookieRecord, HttpTransaction, SiteEntry,
                                VisitLog, additional, BEFORE, WARM_UP)
from consentcrawl.trackers import TrackerSet

DAY = 86400.0


def cookie(name="uid", domain="trk.example", lifetime=None, value="v"):
    return CookieRecord(name=name, value=value, domain=domain, set_at=0.0,
                        expires_at=None if lifetime is None else lifetime)


def sample_log(phase=BEFORE, error=None, klass="third_party"):
    transactions = ()
    accept = None
    if error is None and phase == BEFORE:
        transactions = (
            HttpTransaction(request_url="http://www.a.example/", host="www.a.example",
                            status=200, bytes=5120, started_at=0.0, finished_at=12.0,
                            klass="first_party"),
            HttpTransaction(request_url="http://px.trk.example/p.gif",
                            host="px.trk.example", status=200, bytes=43,
                            started_at=12.0, finished_at=30.0,
                            set_cookies=(cookie(lifetime=395 * DAY, value=""),),
                            klass=klass),
        )
        accept = AcceptOutcome(status=AcceptStatus.ACCEPTED, matched_keyword="ok",
                               element_tag="button")
    return VisitLog(
        site=SiteEntry(url="http://www.a.example/", country="IT",
                       category="news", rank=17),
        phase=phase, repetition=2, visited_url="http://www.a.example/",
        cache_mode=CacheMode.WARM,
        onload_ms=None if error else 123.5,
        transactions=transactions,
        cookies_after=(cookie(lifetime=90 * DAY),) if error is None else (),
        accept=accept, error=error,
    )


def test_line_is_standalone_json():
    sink = io.StringIO()
    write_visit_log(sink, sample_log())
    line = sink.getvalue()
    assert line.endswith("\n")
    data = json.loads(line)
    assert data["site"]["url"] == "http://www.a.example/"
    assert data["phase"] == "before"
    assert data["transactions"][1]["class"] == "third_party"
    assert data["transactions"][1]["cookies"][0]["profiling"] is True


def test_schema_field_names():
    data = visit_log_to_dict(sample_log())
    assert list(data) == ["site", "phase", "repetition", "visited_url", "onload_ms",
                          "cache_mode", "accept", "transactions", "cookies_after",
                          "error", "screenshot_path"]
    assert list(data["site"]) == ["url", "country", "category", "rank"]
    txn = data["transactions"][0]
    assert list(txn) == ["url", "host", "status", "bytes", "started_at",
                         "finished_at", "class", "cookies"]


def test_round_trip_structural_equality():
    # cookies in this log are anchored at set_at=0 with empty transaction
    # values, exactly what the format preserves: equality is on the nose
    for log in (sample_log(), sample_log(error="PageTimeout: 60000 ms"),
                sample_log(phase=WARM_UP), sample_log(phase=additional(2))):
        line = json.dumps(visit_log_to_dict(log))
        assert visit_log_from_dict(json.loads(line)) == log


def test_serialization_fixed_point():
    log = sample_log()
    first = json.dumps(visit_log_to_dict(log))
    reparsed = visit_log_from_dict(json.loads(first))
    assert json.dumps(visit_log_to_dict(reparsed)) == first


def test_reclassification_at_write_time():
    log = sample_log(klass=None)
    tracker_set = TrackerSet(domains={"trk.example": 2}, sources=("a", "b"))
    data = visit_log_to_dict(log, tracker_set)
    assert data["transactions"][0]["class"] == "first_party"
    assert data["transactions"][1]["class"] == "tracker"
    relaxed = TrackerSet(domains={"trk.example": 1}, sources=("a", "b"))
    assert visit_log_to_dict(log, relaxed)["transactions"][1]["class"] == "third_party"


def test_stream_line_count():
    sink = io.StringIO()
    logs = [sample_log(phase=additional(i + 1)) for i in range(50)]
    for log in logs:
        write_visit_log(sink, log)
    lines = sink.getvalue().splitlines()
    assert len(lines) == 50
    assert [l.phase for l in read_visit_logs(lines)] == [l.phase for l in logs]


def test_parse_single_line_helper():
    line = json.dumps(visit_log_to_dict(sample_log()))
    assert parse_visit_log(line).site.rank == 17
