"""Command-line entry point.

Runs a crawl campaign (fixture or live driver), streams visit logs to
``visits.jsonl`` and renders the report CSVs, or re-analyzes an existing log
file with ``--analyze-only``. Per-site failures are data in the logs, not
exit codes: exit 2 means a configuration problem, exit 1 an unrecoverable
I/O error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .fixtures import load_corpus
from .keywords import default_keywords, load_keywords
from .logio import (read_visit_logs, visit_log_from_dict, visit_log_to_dict,
                    write_visit_log)
from .metrics import CampaignReport, build_campaign_report, ratio_r, UndefinedRatio
from .model import CacheMode, VisitLog, parse_site_list
from .orchestrator import CrawlConfig, run_campaign
from .session import FixtureSession, SessionConfig
from .trackers import load_tracker_set

logger = logging.getLogger(__name__)

REPORT_FILES = ["pervasiveness.csv", "presence_by_group.csv", "ratios.csv",
                "ccdf.csv", "onload_boxplots.csv", "rank_blocks.csv",
                "acceptance.csv"]


class ConfigError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consentcrawl",
        description="Measure websites before and after accepting their consent banner.")
    parser.add_argument("--sites", help="site list CSV (url,country,category,rank)")
    parser.add_argument("--keywords", help="accept-keyword file (default: shipped list)")
    parser.add_argument("--trackers", help="tracker manifest JSON (source name -> list file)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--workers", type=int, default=16)
    parser.add_argument("--repetitions", type=int, default=5)
    parser.add_argument("--internal-pages", type=int, default=5)
    parser.add_argument("--cold-cache", action="store_true",
                        help="clear the cache before every visit and skip warm-ups")
    parser.add_argument("--settle-ms", type=int, default=5000,
                        help="delay between page load and DOM inspection")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--screenshots", action="store_true")
    parser.add_argument("--user-agent", default=SessionConfig().user_agent)
    parser.add_argument("--accept-language", default=SessionConfig().accept_language)
    parser.add_argument("--page-timeout-ms", type=int, default=SessionConfig().page_timeout_ms)
    parser.add_argument("--driver", default=None,
                        help="live:<host:port> or fixture:<corpus dir>")
    parser.add_argument("--analyze-only", metavar="JSONL",
                        help="skip the crawl; rebuild reports from an existing log file")
    parser.add_argument("--rank-block-size", type=int, default=5000)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load_keyword_list(path: Optional[str]):
    if path is None:
        return default_keywords()
    keyword_path = Path(path)
    if not keyword_path.is_file():
        raise ConfigError(f"--keywords: no such file: {path}")
    return load_keywords(keyword_path.read_text(encoding="utf-8"))


def _session_factory(driver: str, session_config: SessionConfig, corpus_holder: dict):
    kind, _, value = driver.partition(":")
    if kind == "fixture":
        if not Path(value).is_dir():
            raise ConfigError(f"--driver fixture: no such corpus directory: {value}")
        corpus = load_corpus(value)
        corpus_holder["corpus"] = corpus
        origin = corpus.origin()
        return lambda: FixtureSession(origin, session_config)
    if kind == "live":
        if not value:
            raise ConfigError("--driver live needs an endpoint, e.g. live:127.0.0.1:9222")
        from .cdp import CdpSession
        return lambda: CdpSession(value, session_config)
    raise ConfigError(f"--driver must be live:<endpoint> or fixture:<dir>, got {driver!r}")


def _crawl(args, out_dir: Path) -> list[VisitLog]:
    if not args.driver:
        raise ConfigError("--driver is required unless --analyze-only is given")
    session_config = SessionConfig(user_agent=args.user_agent,
                                   accept_language=args.accept_language,
                                   page_timeout_ms=args.page_timeout_ms)
    corpus_holder: dict = {}
    factory = _session_factory(args.driver, session_config, corpus_holder)
    corpus = corpus_holder.get("corpus")

    sites_path = args.sites or (corpus and str(corpus.site_list_path))
    if not sites_path or not Path(sites_path).is_file():
        raise ConfigError(f"--sites: no such file: {sites_path}")
    sites = parse_site_list(Path(sites_path).read_text(encoding="utf-8"))
    if not sites:
        raise ConfigError(f"--sites: {sites_path} lists no sites")

    trackers_path = args.trackers or (corpus and str(corpus.tracker_manifest_path))
    if not trackers_path or not Path(trackers_path).is_file():
        raise ConfigError(f"--trackers: no such file: {trackers_path}")
    tracker_set = load_tracker_set(trackers_path)

    keywords = _load_keyword_list(args.keywords)
    config = CrawlConfig(
        workers=args.workers, repetitions=args.repetitions,
        additional_pages=args.internal_pages,
        cache_mode=CacheMode.COLD if args.cold_cache else CacheMode.WARM,
        settle_ms=args.settle_ms, seed=args.seed, screenshots=args.screenshots,
        screenshot_dir=str(out_dir / "screenshots") if args.screenshots else None,
    )
    if config.screenshot_dir:
        Path(config.screenshot_dir).mkdir(parents=True, exist_ok=True)

    items = list(run_campaign(sites, config, factory, keywords))
    items.sort(key=lambda item: (item.repetition, item.order_index))

    logs: list[VisitLog] = []
    with open(out_dir / "visits.jsonl", "w", encoding="utf-8") as sink:
        for item in items:
            for log in item.result.logs:
                write_visit_log(sink, log, tracker_set)
                logs.append(log)
    # reports always come from the persisted form, same as --analyze-only
    with open(out_dir / "visits.jsonl", encoding="utf-8") as source:
        return list(read_visit_logs(source))


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(cell) for cell in row])


def write_reports(report: CampaignReport, report_dir: Path) -> None:
    report_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for (kind, phase), table in sorted(report.pervasiveness.items()):
        rows.extend((kind, phase, domain, fraction)
                    for domain, fraction in sorted(table.items(),
                                                   key=lambda kv: (-kv[1], kv[0])))
    _write_csv(report_dir / "pervasiveness.csv",
               ["class", "phase", "domain", "fraction_of_sites"], rows)

    rows = []
    for (group_by, phase), table in sorted(report.presence.items()):
        for group, presence in sorted(table.items()):
            rows.append((group_by, group, phase, presence.sites, presence.accepted_sites,
                         presence.fraction_with_tracker, presence.mean_trackers,
                         presence.mean_trackers_accepted_only))
    _write_csv(report_dir / "presence_by_group.csv",
               ["group_by", "group", "phase", "sites", "accepted_sites",
                "fraction_with_tracker", "mean_trackers", "mean_trackers_accepted_only"],
               rows)

    rows = []
    for comparison in report.comparisons:
        ratio_bytes = ratio_objects = None
        if comparison.accepted and comparison.bytes_after is not None:
            try:
                ratio_bytes = ratio_r(comparison.bytes_before, comparison.bytes_after)
            except UndefinedRatio:
                pass
            try:
                ratio_objects = ratio_r(comparison.objects_before, comparison.objects_after)
            except UndefinedRatio:
                pass
        rows.append((comparison.url, comparison.bytes_before, comparison.bytes_after,
                     ratio_bytes, comparison.objects_before, comparison.objects_after,
                     ratio_objects))
    _write_csv(report_dir / "ratios.csv",
               ["site", "bytes_before", "bytes_after", "ratio_bytes",
                "objects_before", "objects_after", "ratio_objects"], rows)

    rows = []
    for phase, points in sorted(report.ccdf_third_parties.items()):
        rows.extend(("third_party_domains", phase, x, fraction) for x, fraction in points)
    _write_csv(report_dir / "ccdf.csv",
               ["metric", "phase", "x", "fraction_strictly_greater"], rows)

    rows = [(bucket, phase, count, stats.p10, stats.q1, stats.median, stats.q3, stats.p90)
            for bucket, phase, count, stats in report.onload_boxplots]
    _write_csv(report_dir / "onload_boxplots.csv",
               ["added_third_parties", "phase", "sites", "p10_ms", "q1_ms",
                "median_ms", "q3_ms", "p90_ms"], rows)

    rows = []
    for metric, points in sorted(report.rank_blocks.items()):
        rows.extend((metric, start, value) for start, value in points)
    _write_csv(report_dir / "rank_blocks.csv",
               ["metric", "block_start_rank", "value"], rows)

    rows = []
    for group_by, table in sorted(report.acceptance.items()):
        for group, (sites, accepted) in sorted(table.items()):
            rows.append((group_by, group, sites, accepted, accepted / sites))
    _write_csv(report_dir / "acceptance.csv",
               ["group_by", "group", "sites", "accepted", "acceptance_rate"], rows)


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory {out_dir}: {exc}", file=sys.stderr)
        return 1

    try:
        if args.analyze_only:
            source_path = Path(args.analyze_only)
            if not source_path.is_file():
                raise ConfigError(f"--analyze-only: no such file: {args.analyze_only}")
            with open(source_path, encoding="utf-8") as source:
                logs = list(read_visit_logs(source))
            if args.trackers:
                tracker_set = load_tracker_set(args.trackers)
                logs = [visit_log_from_dict(visit_log_to_dict(log, tracker_set))
                        for log in logs]
        else:
            logs = _crawl(args, out_dir)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1

    try:
        report = build_campaign_report(logs, rank_block_size=args.rank_block_size)
        write_reports(report, out_dir / "report")
    except OSError as exc:
        print(f"I/O error while writing reports: {exc}", file=sys.stderr)
        return 1
    return 0


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
