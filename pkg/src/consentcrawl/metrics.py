"""Aggregate measurement metrics over classified visit logs.

All operations are pure functions over immutable VisitLogs whose transactions
already carry a classification. Multi-repetition handling: domain presence and
pervasiveness use the union across repetitions; per-site numeric values (bytes,
objects, onLoad) use the median across repetitions to damp noise.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from statistics import median
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import AcceptStatus, PhaseKind, VisitLog
from .trackers import DomainClass, _reduce_or_self

logger = logging.getLogger(__name__)


class EmptyInput(ValueError):
    pass


class DegenerateInput(ValueError):
    """Rank correlation is undefined for constant vectors."""


class UndefinedRatio(ZeroDivisionError):
    """Before/After ratio with a zero Before measurement; report as absent."""


class PhaseSelector(Enum):
    """Which visit phases feed a metric; a domain counts for a site if seen
    in any selected phase of any repetition."""

    BEFORE = frozenset({PhaseKind.BEFORE})
    AFTER = frozenset({PhaseKind.AFTER})
    AFTER_PLUS_ADDITIONAL = frozenset({PhaseKind.AFTER, PhaseKind.ADDITIONAL})

    def admits(self, log: VisitLog) -> bool:
        return log.phase.kind in self.value


# ---------------------------------------------------------------------------
# per-site grouping helpers


def _logs_by_site(logs: Iterable[VisitLog]) -> dict[str, list[VisitLog]]:
    """Group logs by site URL: the unit of 'distinct site' everywhere."""
    by_site: dict[str, list[VisitLog]] = defaultdict(list)
    for log in logs:
        by_site[log.site.url].append(log)
    if not by_site:
        raise EmptyInput("no visit logs")
    return by_site


def _domains_with_class(site_logs: Iterable[VisitLog], selector: PhaseSelector,
                        kind: DomainClass) -> set[str]:
    domains: set[str] = set()
    for log in site_logs:
        if not selector.admits(log):
            continue
        for txn in log.transactions:
            if txn.klass == kind.value:
                domains.add(_reduce_or_self(txn.host))
    return domains


def _third_party_domain_count(site_logs: Iterable[VisitLog], selector: PhaseSelector) -> int:
    """Distinct foreign domains (Third-Party and Tracker classes together)."""
    domains: set[str] = set()
    for log in site_logs:
        if not selector.admits(log):
            continue
        for txn in log.transactions:
            if txn.klass in (DomainClass.THIRD_PARTY.value, DomainClass.TRACKER.value):
                domains.add(_reduce_or_self(txn.host))
    return len(domains)


def _site_accepted(site_logs: Iterable[VisitLog]) -> bool:
    return any(
        log.accept is not None and log.accept.status is AcceptStatus.ACCEPTED
        for log in site_logs
    )


# ---------------------------------------------------------------------------
# spec operations


def pervasiveness(logs: Iterable[VisitLog], selector: PhaseSelector,
                  kind: DomainClass) -> dict[str, float]:
    """Fraction of distinct sites where each domain appears with the given
    class in the selected phases. Domains never seen are absent from the map."""
    by_site = _logs_by_site(logs)
    total = len(by_site)
    counts: dict[str, int] = defaultdict(int)
    for site_logs in by_site.values():
        for domain in _domains_with_class(site_logs, selector, kind):
            counts[domain] += 1
    return {domain: n / total for domain, n in counts.items()}


@dataclass(frozen=True)
class GroupPresence:
    """Tracker presence within one country/category group."""

    fraction_with_tracker: float
    mean_trackers: float
    sites: int
    accepted_sites: int
    mean_trackers_accepted_only: Optional[float]

    def as_pair(self) -> tuple[float, float]:
        return (self.fraction_with_tracker, self.mean_trackers)


def presence_and_mean(logs: Iterable[VisitLog], group_by: str,
                      selector: PhaseSelector) -> dict[str, GroupPresence]:
    """Per group: fraction of sites with >=1 Tracker domain and the mean count
    of distinct Tracker domains per site (union across repetitions).

    group_by is "country", "category" or "none". Sites with a blank group tag
    are skipped with a warning. The mean over accepted-only sites rides along
    because the all-sites/accepted-only choice is ambiguous in reporting.
    """
    if group_by not in ("country", "category", "none"):
        raise ValueError(f"unknown group_by {group_by!r}")
    by_site = _logs_by_site(logs)

    groups: dict[str, list[list[VisitLog]]] = defaultdict(list)
    for site_logs in by_site.values():
        if group_by == "none":
            groups["all"].append(site_logs)
            continue
        tags = {getattr(log.site, group_by) for log in site_logs}
        tags.discard("")
        if not tags:
            logger.warning("site %s has no %s tag; skipped from grouping",
                           site_logs[0].site.url, group_by)
            continue
        for tag in tags:
            groups[tag].append(site_logs)

    result: dict[str, GroupPresence] = {}
    for tag, members in sorted(groups.items()):
        counts = [len(_domains_with_class(m, selector, DomainClass.TRACKER)) for m in members]
        accepted_flags = [_site_accepted(m) for m in members]
        accepted_counts = [c for c, a in zip(counts, accepted_flags) if a]
        result[tag] = GroupPresence(
            fraction_with_tracker=sum(1 for c in counts if c >= 1) / len(counts),
            mean_trackers=sum(counts) / len(counts),
            sites=len(members),
            accepted_sites=sum(accepted_flags),
            mean_trackers_accepted_only=(
                sum(accepted_counts) / len(accepted_counts) if accepted_counts else None
            ),
        )
    return result


def ratio_r(before_value: float, after_value: float) -> float:
    """After/Before ratio of one metric; undefined (absent) for a zero Before."""
    if before_value <= 0:
        raise UndefinedRatio("ratio undefined for before_value == 0")
    return after_value / before_value


def ccdf(values: Sequence[float]) -> list[tuple[float, float]]:
    """(x, fraction of samples strictly greater than x) at each distinct value."""
    if len(values) == 0:
        raise EmptyInput("ccdf needs at least one value")
    arr = np.asarray(values, dtype=float)
    xs, counts = np.unique(arr, return_counts=True)
    greater = len(arr) - np.cumsum(counts)
    return [(float(x), float(g) / len(arr)) for x, g in zip(xs, greater)]


def _average_ranks(values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="mergesort")
    ranks = np.empty(len(arr), dtype=float)
    sorted_vals = arr[order]
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0  # mean of 1-based ranks i+1..j+1
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation: Pearson over average-ranked data (ties get
    their mean rank). Raises DegenerateInput when either vector is constant."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("spearman needs two equal-length vectors of size >= 2")
    rx, ry = _average_ranks(xs), _average_ranks(ys)
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        raise DegenerateInput("rank correlation undefined for constant input")
    return float(np.corrcoef(rx, ry)[0, 1])


@dataclass(frozen=True)
class BoxplotStats:
    p10: float
    q1: float
    median: float
    q3: float
    p90: float


def boxplot_stats(values: Sequence[float]) -> BoxplotStats:
    """10th/25th/50th/75th/90th percentiles via inclusive linear interpolation."""
    if len(values) == 0:
        raise EmptyInput("boxplot_stats needs at least one value")
    p10, q1, med, q3, p90 = np.percentile(np.asarray(values, dtype=float),
                                          [10, 25, 50, 75, 90], method="linear")
    return BoxplotStats(float(p10), float(q1), float(med), float(q3), float(p90))


def rank_block_series(logs: Iterable[VisitLog], block_size: int, metric: str,
                      selector: PhaseSelector = PhaseSelector.BEFORE,
                      ) -> list[tuple[int, float]]:
    """Bucket ranked sites into rank blocks and compute a per-bucket metric.

    metric "acceptance_rate": fraction of sites in the block with an accepted
    banner. metric "mean_third_parties": mean distinct foreign-domain count
    per site under the given phase selector. Unranked sites and empty buckets
    are omitted; points come back in rank order keyed by the block's first rank.
    """
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    if metric not in ("acceptance_rate", "mean_third_parties"):
        raise ValueError(f"unknown metric {metric!r}")
    by_site = _logs_by_site(logs)
    buckets: dict[int, list[float]] = defaultdict(list)
    for site_logs in by_site.values():
        rank = site_logs[0].site.rank
        if rank is None:
            continue
        if metric == "acceptance_rate":
            value = 1.0 if _site_accepted(site_logs) else 0.0
        else:
            value = float(_third_party_domain_count(site_logs, selector))
        buckets[(rank - 1) // block_size].append(value)
    return [
        (bucket * block_size + 1, sum(vals) / len(vals))
        for bucket, vals in sorted(buckets.items())
    ]


# ---------------------------------------------------------------------------
# whole-campaign report


ADDED_TP_BUCKETS = [(0, 0, "0"), (1, 10, "1-10"), (11, 20, "11-20"),
                    (21, 50, "21-50"), (51, None, ">50")]


def _bucket_label(added: int) -> str:
    for low, high, label in ADDED_TP_BUCKETS:
        if added >= low and (high is None or added <= high):
            return label
    return "0"


@dataclass(frozen=True)
class SiteComparison:
    """Per-site Before/After medians for size, objects and onLoad."""

    url: str
    bytes_before: float
    bytes_after: Optional[float]
    objects_before: float
    objects_after: Optional[float]
    onload_before_ms: Optional[float]
    onload_after_ms: Optional[float]
    added_third_parties: Optional[int]
    accepted: bool


@dataclass
class CampaignReport:
    """Everything the report CSVs are rendered from."""

    sites: int
    pervasiveness: dict[tuple[str, str], dict[str, float]] = field(default_factory=dict)
    presence: dict[tuple[str, str], dict[str, GroupPresence]] = field(default_factory=dict)
    acceptance: dict[str, dict[str, tuple[int, int]]] = field(default_factory=dict)
    comparisons: list[SiteComparison] = field(default_factory=list)
    ccdf_third_parties: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    onload_boxplots: list[tuple[str, str, int, BoxplotStats]] = field(default_factory=list)
    rank_blocks: dict[str, list[tuple[int, float]]] = field(default_factory=dict)


def _phase_median(site_logs: list[VisitLog], kind: PhaseKind,
                  value) -> Optional[float]:
    vals = [value(log) for log in site_logs if log.phase.kind is kind and log.ok]
    if not vals:
        return None
    return float(median(vals))


def build_campaign_report(logs: Sequence[VisitLog], rank_block_size: int = 5000) -> CampaignReport:
    by_site = _logs_by_site(logs)
    report = CampaignReport(sites=len(by_site))

    selectors = [("before", PhaseSelector.BEFORE), ("after", PhaseSelector.AFTER),
                 ("after_plus_additional", PhaseSelector.AFTER_PLUS_ADDITIONAL)]
    for kind in (DomainClass.THIRD_PARTY, DomainClass.TRACKER):
        for name, selector in selectors:
            report.pervasiveness[(kind.value, name)] = pervasiveness(logs, selector, kind)
    for group_by in ("none", "country", "category"):
        for name, selector in selectors:
            report.presence[(group_by, name)] = presence_and_mean(logs, group_by, selector)

    for group_by in ("none", "country", "category"):
        table: dict[str, tuple[int, int]] = {}
        groups: dict[str, list[bool]] = defaultdict(list)
        for site_logs in by_site.values():
            tag = "all" if group_by == "none" else getattr(site_logs[0].site, group_by)
            if not tag:
                continue
            groups[tag].append(_site_accepted(site_logs))
        for tag, flags in sorted(groups.items()):
            table[tag] = (len(flags), sum(flags))
        report.acceptance[group_by] = table

    for url in sorted(by_site):
        site_logs = by_site[url]
        accepted = _site_accepted(site_logs)
        bytes_before = _phase_median(site_logs, PhaseKind.BEFORE,
                                     lambda l: sum(t.bytes for t in l.transactions))
        objects_before = _phase_median(site_logs, PhaseKind.BEFORE,
                                       lambda l: len(l.transactions))
        if bytes_before is None or objects_before is None:
            continue
        bytes_after = _phase_median(site_logs, PhaseKind.AFTER,
                                    lambda l: sum(t.bytes for t in l.transactions))
        objects_after = _phase_median(site_logs, PhaseKind.AFTER,
                                      lambda l: len(l.transactions))
        tp_before = _third_party_domain_count(site_logs, PhaseSelector.BEFORE)
        tp_after = _third_party_domain_count(site_logs, PhaseSelector.AFTER)
        report.comparisons.append(SiteComparison(
            url=url,
            bytes_before=bytes_before,
            bytes_after=bytes_after,
            objects_before=objects_before,
            objects_after=objects_after,
            onload_before_ms=_phase_median(site_logs, PhaseKind.BEFORE, lambda l: l.onload_ms),
            onload_after_ms=_phase_median(site_logs, PhaseKind.AFTER, lambda l: l.onload_ms),
            added_third_parties=(tp_after - tp_before) if accepted else None,
            accepted=accepted,
        ))

    tp_counts_before = [float(_third_party_domain_count(m, PhaseSelector.BEFORE))
                        for m in by_site.values()]
    accepted_sites = [m for m in by_site.values() if _site_accepted(m)]
    report.ccdf_third_parties["before"] = ccdf(tp_counts_before)
    if accepted_sites:
        report.ccdf_third_parties["after"] = ccdf(
            [float(_third_party_domain_count(m, PhaseSelector.AFTER)) for m in accepted_sites])

    grouped: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for comparison in report.comparisons:
        if comparison.added_third_parties is None:
            continue
        label = _bucket_label(comparison.added_third_parties)
        if comparison.onload_before_ms is not None:
            grouped[label]["before"].append(comparison.onload_before_ms)
        if comparison.onload_after_ms is not None:
            grouped[label]["after"].append(comparison.onload_after_ms)
    bucket_order = [label for _, _, label in ADDED_TP_BUCKETS]
    for label in bucket_order:
        for phase in ("before", "after"):
            vals = grouped.get(label, {}).get(phase, [])
            if vals:
                report.onload_boxplots.append((label, phase, len(vals), boxplot_stats(vals)))

    if any(m[0].site.rank is not None for m in by_site.values()):
        report.rank_blocks["acceptance_rate"] = rank_block_series(
            logs, rank_block_size, "acceptance_rate")
        report.rank_blocks["mean_third_parties_before"] = rank_block_series(
            logs, rank_block_size, "mean_third_parties", PhaseSelector.BEFORE)
        report.rank_blocks["mean_third_parties_after"] = rank_block_series(
            logs, rank_block_size, "mean_third_parties", PhaseSelector.AFTER)
    return report
