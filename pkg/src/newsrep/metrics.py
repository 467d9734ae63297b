"""Measurement machinery: class recalls/precision by share-count slice,
per-site flagged percentages, cross-ground-truth discovery, and the
site-correlation measure.

All percentages are 0..100 and every percentage is reported next to the raw
counts it came from; metrics with an empty denominator are explicit ``None``,
never silently zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .graph import NewsItem, ShareGraph
from .ingest import GroundTruth


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fn: int = 0
    fp: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


@dataclass
class SliceMetrics:
    min_shares: int
    confusion: Confusion
    hoax_recall: float | None
    nonhoax_recall: float | None
    hoax_precision: float | None


@dataclass
class SiteRow:
    site: str
    n_urls: int
    n_flagged: int

    @property
    def pct_flagged(self) -> float:
        return 100.0 * self.n_flagged / self.n_urls


@dataclass
class CrossGTReport:
    train_gt: str
    other_gt: str
    n_diff_urls: int
    n_diff_flagged: int
    direct_url_pct: float | None
    n_qualifying_sites: int
    n_detected_sites: int
    site_detect_pct: float | None
    n_suspicious_urls: int
    suspicious_url_pct: float | None
    site_threshold_pct: float
    min_urls: int
    detected_sites: list[str] = field(default_factory=list)


@dataclass
class EvalReport:
    method: str
    split_name: str
    slices: list[SliceMetrics]
    site_table: list[SiteRow]
    cross_gt: CrossGTReport | None = None
    config: dict = field(default_factory=dict)


def _pct(numer: int, denom: int) -> float | None:
    return 100.0 * numer / denom if denom else None


def confusion_counts(labels: dict[str, bool], predictions: dict[str, bool],
                     item_ids) -> Confusion:
    tp = fn = fp = tn = 0
    for iid in item_ids:
        actual = labels[iid]
        predicted = predictions[iid]
        if actual and predicted:
            tp += 1
        elif actual:
            fn += 1
        elif predicted:
            fp += 1
        else:
            tn += 1
    return Confusion(tp=tp, fn=fn, fp=fp, tn=tn)


def score_metrics(labels: dict[str, bool], predictions: dict[str, bool],
                  share_counts: dict[str, int], min_shares: int = 1) -> SliceMetrics:
    """Confusion and derived metrics over items with >= min_shares sharers.

    Every prediction must have a label and a share count.
    """
    missing = [iid for iid in predictions if iid not in labels]
    if missing:
        raise KeyError(f"predictions without labels: {missing[:5]}")
    item_ids = [iid for iid in predictions if share_counts[iid] >= min_shares]
    cm = confusion_counts(labels, predictions, item_ids)
    return SliceMetrics(
        min_shares=min_shares,
        confusion=cm,
        hoax_recall=_pct(cm.tp, cm.tp + cm.fn),
        nonhoax_recall=_pct(cm.tn, cm.tn + cm.fp),
        hoax_precision=_pct(cm.tp, cm.tp + cm.fp),
    )


def per_site_table(items: list[NewsItem], predictions: dict[str, bool],
                   min_urls: int = 1) -> list[SiteRow]:
    """Per-site flagged percentages over the predicted items.

    Sites with fewer than ``min_urls`` predicted items are excluded; rows are
    sorted by URL count descending (site name breaks ties).
    """
    counts: dict[str, list[int]] = {}
    for it in items:
        pred = predictions.get(it.item_id)
        if pred is None:
            continue
        row = counts.setdefault(it.site, [0, 0])
        row[0] += 1
        row[1] += int(pred)
    rows = [SiteRow(site=s, n_urls=n, n_flagged=f)
            for s, (n, f) in counts.items() if n >= min_urls]
    rows.sort(key=lambda r: (-r.n_urls, r.site))
    return rows


def cross_gt_detect(train_gt: GroundTruth, other_gt: GroundTruth,
                    items: list[NewsItem], predictions: dict[str, bool],
                    site_threshold_pct: float = 5.0, min_urls: int = 20) -> CrossGTReport:
    """How well predictions recover sites known only to the other ground truth.

    Over the items whose site appears in ``other_gt`` but not ``train_gt``:
    the fraction directly flagged; the fraction of such sites (with at least
    ``min_urls`` items) whose flagged percentage exceeds the threshold; and
    the fraction of items belonging to those detected sites.
    """
    diff_sites = set(other_gt.sites) - set(train_gt.sites)
    diff_items = [it for it in items if it.site in diff_sites and it.item_id in predictions]
    n_flagged = sum(1 for it in diff_items if predictions[it.item_id])
    by_site = per_site_table(diff_items, predictions, min_urls=min_urls)
    detected = sorted(r.site for r in by_site if r.pct_flagged > site_threshold_pct)
    detected_set = set(detected)
    n_suspicious = sum(1 for it in diff_items if it.site in detected_set)
    return CrossGTReport(
        train_gt=train_gt.name,
        other_gt=other_gt.name,
        n_diff_urls=len(diff_items),
        n_diff_flagged=n_flagged,
        direct_url_pct=_pct(n_flagged, len(diff_items)),
        n_qualifying_sites=len(by_site),
        n_detected_sites=len(detected),
        site_detect_pct=_pct(len(detected), len(by_site)),
        n_suspicious_urls=n_suspicious,
        suspicious_url_pct=_pct(n_suspicious, len(diff_items)),
        site_threshold_pct=site_threshold_pct,
        min_urls=min_urls,
        detected_sites=detected,
    )


# -- site correlation --------------------------------------------------


def _site_tweet_vectors(graph: ShareGraph) -> dict[str, dict[int, int]]:
    """Per-site map of user index -> tweet count (raw multiplicity)."""
    vectors: dict[str, dict[int, int]] = {it.site: {} for it in graph.items}
    for ii, ui, _ in graph.edges:
        vec = vectors[graph.items[ii].site]
        vec[ui] = vec.get(ui, 0) + 1
    return vectors


def _cosine(va: dict[int, int], vb: dict[int, int]) -> float:
    if not va or not vb:
        return 0.0
    if len(vb) < len(va):
        va, vb = vb, va
    dot = sum(c * vb.get(u, 0) for u, c in va.items())
    norm_a = sum(c * c for c in va.values())
    norm_b = sum(c * c for c in vb.values())
    return dot / np.sqrt(norm_a * norm_b)


def site_correlation(graph: ShareGraph, site_a: str, site_b: str) -> float:
    """Cosine similarity of two sites' per-user tweet-count profiles."""
    vectors = _site_tweet_vectors(graph)
    for site in (site_a, site_b):
        if site not in vectors:
            raise KeyError(f"unknown site: {site}")
    return float(_cosine(vectors[site_a], vectors[site_b]))


def correlation_matrix(graph: ShareGraph, sites: list[str]) -> np.ndarray:
    """Symmetric site-correlation matrix with unit diagonal for nonempty sites."""
    vectors = _site_tweet_vectors(graph)
    for site in sites:
        if site not in vectors:
            raise KeyError(f"unknown site: {site}")
    n = len(sites)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            value = _cosine(vectors[sites[i]], vectors[sites[j]])
            out[i, j] = out[j, i] = value
    return out


# -- report assembly and rendering --------------------------------------

SHARE_SLICES = (1, 2, 5, 10)


def build_report(labels: dict[str, bool], predictions: dict[str, bool],
                 items: list[NewsItem], share_counts: dict[str, int],
                 method: str = "", split_name: str = "",
                 slices=SHARE_SLICES, site_min_urls: int = 1,
                 train_gt: GroundTruth | None = None,
                 other_gt: GroundTruth | None = None,
                 config: dict | None = None) -> EvalReport:
    slice_metrics = [score_metrics(labels, predictions, share_counts, m) for m in slices]
    table = per_site_table(items, predictions, min_urls=site_min_urls)
    cross = None
    if train_gt is not None and other_gt is not None:
        cross = cross_gt_detect(train_gt, other_gt, items, predictions)
    return EvalReport(method=method, split_name=split_name, slices=slice_metrics,
                      site_table=table, cross_gt=cross, config=dict(config or {}))


def report_to_dict(report: EvalReport) -> dict:
    return {
        "method": report.method,
        "split": report.split_name,
        "slices": [
            {
                "min_shares": s.min_shares,
                "counts": {"tp": s.confusion.tp, "fn": s.confusion.fn,
                           "fp": s.confusion.fp, "tn": s.confusion.tn},
                "hoax_recall": s.hoax_recall,
                "nonhoax_recall": s.nonhoax_recall,
                "hoax_precision": s.hoax_precision,
            }
            for s in report.slices
        ],
        "site_table": [
            {"site": r.site, "n_urls": r.n_urls, "n_flagged": r.n_flagged,
             "pct_flagged": r.pct_flagged}
            for r in report.site_table
        ],
        "cross_gt": None if report.cross_gt is None else {
            "train_gt": report.cross_gt.train_gt,
            "other_gt": report.cross_gt.other_gt,
            "n_diff_urls": report.cross_gt.n_diff_urls,
            "n_diff_flagged": report.cross_gt.n_diff_flagged,
            "direct_url_pct": report.cross_gt.direct_url_pct,
            "n_qualifying_sites": report.cross_gt.n_qualifying_sites,
            "n_detected_sites": report.cross_gt.n_detected_sites,
            "site_detect_pct": report.cross_gt.site_detect_pct,
            "n_suspicious_urls": report.cross_gt.n_suspicious_urls,
            "suspicious_url_pct": report.cross_gt.suspicious_url_pct,
            "site_threshold_pct": report.cross_gt.site_threshold_pct,
            "min_urls": report.cross_gt.min_urls,
            "detected_sites": report.cross_gt.detected_sites,
        },
        "config": report.config,
    }


def _fmt(value: float | None) -> str:
    return "   n/a" if value is None else f"{value:6.2f}"


def render_text(report: EvalReport, max_sites: int = 30) -> str:
    lines = []
    header = f"method={report.method or '?'} split={report.split_name or '?'}"
    lines.append(header)
    lines.append("-" * len(header))
    lines.append("slice        n      hoax-recall  nonhoax-recall  hoax-precision")
    for s in report.slices:
        label = "all" if s.min_shares <= 1 else f">={s.min_shares}"
        lines.append(
            f"{label:<8} {s.confusion.total:>6}       {_fmt(s.hoax_recall)}"
            f"          {_fmt(s.nonhoax_recall)}          {_fmt(s.hoax_precision)}"
        )
    if report.site_table:
        lines.append("")
        lines.append(f"{'site':<32} {'urls':>6} {'flagged':>8} {'pct':>7}")
        for row in report.site_table[:max_sites]:
            lines.append(f"{row.site:<32} {row.n_urls:>6} {row.n_flagged:>8} "
                         f"{row.pct_flagged:>6.2f}%")
        if len(report.site_table) > max_sites:
            lines.append(f"... {len(report.site_table) - max_sites} more sites")
    if report.cross_gt is not None:
        cg = report.cross_gt
        lines.append("")
        lines.append(f"cross-GT ({cg.train_gt} -> {cg.other_gt}): "
                     f"{cg.n_diff_urls} URLs in difference")
        lines.append(f"  direct URL detection:  {_fmt(cg.direct_url_pct)}%  "
                     f"({cg.n_diff_flagged}/{cg.n_diff_urls})")
        lines.append(f"  site detection:        {_fmt(cg.site_detect_pct)}%  "
                     f"({cg.n_detected_sites}/{cg.n_qualifying_sites} sites with "
                     f">={cg.min_urls} URLs above {cg.site_threshold_pct}%)")
        lines.append(f"  suspicious URL share:  {_fmt(cg.suspicious_url_pct)}%  "
                     f"({cg.n_suspicious_urls}/{cg.n_diff_urls})")
    return "\n".join(lines) + "\n"


def save_report(report: EvalReport, json_path, text_path=None, csv_path=None) -> None:
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if text_path is not None:
        with open(text_path, "w", encoding="utf-8") as fh:
            fh.write(render_text(report))
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("site,method,split,n_urls,pct_flagged\n")
            for row in report.site_table:
                fh.write(f"{row.site},{report.method},{report.split_name},"
                         f"{row.n_urls},{row.pct_flagged:.4f}\n")
