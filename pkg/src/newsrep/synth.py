"""Seeded synthetic share-corpus generator.

Stands in for a live social-network crawl: planted good / listed-bad /
hidden-bad sites, a user population split into hoax-prone and regular
sharers with heavy-tailed activity, heavy-tailed per-item share counts, and
class-conditional title vocabularies. Hidden-bad sites behave exactly like
listed-bad ones but are omitted from the primary ground-truth list, which is
what makes cross-ground-truth discovery measurable. Output uses exactly the
ingest record/CSV formats, so synthetic and real data are interchangeable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path

import numpy as np

from .graph import format_utc
from .ingest import GroundTruth, RawRecord


@dataclass
class SynthConfig:
    n_sites_good: int = 25
    n_sites_bad: int = 15
    n_hidden_bad: int = 8
    n_users: int = 3000
    items_per_good_site: float = 440.0
    items_per_bad_site: float = 440.0
    items_per_site_sigma: float = 0.25
    hoax_prone_frac: float = 0.15
    p_bad: float = 0.93
    casual_good_frac: float = 0.25
    casual_bad_frac: float = 0.02
    fresh_user_frac: float = 0.0
    user_activity_sigma: float = 0.6
    share_zipf_a: float = 2.1
    share_max: int = 400
    duplicate_tweet_prob: float = 0.05
    good_vocab: int = 400
    bad_vocab: int = 400
    common_vocab: int = 1200
    class_word_frac: float = 0.45
    title_words: tuple[int, int] = (5, 10)
    desc_words: tuple[int, int] = (10, 22)
    site_mention_prob: float = 0.1
    tracking_param_prob: float = 0.3
    start: date = date(2017, 9, 1)
    n_days: int = 56
    train_days: int = 30
    tweet_collect_days: int = 10
    share_window_days: int = 10
    other_gt_listed_frac: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.n_users < 1:
            raise ValueError("n_users must be >= 1")
        if not 0.0 <= self.hoax_prone_frac <= 1.0:
            raise ValueError("hoax_prone_frac must be in [0, 1]")
        if not 0.0 < self.p_bad <= 1.0:
            raise ValueError("p_bad must be in (0, 1]")
        if self.n_days < self.train_days + self.tweet_collect_days + 1:
            raise ValueError("n_days too small for the train/collect windows")


@dataclass
class SynthCorpus:
    records: list[RawRecord]
    gt_train: GroundTruth
    gt_other: GroundTruth
    site_classes: dict[str, str]
    split_specs: dict
    config: SynthConfig = field(repr=False)


def _weighted_distinct(rng: np.random.Generator, weights: np.ndarray, m: int) -> np.ndarray:
    """m distinct indices, probability proportional to weight (zeros excluded)."""
    positive = np.flatnonzero(weights > 0)
    m = min(m, len(positive))
    keys = rng.standard_exponential(len(positive)) / weights[positive]
    if m == len(positive):
        return positive
    picked = np.argpartition(keys, m)[:m]
    return positive[picked]


def default_split_specs(cfg: SynthConfig) -> dict:
    """Temporal split definitions matching the generated date layout."""
    train_start = cfg.start
    train_end = cfg.start + timedelta(days=cfg.train_days - 1)
    cutoff_day = cfg.start + timedelta(days=cfg.train_days + cfg.tweet_collect_days)
    test_start = cutoff_day
    test_end = cfg.start + timedelta(days=cfg.n_days - 1)
    return {
        "train": {
            "start": train_start.isoformat(),
            "end": train_end.isoformat(),
            "tweet_cutoff": datetime.combine(cutoff_day, time(0, 0),
                                             tzinfo=timezone.utc).isoformat(),
            "min_shares": 1,
        },
        "min2-train": {
            "start": train_start.isoformat(),
            "end": train_end.isoformat(),
            "tweet_cutoff": datetime.combine(cutoff_day, time(0, 0),
                                             tzinfo=timezone.utc).isoformat(),
            "min_shares": 2,
        },
        "test": {
            "start": test_start.isoformat(),
            "end": test_end.isoformat(),
            "min_shares": 1,
        },
    }


def generate(cfg: SynthConfig) -> SynthCorpus:
    """Build the full synthetic corpus for a config; same seed, same corpus."""
    rng = np.random.default_rng(cfg.seed)
    good_sites = [f"goodnews{i:03d}.com" for i in range(cfg.n_sites_good)]
    listed_bad = [f"fakenews{i:03d}.com" for i in range(cfg.n_sites_bad)]
    hidden_bad = [f"shadynews{i:03d}.com" for i in range(cfg.n_hidden_bad)]
    site_classes = {s: "good" for s in good_sites}
    site_classes.update({s: "listed_bad" for s in listed_bad})
    site_classes.update({s: "hidden_bad" for s in hidden_bad})

    n_prone = int(round(cfg.hoax_prone_frac * cfg.n_users))
    prone = np.zeros(cfg.n_users, dtype=bool)
    prone[:n_prone] = True
    activity = rng.lognormal(0.0, cfg.user_activity_sigma, cfg.n_users)
    user_ids = [f"u{i:05d}" for i in range(cfg.n_users)]

    # fresh users only start sharing in the test window, so they are unknown
    # at training time (mirrors user churn on a real network)
    arrival = np.zeros(cfg.n_users, dtype=np.int64)
    n_fresh = int(round(cfg.fresh_user_frac * cfg.n_users))
    test_start_day = cfg.train_days + cfg.tweet_collect_days
    if n_fresh and test_start_day < cfg.n_days:
        fresh_idx = rng.choice(cfg.n_users, size=n_fresh, replace=False)
        arrival[fresh_idx] = rng.integers(test_start_day, cfg.n_days, size=n_fresh)

    # fixed per-class sampling weights over users
    w_bad = activity * np.where(prone, cfg.p_bad, 1.0 - cfg.p_bad)
    w_good = activity * np.where(prone, 1.0 - cfg.p_bad, cfg.p_bad)

    good_words = [f"sun{i:04d}" for i in range(cfg.good_vocab)]
    bad_words = [f"rage{i:04d}" for i in range(cfg.bad_vocab)]
    common_words = [f"word{i:04d}" for i in range(cfg.common_vocab)]

    def sample_text(is_bad: bool, lo: int, hi: int) -> str:
        n_words = int(rng.integers(lo, hi + 1))
        words = []
        class_vocab = bad_words if is_bad else good_words
        for _ in range(n_words):
            if rng.random() < cfg.class_word_frac:
                words.append(class_vocab[int(rng.integers(0, len(class_vocab)))])
            else:
                words.append(common_words[int(rng.integers(0, len(common_words)))])
        return " ".join(words)

    records: list[RawRecord] = []
    tweet_no = 0
    item_no = 0
    casual_no = 0
    for site in good_sites + listed_bad + hidden_bad:
        is_bad = site_classes[site] != "good"
        mean = cfg.items_per_bad_site if is_bad else cfg.items_per_good_site
        n_items = max(1, int(round(rng.lognormal(np.log(mean), cfg.items_per_site_sigma))))
        weights = w_bad if is_bad else w_good
        casual_frac = cfg.casual_bad_frac if is_bad else cfg.casual_good_frac
        for _ in range(n_items):
            url = f"http://{site}/story-{item_no:06d}"
            item_no += 1
            day = int(rng.integers(0, cfg.n_days))
            first_ts = datetime.combine(
                cfg.start + timedelta(days=day),
                time(0, 0), tzinfo=timezone.utc,
            ) + timedelta(seconds=float(rng.uniform(0, 86399)))
            m = int(min(rng.zipf(cfg.share_zipf_a), cfg.share_max))
            # drive-by one-hit sharers never reappear; the rest come from the
            # persistent pool
            n_casual = int(rng.binomial(m, casual_frac)) if casual_frac > 0 else 0
            sharers = list(_weighted_distinct(rng, weights * (arrival <= day),
                                              m - n_casual))
            sharer_ids = [user_ids[ui] for ui in sharers]
            for _ in range(n_casual):
                sharer_ids.append(f"c{casual_no:06d}")
                casual_no += 1
            if not sharer_ids:
                continue
            offsets = np.concatenate([
                [0.0],
                np.sort(rng.uniform(0, cfg.share_window_days * 86400.0, len(sharer_ids) - 1)),
            ])
            title = sample_text(is_bad, *cfg.title_words)
            if rng.random() < cfg.site_mention_prob:
                title = f"{title} via {site}"
            description = sample_text(is_bad, *cfg.desc_words)
            for uid, off in zip(sharer_ids, offsets):
                ts = first_ts + timedelta(seconds=float(off))
                raw_url = url
                if rng.random() < cfg.tracking_param_prob:
                    raw_url = url + "?utm_source=feed&utm_medium=social"
                n_tweets = 2 if rng.random() < cfg.duplicate_tweet_prob else 1
                for k in range(n_tweets):
                    records.append(RawRecord(
                        tweet_id=f"t{tweet_no:08d}",
                        user_id=uid,
                        username=uid,
                        timestamp=ts + timedelta(seconds=60 * k),
                        raw_url=raw_url,
                        og_url=url,
                        og_title=title,
                        og_description=description,
                    ))
                    tweet_no += 1

    n_overlap = int(round(cfg.other_gt_listed_frac * len(listed_bad)))
    overlap = [listed_bad[i] for i in rng.choice(len(listed_bad), size=n_overlap,
                                                 replace=False)] if n_overlap else []
    gt_train = GroundTruth(name="listed", sites=frozenset(listed_bad))
    gt_other = GroundTruth(name="extended", sites=frozenset(hidden_bad) | frozenset(overlap))
    return SynthCorpus(records=records, gt_train=gt_train, gt_other=gt_other,
                       site_classes=site_classes, split_specs=default_split_specs(cfg),
                       config=cfg)


def write_corpus(corpus: SynthCorpus, outdir) -> dict:
    """Materialize a corpus in the ingest file formats; returns the manifest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "records.jsonl", "w", encoding="utf-8") as fh:
        for rec in corpus.records:
            fh.write(json.dumps({
                "tweet_id": rec.tweet_id,
                "user_id": rec.user_id,
                "username": rec.username,
                "timestamp": format_utc(rec.timestamp),
                "raw_url": rec.raw_url,
                "og_url": rec.og_url,
                "og_title": rec.og_title,
                "og_description": rec.og_description,
            }, sort_keys=True) + "\n")
    for name, gt in (("gt_listed.csv", corpus.gt_train), ("gt_extended.csv", corpus.gt_other)):
        with open(outdir / name, "w", encoding="utf-8") as fh:
            fh.write("site,type\n")
            for site in sorted(gt.sites):
                fh.write(f"{site},fake\n")
    aliases = {site: [site.split(".")[0]] for site in sorted(corpus.site_classes)}
    with open(outdir / "aliases.json", "w", encoding="utf-8") as fh:
        json.dump(aliases, fh, indent=2, sort_keys=True)
    with open(outdir / "splits.json", "w", encoding="utf-8") as fh:
        json.dump(corpus.split_specs, fh, indent=2, sort_keys=True)
    site_classes_path = outdir / "site_classes.json"
    with open(site_classes_path, "w", encoding="utf-8") as fh:
        json.dump(corpus.site_classes, fh, indent=2, sort_keys=True)
    cfg = asdict(corpus.config)
    cfg["start"] = corpus.config.start.isoformat()
    cfg["title_words"] = list(corpus.config.title_words)
    cfg["desc_words"] = list(corpus.config.desc_words)
    manifest = {
        "n_records": len(corpus.records),
        "n_sites": len(corpus.site_classes),
        "gt_train_sites": len(corpus.gt_train.sites),
        "gt_other_sites": len(corpus.gt_other.sites),
        "config": cfg,
    }
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest
