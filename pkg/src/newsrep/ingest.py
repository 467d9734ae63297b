"""Record parsing, URL canonicalization, ground-truth loading, temporal splits.

Input records are JSON lines carrying the raw tweet fields plus the og-tag
metadata extracted from the linked article (og:url / og:title /
og:description). Everything downstream works on canonical URLs and
registered domains.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass
from datetime import date, datetime
from urllib.parse import urlsplit, urlunsplit

from .graph import NewsItem, ShareGraph, UserNode, parse_utc

logger = logging.getLogger(__name__)

# Query parameters stripped during canonicalization; trailing * matches by
# prefix. The source data is silent on normalization depth, so this is
# configuration, not gospel.
DEFAULT_TRACKING_PARAMS = ("utm_*", "fbclid", "gclid")

# Multi-label public suffixes the site extractor knows about out of the box.
# A full rule file in publicsuffix.org format can be loaded instead.
DEFAULT_SUFFIX_RULES = frozenset(
    {
        "co.uk", "org.uk", "ac.uk", "gov.uk", "me.uk", "net.uk", "ltd.uk", "plc.uk",
        "co.jp", "ne.jp", "or.jp", "ac.jp", "go.jp",
        "com.au", "net.au", "org.au", "edu.au", "gov.au", "id.au",
        "co.nz", "net.nz", "org.nz", "govt.nz",
        "com.br", "net.br", "org.br", "gov.br",
        "com.mx", "org.mx", "gob.mx",
        "co.in", "net.in", "org.in", "gov.in", "ac.in",
        "co.za", "org.za", "web.za",
        "com.cn", "net.cn", "org.cn", "gov.cn",
        "com.tw", "org.tw", "com.sg", "com.hk", "com.ar", "com.tr", "com.ua",
        "co.kr", "or.kr", "co.il", "org.il", "co.th", "in.th",
        "com.pk", "com.ph", "com.my", "com.ng", "com.eg", "com.sa",
        # private-section registries that host independent sites per label
        "blogspot.com", "wordpress.com", "github.io", "tumblr.com",
        "medium.com", "substack.com",
    }
)


class RejectedRecord(ValueError):
    """A record that cannot be turned into a canonical URL."""


@dataclass(frozen=True)
class RawRecord:
    tweet_id: str
    user_id: str
    username: str
    timestamp: datetime
    raw_url: str = ""
    og_url: str | None = None
    og_title: str | None = None
    og_description: str | None = None


@dataclass(frozen=True)
class GroundTruth:
    name: str
    sites: frozenset[str]

    def __contains__(self, site: str) -> bool:
        return site in self.sites

    def __len__(self) -> int:
        return len(self.sites)


@dataclass
class SplitSpec:
    """Temporal slice of a share graph.

    Items are kept when first_seen falls in ``url_first_seen_range`` (closed)
    and the day index relative to the range start satisfies
    ``(day - offset) % stride == 0``; an ``explicit_days`` list replaces the
    stride rule when given. Tweets at or after ``tweet_cutoff`` are dropped
    (strictly-before semantics), then items with fewer than ``min_shares``
    distinct sharers are dropped.
    """

    url_first_seen_range: tuple[date, date]
    tweet_cutoff: datetime | None = None
    day_stride: int = 1
    day_offset: int = 0
    explicit_days: list[date] | None = None
    min_shares: int = 1

    def __post_init__(self):
        start, end = self.url_first_seen_range
        if start > end:
            raise ValueError("url_first_seen_range start after end")
        if self.day_stride < 1:
            raise ValueError("day_stride must be >= 1")
        if self.day_offset < 0:
            raise ValueError("day_offset must be >= 0")
        if self.min_shares < 1:
            raise ValueError("min_shares must be >= 1")

    def keeps_day(self, day: date) -> bool:
        start, end = self.url_first_seen_range
        if day < start or day > end:
            return False
        if self.explicit_days is not None:
            return day in self.explicit_days
        return ((day - start).days - self.day_offset) % self.day_stride == 0


def split_spec_from_dict(d: dict) -> SplitSpec:
    """Build a SplitSpec from its JSON form (see the splits file schema)."""
    return SplitSpec(
        url_first_seen_range=(date.fromisoformat(d["start"]), date.fromisoformat(d["end"])),
        tweet_cutoff=parse_utc(d["tweet_cutoff"]) if d.get("tweet_cutoff") else None,
        day_stride=int(d.get("stride", 1)),
        day_offset=int(d.get("offset", 0)),
        explicit_days=[date.fromisoformat(x) for x in d["explicit_days"]]
        if d.get("explicit_days") else None,
        min_shares=int(d.get("min_shares", 1)),
    )


@dataclass
class Dataset:
    """A restricted share graph plus per-item hoax labels (True = hoax)."""

    graph: ShareGraph
    labels: dict[str, bool]
    name: str = ""

    @property
    def n_items(self) -> int:
        return self.graph.n_items

    @property
    def n_hoax(self) -> int:
        return sum(1 for v in self.labels.values() if v)


# -- URL canonicalization -------------------------------------------


def _normalize_url(url: str, tracking_params=DEFAULT_TRACKING_PARAMS) -> str:
    parts = urlsplit(url.strip())
    scheme = parts.scheme.lower()
    host = parts.netloc.lower()
    if scheme not in ("http", "https") or not host:
        raise RejectedRecord(f"not an http(s) URL: {url!r}")
    prefixes = tuple(p[:-1] for p in tracking_params if p.endswith("*"))
    exact = {p for p in tracking_params if not p.endswith("*")}
    kept = []
    for pair in parts.query.split("&"):
        if not pair:
            continue
        key = pair.split("=", 1)[0]
        if key in exact or key.startswith(prefixes):
            continue
        kept.append(pair)
    path = parts.path
    if path.endswith("/"):
        path = path.rstrip("/")
    out = urlunsplit((scheme, host, path, "&".join(kept), ""))
    return out


def canonicalize(record: RawRecord, tracking_params=DEFAULT_TRACKING_PARAMS) -> str:
    """Canonical URL for a record: the og:url when present, else the raw URL.

    Both go through the same normalization (lowercase scheme+host, fragment
    dropped, tracking params stripped, trailing slash removed), which makes
    the operation idempotent. An og:url that fails to parse falls back to the
    raw URL; if neither parses the record is rejected.
    """
    if record.og_url:
        try:
            return _normalize_url(record.og_url, tracking_params)
        except RejectedRecord:
            pass
    if not record.raw_url:
        raise RejectedRecord("record has no usable URL")
    return _normalize_url(record.raw_url, tracking_params)


# -- registered-domain extraction -----------------------------------

_IP_RE = re.compile(r"^\d{1,3}(\.\d{1,3}){3}$")


def load_suffix_rules(path) -> frozenset[str]:
    """Read a public-suffix rule file (publicsuffix.org list format).

    Comment lines (//) and blanks are skipped; wildcard rules keep their
    ``*.`` prefix and exception rules their ``!`` prefix.
    """
    rules = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("//"):
                continue
            rules.add(line.lower())
    return frozenset(rules)


def extract_site(canonical_url: str, suffix_rules: frozenset[str] = DEFAULT_SUFFIX_RULES) -> str:
    """Registered domain of a URL's host under the given public-suffix rules.

    The public suffix is the longest matching rule (every single label is
    implicitly a suffix); the registered domain is the suffix plus one label.
    Wildcard rules (``*.foo``) match any label in their starred position, and
    exception rules (``!bar.foo``) cancel a wildcard. IP-literal hosts are
    returned as-is.
    """
    parts = urlsplit(canonical_url)
    host = (parts.netloc or parts.path.split("/")[0]).lower()
    if "@" in host:
        host = host.rsplit("@", 1)[1]
    if host.startswith("["):
        return host[1:].split("]")[0]
    host = host.split(":")[0].strip(".")
    if not host:
        raise ValueError(f"no host in URL: {canonical_url!r}")
    if _IP_RE.match(host) or host == "localhost":
        return host
    labels = host.split(".")
    suffix_len = 1
    for take in range(1, len(labels)):
        candidate = ".".join(labels[-take - 1:])
        wildcard = ".".join(["*"] + labels[-take:])
        if "!" + candidate in suffix_rules:
            suffix_len = take
            break
        if candidate in suffix_rules or wildcard in suffix_rules:
            suffix_len = take + 1
    if suffix_len >= len(labels):
        return host
    return ".".join(labels[-suffix_len - 1:])


# -- text handling ---------------------------------------------------

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens split on non-letter/digit boundaries, length >= 2."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 2]


def scrub_site_mentions(text: str, site: str, aliases: list[str] | None = None) -> str:
    """Remove whole-token mentions of a site from text, case-insensitively.

    Drops the site string itself, its registrable name without the TLD, and
    each alias; remaining whitespace is normalized. This keeps the classifiers
    from simply memorizing site identity from titles and descriptions.
    """
    phrases = {site}
    first_label = site.split(".")[0]
    if first_label:
        phrases.add(first_label)
    for alias in aliases or ():
        if alias:
            phrases.add(alias)
    scrubbed = text
    for phrase in sorted(phrases, key=len, reverse=True):
        pattern = re.compile(r"(?<!\w)" + re.escape(phrase) + r"(?!\w)", re.IGNORECASE)
        scrubbed = pattern.sub(" ", scrubbed)
    return " ".join(scrubbed.split())


def load_aliases(path) -> dict[str, list[str]]:
    """JSON map of site -> list of alias strings."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return {site.lower(): list(aliases) for site, aliases in data.items()}


# -- ground truth -----------------------------------------------------


def load_ground_truth(
    path,
    name: str | None = None,
    type_filter: set[str] | None = None,
    suffix_rules: frozenset[str] = DEFAULT_SUFFIX_RULES,
) -> GroundTruth:
    """Load a site list from CSV with columns ``site[,type]``.

    Rows whose type is not in ``type_filter`` are skipped (no filter keeps
    everything). Sites are normalized to lowercase registered domains.
    """
    sites: set[str] = set()
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or not any(cell.strip() for cell in row):
                continue
            site = row[0].strip().lower()
            if lineno == 1 and site in ("site", "domain", "url"):
                continue
            if not site:
                raise ValueError(f"{path}:{lineno}: malformed row (empty site)")
            row_type = row[1].strip().lower() if len(row) > 1 else ""
            if type_filter is not None and row_type not in type_filter:
                continue
            if "//" in site:
                site = urlsplit(site).netloc.lower() or site
            site = site.split("/")[0]
            sites.add(extract_site("http://" + site, suffix_rules))
    if name is None:
        name = str(path)
    return GroundTruth(name=name, sites=frozenset(sites))


# -- record parsing and graph building --------------------------------

RECORD_FIELDS = ("tweet_id", "user_id", "username", "timestamp", "raw_url",
                 "og_url", "og_title", "og_description")


def parse_record(obj: dict) -> RawRecord:
    if not obj.get("raw_url") and not obj.get("og_url"):
        raise RejectedRecord("record has no usable URL")
    if not obj.get("timestamp"):
        raise RejectedRecord("record has no timestamp")
    try:
        ts = parse_utc(str(obj["timestamp"]))
    except ValueError as exc:
        raise RejectedRecord(f"bad timestamp: {exc}") from exc
    return RawRecord(
        tweet_id=str(obj.get("tweet_id", "")),
        user_id=str(obj.get("user_id", "")),
        username=str(obj.get("username", obj.get("user_id", ""))),
        timestamp=ts,
        raw_url=str(obj.get("raw_url") or ""),
        og_url=obj.get("og_url") or None,
        og_title=obj.get("og_title") or None,
        og_description=obj.get("og_description") or None,
    )


def parse_records(path) -> tuple[list[RawRecord], list[tuple[int, str]]]:
    """Parse a JSON-lines record file; returns (records, [(lineno, reason)])."""
    records: list[RawRecord] = []
    rejects: list[tuple[int, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise RejectedRecord("not a JSON object")
                records.append(parse_record(obj))
            except (json.JSONDecodeError, RejectedRecord) as exc:
                rejects.append((lineno, str(exc)))
    return records, rejects


def build_graph(
    records: list[RawRecord],
    tracking_params=DEFAULT_TRACKING_PARAMS,
    suffix_rules: frozenset[str] = DEFAULT_SUFFIX_RULES,
) -> tuple[ShareGraph, list[tuple[RawRecord, str]]]:
    """Assemble a share graph from parsed records.

    The canonical URL doubles as the item id. Title/description come from the
    og fields of the first record that carries them; first_seen is the date of
    the earliest share.
    """
    graph = ShareGraph()
    meta: dict[str, dict] = {}
    order: list[str] = []
    shares: list[tuple[str, str, str, datetime]] = []
    rejects: list[tuple[RawRecord, str]] = []
    for rec in records:
        try:
            url = canonicalize(rec, tracking_params)
        except RejectedRecord as exc:
            rejects.append((rec, str(exc)))
            continue
        info = meta.get(url)
        if info is None:
            info = {
                "site": extract_site(url, suffix_rules),
                "title": rec.og_title or "",
                "description": rec.og_description or "",
                "first_seen": rec.timestamp,
            }
            meta[url] = info
            order.append(url)
        else:
            if not info["title"] and rec.og_title:
                info["title"] = rec.og_title
            if not info["description"] and rec.og_description:
                info["description"] = rec.og_description
            if rec.timestamp < info["first_seen"]:
                info["first_seen"] = rec.timestamp
        shares.append((url, rec.user_id, rec.username, rec.timestamp))
    items = {
        url: NewsItem(
            item_id=url,
            canonical_url=url,
            site=info["site"],
            title=info["title"],
            description=info["description"],
            first_seen=info["first_seen"].date(),
        )
        for url, info in meta.items()
    }
    for url in order:
        graph.add_item(items[url])
    for url, user_id, username, ts in shares:
        graph.add_share(items[url], UserNode(user_id=user_id, username=username), ts)
    return graph, rejects


def label_items(graph: ShareGraph, gt: GroundTruth) -> dict[str, bool]:
    """Item id -> hoax flag; an item is a hoax iff its site is in the list."""
    return {it.item_id: (it.site in gt.sites) for it in graph.items}


def build_split(graph: ShareGraph, spec: SplitSpec, gt: GroundTruth, name: str = "") -> Dataset:
    """Restrict a frozen graph to a temporal split and label it.

    Items outside the first_seen window or off-stride days are dropped, then
    tweets at or after the cutoff, then items left with fewer than
    ``min_shares`` distinct sharers.
    """
    if not graph.frozen:
        raise ValueError("build_split requires a frozen graph")
    kept_items = {
        it.item_id
        for it in graph.items
        if it.first_seen is not None and spec.keeps_day(it.first_seen)
    }
    kept_edges: list[tuple[str, str, datetime]] = []
    sharers: dict[str, set[str]] = {}
    for item_id, user_id, ts in graph.iter_edges():
        if item_id not in kept_items:
            continue
        if spec.tweet_cutoff is not None and ts >= spec.tweet_cutoff:
            continue
        kept_edges.append((item_id, user_id, ts))
        sharers.setdefault(item_id, set()).add(user_id)
    final_items = {iid for iid in kept_items if len(sharers.get(iid, ())) >= spec.min_shares}
    sub = ShareGraph()
    for it in graph.items:
        if it.item_id in final_items:
            sub.add_item(it)
    usernames = {u.user_id: u.username for u in graph.users}
    for item_id, user_id, ts in kept_edges:
        if item_id in final_items:
            sub.add_share(
                graph.item(item_id),
                UserNode(user_id=user_id, username=usernames.get(user_id, user_id)),
                ts,
            )
    sub.freeze()
    labels = label_items(sub, gt)
    if not labels:
        logger.warning("split %r selected no items", name or spec)
    return Dataset(graph=sub, labels=labels, name=name)
