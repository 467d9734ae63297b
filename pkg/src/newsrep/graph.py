"""In-memory bipartite share graph: news items x users with timestamped edges.

Construction is single-writer. After ``freeze()`` the graph is immutable and
exposes dense-index CSR adjacency over *distinct* (item, user) pairs, which is
what all propagation and feature code consumes. Raw edge multiplicity (a user
tweeting the same URL twice) is kept separately because the site-correlation
measure weighs by tweet counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, datetime, timezone

import numpy as np
from scipy import sparse


@dataclass(frozen=True)
class NewsItem:
    item_id: str
    canonical_url: str
    site: str
    title: str = ""
    description: str = ""
    first_seen: date | None = None


@dataclass(frozen=True)
class UserNode:
    user_id: str
    username: str = ""


def parse_utc(value: str) -> datetime:
    """Parse an ISO-8601 timestamp into an aware UTC datetime."""
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_utc(ts: datetime) -> str:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).isoformat()


class FrozenGraphError(RuntimeError):
    """Raised on mutation of a frozen graph."""


class ShareGraph:
    """Bipartite store of news items, users, and share edges.

    External string ids map to dense integer indices assigned at insertion;
    neighborhood queries always report distinct neighbors.
    """

    def __init__(self):
        self.items: list[NewsItem] = []
        self.users: list[UserNode] = []
        self.edges: list[tuple[int, int, datetime]] = []
        self._item_idx: dict[str, int] = {}
        self._user_idx: dict[str, int] = {}
        self._item_users: list[set[int]] = []
        self._user_items: list[set[int]] = []
        self._frozen = False
        self.item_user_csr: sparse.csr_matrix | None = None
        self.user_item_csr: sparse.csr_matrix | None = None

    # -- construction -------------------------------------------------

    def add_item(self, item: NewsItem) -> int:
        if self._frozen:
            raise FrozenGraphError("graph is frozen")
        if not item.canonical_url:
            raise ValueError("canonical_url must be non-empty")
        idx = self._item_idx.get(item.item_id)
        if idx is None:
            idx = len(self.items)
            self._item_idx[item.item_id] = idx
            self.items.append(item)
            self._item_users.append(set())
        return idx

    def add_user(self, user: UserNode) -> int:
        if self._frozen:
            raise FrozenGraphError("graph is frozen")
        idx = self._user_idx.get(user.user_id)
        if idx is None:
            idx = len(self.users)
            self._user_idx[user.user_id] = idx
            self.users.append(user)
            self._user_items.append(set())
        return idx

    def add_share(self, item: NewsItem, user: UserNode, ts: datetime) -> None:
        """Insert the item and user if new, then record the share edge.

        Duplicate edges are permitted (raw multiplicity is kept); neighborhood
        sets stay distinct.
        """
        ii = self.add_item(item)
        ui = self.add_user(user)
        self.edges.append((ii, ui, ts))
        self._item_users[ii].add(ui)
        self._user_items[ui].add(ii)

    def freeze(self) -> "ShareGraph":
        """Make the graph immutable and build CSR adjacency over distinct pairs."""
        if self._frozen:
            return self
        rows, cols = [], []
        for ii, neigh in enumerate(self._item_users):
            for ui in sorted(neigh):
                rows.append(ii)
                cols.append(ui)
        data = np.ones(len(rows), dtype=np.float64)
        shape = (len(self.items), len(self.users))
        self.item_user_csr = sparse.csr_matrix(
            (data, (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
            shape=shape,
        )
        self.user_item_csr = self.item_user_csr.T.tocsr()
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    # -- queries ------------------------------------------------------

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_edges(self) -> int:
        """Raw edge count, including duplicates."""
        return len(self.edges)

    @property
    def n_pairs(self) -> int:
        """Number of distinct (item, user) pairs."""
        return sum(len(s) for s in self._item_users)

    def item_index(self, item_id: str) -> int:
        try:
            return self._item_idx[item_id]
        except KeyError:
            raise KeyError(f"unknown item: {item_id}") from None

    def user_index(self, user_id: str) -> int:
        try:
            return self._user_idx[user_id]
        except KeyError:
            raise KeyError(f"unknown user: {user_id}") from None

    def has_item(self, item_id: str) -> bool:
        return item_id in self._item_idx

    def item(self, item_id: str) -> NewsItem:
        return self.items[self.item_index(item_id)]

    def neighborhood_item(self, item_id: str) -> set[str]:
        """Distinct user ids that shared the item."""
        ii = self.item_index(item_id)
        return {self.users[ui].user_id for ui in self._item_users[ii]}

    def neighborhood_user(self, user_id: str) -> set[str]:
        """Distinct item ids the user shared."""
        ui = self.user_index(user_id)
        return {self.items[ii].item_id for ii in self._user_items[ui]}

    def share_count(self, item_id: str) -> int:
        return len(self._item_users[self.item_index(item_id)])

    def iter_edges(self):
        """Yield raw edges as (item_id, user_id, ts)."""
        for ii, ui, ts in self.edges:
            yield self.items[ii].item_id, self.users[ui].user_id, ts

    def share_counts(self) -> dict[str, int]:
        """Distinct-sharer count for every item."""
        return {it.item_id: len(self._item_users[ii]) for ii, it in enumerate(self.items)}


# -- snapshot format -------------------------------------------------
#
# Edges: one record per raw edge, `item_id<TAB>user_id<TAB>iso8601`.
# Items: JSON lines with item_id, canonical_url, site, title, description,
# first_seen. Usernames are not part of the snapshot; they default to the
# user id on load.


def save_snapshot(graph: ShareGraph, edges_path, items_path) -> None:
    with open(edges_path, "w", encoding="utf-8") as fh:
        for item_id, user_id, ts in graph.iter_edges():
            fh.write(f"{item_id}\t{user_id}\t{format_utc(ts)}\n")
    with open(items_path, "w", encoding="utf-8") as fh:
        for it in graph.items:
            rec = {
                "item_id": it.item_id,
                "canonical_url": it.canonical_url,
                "site": it.site,
                "title": it.title,
                "description": it.description,
                "first_seen": it.first_seen.isoformat() if it.first_seen else None,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_snapshot(edges_path, items_path) -> ShareGraph:
    """Rebuild a graph from snapshot files. The result is not frozen."""
    graph = ShareGraph()
    items: dict[str, NewsItem] = {}
    with open(items_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            first_seen = rec.get("first_seen")
            items[rec["item_id"]] = NewsItem(
                item_id=rec["item_id"],
                canonical_url=rec["canonical_url"],
                site=rec["site"],
                title=rec.get("title", ""),
                description=rec.get("description", ""),
                first_seen=date.fromisoformat(first_seen) if first_seen else None,
            )
    for item in items.values():
        graph.add_item(item)
    with open(edges_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{edges_path}:{lineno}: expected 3 tab-separated fields")
            item_id, user_id, ts_str = parts
            item = items.get(item_id)
            if item is None:
                raise ValueError(f"{edges_path}:{lineno}: edge references unknown item {item_id}")
            graph.add_share(item, UserNode(user_id=user_id, username=user_id), parse_utc(ts_str))
    return graph
