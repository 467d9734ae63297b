"""Harmonic boolean-label propagation over the bipartite share graph.

Each node carries a belief pair (alpha, beta) with reputation
q = (alpha - beta) / (alpha + beta) in [-1, 1]. Seed items are clamped at
q = -1 (fake) or q = +1 (non-fake); each iteration first recomputes every
user from its items, then every non-seed item from its users:

    alpha_u = c + sum of positive neighbor q
    beta_u  = c - sum of negative neighbor q

with the small constant c acting as regularization. Items with q < 0 are
classified fake, everything else reliable. Both half-steps read only the
previous half-step's values, so results are independent of node order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .graph import ShareGraph
from .ingest import Dataset, GroundTruth

logger = logging.getLogger(__name__)


@dataclass
class HarmonicConfig:
    c: float = 0.02
    iterations: int = 4
    pos_factor: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass(frozen=True)
class NodeBelief:
    alpha: float
    beta: float

    @property
    def q(self) -> float:
        return (self.alpha - self.beta) / (self.alpha + self.beta)


@dataclass
class LabelSeed:
    """Disjoint sets of item ids taken as known fake / known non-fake."""

    fake_items: set[str]
    nonfake_items: set[str]

    def __post_init__(self):
        overlap = self.fake_items & self.nonfake_items
        if overlap:
            raise ValueError(f"seed sets overlap on {len(overlap)} items")


@dataclass
class PropagationResult:
    item_alpha: np.ndarray
    item_beta: np.ndarray
    user_alpha: np.ndarray
    user_beta: np.ndarray
    graph: ShareGraph = field(repr=False)

    def item_q(self, item_id: str) -> float:
        ii = self.graph.item_index(item_id)
        return float((self.item_alpha[ii] - self.item_beta[ii])
                     / (self.item_alpha[ii] + self.item_beta[ii]))

    def user_q(self, user_id: str) -> float:
        ui = self.graph.user_index(user_id)
        return float((self.user_alpha[ui] - self.user_beta[ui])
                     / (self.user_alpha[ui] + self.user_beta[ui]))

    def item_belief(self, item_id: str) -> NodeBelief:
        ii = self.graph.item_index(item_id)
        return NodeBelief(float(self.item_alpha[ii]), float(self.item_beta[ii]))

    def user_belief(self, user_id: str) -> NodeBelief:
        ui = self.graph.user_index(user_id)
        return NodeBelief(float(self.user_alpha[ui]), float(self.user_beta[ui]))

    def item_beliefs(self) -> dict[str, NodeBelief]:
        return {
            it.item_id: NodeBelief(float(self.item_alpha[i]), float(self.item_beta[i]))
            for i, it in enumerate(self.graph.items)
        }

    def user_beliefs(self) -> dict[str, NodeBelief]:
        return {
            u.user_id: NodeBelief(float(self.user_alpha[i]), float(self.user_beta[i]))
            for i, u in enumerate(self.graph.users)
        }


def subsample_positives(candidates: set[str], n_negatives: int, factor: int,
                        seed: int) -> set[str]:
    """Uniform seeded sample of ``factor * n_negatives`` positive-seed items.

    When there are not enough candidates, all of them are taken (with a
    warning) rather than failing.
    """
    want = factor * n_negatives
    pool = sorted(candidates)
    if len(pool) <= want:
        if len(pool) < want:
            logger.warning(
                "only %d positive candidates for requested %d; taking all",
                len(pool), want,
            )
        return set(pool)
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(pool), size=want, replace=False)
    return {pool[i] for i in picked}


def build_label_seed(train: Dataset, gt: GroundTruth, cfg: HarmonicConfig,
                     other_gt: GroundTruth | None = None) -> LabelSeed:
    """Training-window seeds: fake = items on listed sites, non-fake = a
    subsample of items whose site is in neither ground-truth list."""
    fake = {it.item_id for it in train.graph.items if it.site in gt.sites}
    excluded = set(gt.sites)
    if other_gt is not None:
        excluded |= set(other_gt.sites)
    candidates = {it.item_id for it in train.graph.items if it.site not in excluded}
    nonfake = subsample_positives(candidates, len(fake), cfg.pos_factor, cfg.seed)
    return LabelSeed(fake_items=fake, nonfake_items=nonfake)


def propagate(graph: ShareGraph, seed_labels: LabelSeed, cfg: HarmonicConfig,
              half_step_hook=None) -> PropagationResult:
    """Run the two-phase belief propagation for ``cfg.iterations`` rounds.

    ``half_step_hook(kind, q_array)`` is called after every half-step with
    kind "users" or "items"; tests use it to check the q range invariant.
    """
    if not graph.frozen:
        raise ValueError("propagate requires a frozen graph")
    n_items, n_users = graph.n_items, graph.n_users
    missing = [iid for iid in (seed_labels.fake_items | seed_labels.nonfake_items)
               if not graph.has_item(iid)]
    if missing:
        raise KeyError(f"seed items not in graph: {missing[:5]}{'...' if len(missing) > 5 else ''}")

    fake_idx = np.array(sorted(graph.item_index(i) for i in seed_labels.fake_items), dtype=np.int64)
    nonfake_idx = np.array(sorted(graph.item_index(i) for i in seed_labels.nonfake_items), dtype=np.int64)
    unlabeled = np.ones(n_items, dtype=bool)
    unlabeled[fake_idx] = False
    unlabeled[nonfake_idx] = False

    c = cfg.c
    item_alpha = np.full(n_items, c)
    item_beta = np.full(n_items, c)
    item_alpha[fake_idx] = 0.0
    item_beta[fake_idx] = 1.0
    item_alpha[nonfake_idx] = 1.0
    item_beta[nonfake_idx] = 0.0
    user_alpha = np.full(n_users, c)
    user_beta = np.full(n_users, c)

    q_items = np.zeros(n_items)
    q_items[fake_idx] = -1.0
    q_items[nonfake_idx] = 1.0

    user_item = graph.user_item_csr
    item_user = graph.item_user_csr
    for _ in range(cfg.iterations):
        user_alpha = c + user_item.dot(np.maximum(q_items, 0.0))
        user_beta = c - user_item.dot(np.minimum(q_items, 0.0))
        q_users = (user_alpha - user_beta) / (user_alpha + user_beta)
        if half_step_hook is not None:
            half_step_hook("users", q_users)
        new_alpha = c + item_user.dot(np.maximum(q_users, 0.0))
        new_beta = c - item_user.dot(np.minimum(q_users, 0.0))
        item_alpha = np.where(unlabeled, new_alpha, item_alpha)
        item_beta = np.where(unlabeled, new_beta, item_beta)
        q_items = (item_alpha - item_beta) / (item_alpha + item_beta)
        if half_step_hook is not None:
            half_step_hook("items", q_items)

    return PropagationResult(item_alpha=item_alpha, item_beta=item_beta,
                             user_alpha=user_alpha, user_beta=user_beta, graph=graph)


def classify_harmonic(result: PropagationResult, item_id: str) -> bool:
    """True (hoax) iff the item's reputation is strictly negative."""
    return result.item_q(item_id) < 0.0


def predictions(result: PropagationResult, item_ids=None) -> dict[str, bool]:
    """Hoax labels for the given items (default: every item in the graph)."""
    if item_ids is None:
        item_ids = [it.item_id for it in result.graph.items]
    return {iid: classify_harmonic(result, iid) for iid in item_ids}


def scores(result: PropagationResult, item_ids=None) -> dict[str, float]:
    """Reputation q per item; negative means likely fake."""
    if item_ids is None:
        item_ids = [it.item_id for it in result.graph.items]
    return {iid: result.item_q(iid) for iid in item_ids}


def save_beliefs(result: PropagationResult, items_path, users_path) -> None:
    """Write `id<TAB>q<TAB>alpha<TAB>beta` lines for items and users."""
    with open(items_path, "w", encoding="utf-8") as fh:
        for i, it in enumerate(result.graph.items):
            a, b = result.item_alpha[i], result.item_beta[i]
            fh.write(f"{it.item_id}\t{(a - b) / (a + b):.12g}\t{a:.12g}\t{b:.12g}\n")
    with open(users_path, "w", encoding="utf-8") as fh:
        for i, u in enumerate(result.graph.users):
            a, b = result.user_alpha[i], result.user_beta[i]
            fh.write(f"{u.user_id}\t{(a - b) / (a + b):.12g}\t{a:.12g}\t{b:.12g}\n")
