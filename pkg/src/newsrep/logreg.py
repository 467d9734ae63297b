"""Sparse logistic regression over user and word presence features.

Three feature modes: users only ("U"), users + title/description words
("UT"), words only ("T"). Features are binary presence indicators; tokens
come from site-scrubbed titles and descriptions so a classifier cannot
memorize site identity. Training minimizes class-weighted L2-regularized
logistic loss with a deterministic full-batch L-BFGS solver (the bias is
not regularized).
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import expit

from .graph import NewsItem
from .ingest import Dataset, scrub_site_mentions, tokenize

MODES = ("U", "UT", "T")


@dataclass
class LRHyper:
    l2_strength: float = 1.0
    max_iters: int = 1000
    tolerance: float = 1e-6
    seed: int = 0


@dataclass
class FeatureSpace:
    mode: str
    user_index: dict[str, int]
    word_index: dict[str, int]
    aliases: dict[str, list[str]] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return len(self.user_index) + len(self.word_index)


@dataclass
class SparseVector:
    """Strictly increasing column indices; all present values are 1."""

    columns: np.ndarray

    def __len__(self) -> int:
        return len(self.columns)


@dataclass
class LRModel:
    weights: np.ndarray
    bias: float
    feature_space: FeatureSpace
    hyper: LRHyper
    converged: bool
    n_iters: int
    loss_trace: list[float] = field(default_factory=list, repr=False)


def item_word_tokens(item: NewsItem, aliases: dict[str, list[str]] | None = None) -> list[str]:
    """Tokens of an item's title+description after scrubbing its own site."""
    alias_list = (aliases or {}).get(item.site, [])
    text = scrub_site_mentions(item.title, item.site, alias_list)
    text += " " + scrub_site_mentions(item.description, item.site, alias_list)
    return tokenize(text)


def build_feature_space(
    train: Dataset, mode: str, aliases: dict[str, list[str]] | None = None
) -> FeatureSpace:
    """One column per distinct training user and/or scrubbed token.

    Columns are assigned deterministically: users sorted by id come first,
    then tokens sorted lexicographically. Anything appearing only outside the
    training set gets no column.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if train.graph.n_items == 0:
        raise ValueError("cannot build a feature space from an empty dataset")
    user_index: dict[str, int] = {}
    word_index: dict[str, int] = {}
    if mode in ("U", "UT"):
        user_index = {uid: i for i, uid in enumerate(sorted(u.user_id for u in train.graph.users))}
    if mode in ("UT", "T"):
        vocab: set[str] = set()
        for item in train.graph.items:
            vocab.update(item_word_tokens(item, aliases))
        offset = len(user_index)
        word_index = {tok: offset + i for i, tok in enumerate(sorted(vocab))}
    return FeatureSpace(mode=mode, user_index=user_index, word_index=word_index,
                        aliases=dict(aliases or {}))


def featurize(item: NewsItem, sharers: set[str], fs: FeatureSpace) -> SparseVector:
    """Binary presence vector; unknown users/tokens are silently dropped."""
    cols: set[int] = set()
    if fs.mode in ("U", "UT"):
        for uid in sharers:
            col = fs.user_index.get(uid)
            if col is not None:
                cols.add(col)
    if fs.mode in ("UT", "T"):
        for tok in item_word_tokens(item, fs.aliases):
            col = fs.word_index.get(tok)
            if col is not None:
                cols.add(col)
    return SparseVector(columns=np.array(sorted(cols), dtype=np.int64))


def featurize_dataset(ds: Dataset, fs: FeatureSpace) -> tuple[sparse.csr_matrix, list[str]]:
    """CSR matrix of presence features, one row per item in graph order."""
    indptr = [0]
    indices: list[int] = []
    item_ids: list[str] = []
    for item in ds.graph.items:
        vec = featurize(item, ds.graph.neighborhood_item(item.item_id), fs)
        indices.extend(vec.columns.tolist())
        indptr.append(len(indices))
        item_ids.append(item.item_id)
    X = sparse.csr_matrix(
        (np.ones(len(indices)), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(item_ids), fs.dimension),
    )
    return X, item_ids


def class_weights(labels) -> dict[bool, float]:
    """Weights inversely proportional to class sizes: w_c = N / (2 * N_c)."""
    labels = list(labels)
    n_pos = sum(1 for v in labels if v)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present to compute class weights")
    total = len(labels)
    return {True: total / (2.0 * n_pos), False: total / (2.0 * n_neg)}


# -- loss and solver ---------------------------------------------------


def loss_and_grad(params: np.ndarray, X: sparse.spmatrix, y: np.ndarray,
                  sample_weights: np.ndarray, l2_strength: float) -> tuple[float, np.ndarray]:
    """Weighted logistic loss and analytic gradient.

    ``params`` is the weight vector with the (unregularized) bias appended;
    ``y`` holds 0/1 targets.
    """
    w = params[:-1]
    b = params[-1]
    z = X.dot(w) + b
    losses = np.logaddexp(0.0, z) - y * z
    loss = float(np.dot(sample_weights, losses) + 0.5 * l2_strength * np.dot(w, w))
    r = sample_weights * (expit(z) - y)
    grad = np.empty_like(params)
    grad[:-1] = X.T.dot(r) + l2_strength * w
    grad[-1] = r.sum()
    return loss, grad


def minimize_lbfgs(fun_grad, x0: np.ndarray, max_iters: int = 1000,
                   tolerance: float = 1e-6, history: int = 10):
    """Deterministic full-batch L-BFGS with Armijo backtracking.

    Converged when the max absolute parameter change of a step drops below
    ``tolerance``. Returns (x, converged, n_iters, loss_trace); the trace is
    non-increasing by construction of the line search.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = fun_grad(x)
    losses = [f]
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []
    converged = False
    n_iters = 0
    for n_iters in range(1, max_iters + 1):
        q = g.copy()
        alphas = []
        for s, yv, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * s.dot(q)
            alphas.append(a)
            q -= a * yv
        if y_hist:
            q *= s_hist[-1].dot(y_hist[-1]) / y_hist[-1].dot(y_hist[-1])
        for (s, yv, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            q += (a - rho * yv.dot(q)) * s
        direction = -q
        slope = g.dot(direction)
        if slope >= 0.0:
            direction = -g
            slope = -g.dot(g)
        if slope == 0.0:
            converged = True
            break
        step = 1.0 if y_hist else min(1.0, 1.0 / max(1.0, float(np.abs(g).max())))
        accepted = False
        for _ in range(60):
            x_new = x + step * direction
            f_new, g_new = fun_grad(x_new)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # numerical floor reached; treat as converged if the attempted
            # step was already below tolerance
            converged = float(np.abs(step * direction).max()) < tolerance
            break
        dx = x_new - x
        dg = g_new - g
        curv = dx.dot(dg)
        if curv > 1e-12:
            s_hist.append(dx)
            y_hist.append(dg)
            rho_hist.append(1.0 / curv)
            if len(s_hist) > history:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x, f, g = x_new, f_new, g_new
        losses.append(f)
        if float(np.abs(dx).max()) < tolerance:
            converged = True
            break
    return x, converged, n_iters, losses


def fit_weighted(X: sparse.spmatrix, y: np.ndarray, sample_weights: np.ndarray,
                 hyper: LRHyper) -> tuple[np.ndarray, float, bool, int, list[float]]:
    """Fit weights+bias from an explicit design matrix and per-sample weights."""
    y = np.asarray(y, dtype=np.float64)
    sample_weights = np.asarray(sample_weights, dtype=np.float64)
    x0 = np.zeros(X.shape[1] + 1)

    def fg(params):
        return loss_and_grad(params, X, y, sample_weights, hyper.l2_strength)

    params, converged, n_iters, losses = minimize_lbfgs(
        fg, x0, max_iters=hyper.max_iters, tolerance=hyper.tolerance
    )
    return params[:-1], float(params[-1]), converged, n_iters, losses


def train_lr(train: Dataset, mode: str, hyper: LRHyper | None = None,
             aliases: dict[str, list[str]] | None = None) -> LRModel:
    """Train a classifier on a labeled dataset with inverse-class-size weights."""
    hyper = hyper or LRHyper()
    fs = build_feature_space(train, mode, aliases)
    X, item_ids = featurize_dataset(train, fs)
    y = np.array([train.labels[iid] for iid in item_ids], dtype=np.float64)
    cw = class_weights(y.astype(bool))
    sw = np.where(y > 0.5, cw[True], cw[False])
    w, b, converged, n_iters, losses = fit_weighted(X, y, sw, hyper)
    if not np.all(np.isfinite(w)) or not np.isfinite(b):
        raise ArithmeticError("non-finite parameters after training")
    return LRModel(weights=w, bias=b, feature_space=fs, hyper=hyper,
                   converged=converged, n_iters=n_iters, loss_trace=losses)


def predict_lr(model: LRModel, item: NewsItem, sharers: set[str]) -> tuple[float, bool]:
    """(hoax probability, hoax label); label is True when score >= 0.5."""
    vec = featurize(item, sharers, model.feature_space)
    z = model.weights[vec.columns].sum() + model.bias
    score = float(expit(z))
    return score, score >= 0.5


def predict_dataset(model: LRModel, ds: Dataset) -> tuple[dict[str, float], dict[str, bool]]:
    X, item_ids = featurize_dataset(ds, model.feature_space)
    scores = expit(X.dot(model.weights) + model.bias)
    score_map = {iid: float(s) for iid, s in zip(item_ids, scores)}
    return score_map, {iid: s >= 0.5 for iid, s in score_map.items()}


# -- serialization -----------------------------------------------------


def save_model(model: LRModel, path) -> None:
    fs = model.feature_space
    doc = {
        "mode": fs.mode,
        "dimension": fs.dimension,
        "hyper": {
            "l2_strength": model.hyper.l2_strength,
            "max_iters": model.hyper.max_iters,
            "tolerance": model.hyper.tolerance,
            "seed": model.hyper.seed,
        },
        "converged": model.converged,
        "n_iters": model.n_iters,
        "bias": model.bias,
        "weights_b64": base64.b64encode(
            np.ascontiguousarray(model.weights, dtype=np.float64).tobytes()
        ).decode("ascii"),
        "users": sorted(fs.user_index.items(), key=lambda kv: kv[1]),
        "words": sorted(fs.word_index.items(), key=lambda kv: kv[1]),
        "aliases": fs.aliases,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_model(path) -> LRModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    weights = np.frombuffer(base64.b64decode(doc["weights_b64"]), dtype=np.float64).copy()
    fs = FeatureSpace(
        mode=doc["mode"],
        user_index={k: v for k, v in doc["users"]},
        word_index={k: v for k, v in doc["words"]},
        aliases={k: list(v) for k, v in doc.get("aliases", {}).items()},
    )
    if fs.dimension != doc["dimension"] or len(weights) != fs.dimension:
        raise ValueError(f"{path}: inconsistent dimensions")
    hyper = LRHyper(**doc["hyper"])
    return LRModel(weights=weights, bias=float(doc["bias"]), feature_space=fs,
                   hyper=hyper, converged=bool(doc["converged"]),
                   n_iters=int(doc.get("n_iters", 0)))
