"""Topic decomposition of the share graph and a small neural classifier.

Each URL is a document whose words are the users that shared it (with
multiplicity), so topics capture co-sharing communities. The decomposition
is collapsed Gibbs LDA with seeded, single-threaded sampling; the classifier
on top of topic vectors is one 100-unit rectified hidden layer into a single
sigmoid output, trained with class-weighted cross-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import expit

from .ingest import Dataset
from .logreg import class_weights


@dataclass
class Corpus:
    documents: list[tuple[str, np.ndarray]]
    vocabulary: dict[str, int]
    min_count: int
    dropped_items: list[str] = field(default_factory=list)

    @property
    def n_tokens(self) -> int:
        return sum(len(doc) for _, doc in self.documents)


@dataclass
class TopicModel:
    n_topics: int
    alpha: float
    eta: float
    topic_word: np.ndarray
    gibbs_iters: int
    seed: int
    vocabulary: dict[str, int]
    token_count_trace: list[int] = field(default_factory=list, repr=False)


def document_bag(ds: Dataset, item_id: str) -> list[str]:
    """User tokens of one URL, one occurrence per tweet."""
    graph = ds.graph
    ii = graph.item_index(item_id)
    return [graph.users[ui].user_id for jj, ui, _ in graph.edges if jj == ii]


def dataset_bags(ds: Dataset) -> dict[str, list[str]]:
    """User-token bags for every item of a dataset, keyed by item id."""
    graph = ds.graph
    bags: dict[str, list[str]] = {it.item_id: [] for it in graph.items}
    for ii, ui, _ in graph.edges:
        bags[graph.items[ii].item_id].append(graph.users[ui].user_id)
    return bags


def build_corpus(datasets: list[Dataset], min_count: int = 5) -> Corpus:
    """Merge datasets into URL-as-document bags and filter rare user tokens.

    Users occurring fewer than ``min_count`` times across the whole corpus
    are removed; documents that become empty are dropped and recorded.
    """
    raw_docs: list[tuple[str, list[str]]] = []
    seen: set[str] = set()
    counts: dict[str, int] = {}
    for ds in datasets:
        graph = ds.graph
        bags: dict[int, list[str]] = {}
        for ii, ui, _ in graph.edges:
            bags.setdefault(ii, []).append(graph.users[ui].user_id)
        for ii, item in enumerate(graph.items):
            if item.item_id in seen:
                continue
            seen.add(item.item_id)
            bag = bags.get(ii, [])
            raw_docs.append((item.item_id, bag))
            for uid in bag:
                counts[uid] = counts.get(uid, 0) + 1
    vocab = {uid: i for i, uid in enumerate(sorted(u for u, c in counts.items() if c >= min_count))}
    documents: list[tuple[str, np.ndarray]] = []
    dropped: list[str] = []
    for item_id, bag in raw_docs:
        tokens = np.array([vocab[u] for u in bag if u in vocab], dtype=np.int64)
        if len(tokens) == 0:
            dropped.append(item_id)
        else:
            documents.append((item_id, tokens))
    if not documents:
        raise ValueError("all documents empty after min_count filtering")
    return Corpus(documents=documents, vocabulary=vocab, min_count=min_count,
                  dropped_items=dropped)


# -- collapsed Gibbs sampling -----------------------------------------


@numba.njit(cache=True)
def _seed_rng(seed):
    np.random.seed(seed)


@numba.njit(cache=True)
def _init_assignments(tokens, doc_of, n_topics, n_dk, n_kt, n_k):
    z = np.empty(len(tokens), dtype=np.int64)
    for i in range(len(tokens)):
        k = np.random.randint(n_topics)
        z[i] = k
        n_dk[doc_of[i], k] += 1
        n_kt[k, tokens[i]] += 1
        n_k[k] += 1
    return z


@numba.njit(cache=True)
def _gibbs_sweep(tokens, doc_of, z, n_dk, n_kt, n_k, alpha, eta):
    n_topics = n_kt.shape[0]
    vocab_size = n_kt.shape[1]
    probs = np.empty(n_topics)
    for i in range(len(tokens)):
        t = tokens[i]
        d = doc_of[i]
        k_old = z[i]
        n_dk[d, k_old] -= 1
        n_kt[k_old, t] -= 1
        n_k[k_old] -= 1
        total = 0.0
        for k in range(n_topics):
            p = (n_kt[k, t] + eta) / (n_k[k] + vocab_size * eta) * (n_dk[d, k] + alpha)
            probs[k] = p
            total += p
        u = np.random.random() * total
        acc = 0.0
        k_new = n_topics - 1
        for k in range(n_topics):
            acc += probs[k]
            if u < acc:
                k_new = k
                break
        z[i] = k_new
        n_dk[d, k_new] += 1
        n_kt[k_new, t] += 1
        n_k[k_new] += 1


@numba.njit(cache=True)
def _infer_doc(tokens, topic_word, alpha, iters):
    n_topics = topic_word.shape[0]
    n_dk = np.zeros(n_topics)
    z = np.empty(len(tokens), dtype=np.int64)
    probs = np.empty(n_topics)
    for i in range(len(tokens)):
        k = np.random.randint(n_topics)
        z[i] = k
        n_dk[k] += 1
    acc_counts = np.zeros(n_topics)
    for _ in range(iters):
        for i in range(len(tokens)):
            t = tokens[i]
            k_old = z[i]
            n_dk[k_old] -= 1
            total = 0.0
            for k in range(n_topics):
                p = topic_word[k, t] * (n_dk[k] + alpha)
                probs[k] = p
                total += p
            u = np.random.random() * total
            acc = 0.0
            k_new = n_topics - 1
            for k in range(n_topics):
                acc += probs[k]
                if u < acc:
                    k_new = k
                    break
            z[i] = k_new
            n_dk[k_new] += 1
        acc_counts += n_dk
    return acc_counts / iters


def fit_lda(corpus: Corpus, n_topics: int, alpha: float | None = None,
            eta: float = 0.01, gibbs_iters: int = 200, seed: int = 0) -> TopicModel:
    """Collapsed Gibbs sampling for ``gibbs_iters`` full sweeps.

    The final count matrix is smoothed by eta and normalized row-wise into
    the topic/word distribution. Token counts are checked for conservation
    after every sweep and the trace kept on the model.
    """
    if n_topics < 2:
        raise ValueError("n_topics must be >= 2")
    vocab_size = len(corpus.vocabulary)
    if n_topics > vocab_size:
        raise ValueError(f"n_topics {n_topics} exceeds vocabulary size {vocab_size}")
    if alpha is None:
        alpha = 50.0 / n_topics
    tokens = np.concatenate([doc for _, doc in corpus.documents])
    doc_of = np.concatenate([
        np.full(len(doc), d, dtype=np.int64) for d, (_, doc) in enumerate(corpus.documents)
    ])
    n_docs = len(corpus.documents)
    n_dk = np.zeros((n_docs, n_topics), dtype=np.int64)
    n_kt = np.zeros((n_topics, vocab_size), dtype=np.int64)
    n_k = np.zeros(n_topics, dtype=np.int64)
    total_tokens = len(tokens)
    _seed_rng(seed)
    z = _init_assignments(tokens, doc_of, n_topics, n_dk, n_kt, n_k)
    trace = [int(n_k.sum())]
    for _ in range(gibbs_iters):
        _gibbs_sweep(tokens, doc_of, z, n_dk, n_kt, n_k, alpha, eta)
        count = int(n_k.sum())
        if count != total_tokens:
            raise AssertionError(f"token count not conserved: {count} != {total_tokens}")
        trace.append(count)
    topic_word = (n_kt + eta) / (n_k + vocab_size * eta)[:, None]
    return TopicModel(n_topics=n_topics, alpha=alpha, eta=eta, topic_word=topic_word,
                      gibbs_iters=gibbs_iters, seed=seed,
                      vocabulary=dict(corpus.vocabulary), token_count_trace=trace)


def infer_topics(model: TopicModel, bag: list[str], iters: int = 20,
                 seed: int = 0) -> np.ndarray:
    """Topic vector of a document bag under a fitted model.

    Gibbs inference with the topic/word distribution held fixed; assignment
    proportions are averaged over the sweeps and smoothed by alpha. A fully
    out-of-vocabulary document maps to the uniform vector.
    """
    tokens = np.array([model.vocabulary[u] for u in bag if u in model.vocabulary],
                      dtype=np.int64)
    if len(tokens) == 0:
        return np.full(model.n_topics, 1.0 / model.n_topics)
    _seed_rng(seed)
    avg_counts = _infer_doc(tokens, model.topic_word, model.alpha, iters)
    vec = avg_counts + model.alpha
    return vec / vec.sum()


def infer_matrix(model: TopicModel, bags: list[list[str]], iters: int = 20,
                 seed: int = 0) -> np.ndarray:
    """Stack of topic vectors, one row per document bag."""
    return np.vstack([infer_topics(model, bag, iters=iters, seed=seed) for bag in bags])


# -- neural classifier -------------------------------------------------


@dataclass
class NNHyper:
    epochs: int = 30
    learning_rate: float = 0.1
    batch_size: int = 32
    seed: int = 0
    hidden_units: int = 100


@dataclass
class NNModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    hyper: NNHyper
    loss_trace: list[float] = field(default_factory=list, repr=False)

    @property
    def n_inputs(self) -> int:
        return self.w1.shape[0]


def nn_forward(w1, b1, w2, b2, X):
    pre = X @ w1 + b1
    hidden = np.maximum(pre, 0.0)
    return expit(hidden @ w2 + b2), pre, hidden


def nn_loss_and_grads(w1, b1, w2, b2, X, y, sample_weights):
    """Mean weighted cross-entropy and analytic gradients for all parameters."""
    n = len(y)
    pre = X @ w1 + b1
    hidden = np.maximum(pre, 0.0)
    z = hidden @ w2 + b2
    losses = np.logaddexp(0.0, z) - y * z
    loss = float(np.dot(sample_weights, losses) / n)
    dz = sample_weights * (expit(z) - y) / n
    gw2 = hidden.T @ dz
    gb2 = float(dz.sum())
    dhidden = np.outer(dz, w2) * (pre > 0.0)
    gw1 = X.T @ dhidden
    gb1 = dhidden.sum(axis=0)
    return loss, (gw1, gb1, gw2, gb2)


def train_nn(vectors: np.ndarray, labels, hyper: NNHyper | None = None,
             class_weight: dict[bool, float] | None = None) -> NNModel:
    """Mini-batch gradient descent with seeded shuffling and a loss trace."""
    hyper = hyper or NNHyper()
    X = np.asarray(vectors, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if class_weight is None:
        class_weight = class_weights(y.astype(bool))
    sw = np.where(y > 0.5, class_weight[True], class_weight[False])
    rng = np.random.default_rng(hyper.seed)
    n_in = X.shape[1]
    h = hyper.hidden_units
    w1 = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, h))
    b1 = np.zeros(h)
    w2 = rng.normal(0.0, np.sqrt(2.0 / h), size=h)
    b2 = 0.0
    trace: list[float] = []
    for _ in range(hyper.epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            _, (gw1, gb1, gw2, gb2) = nn_loss_and_grads(w1, b1, w2, b2, X[idx], y[idx], sw[idx])
            w1 = w1 - hyper.learning_rate * gw1
            b1 = b1 - hyper.learning_rate * gb1
            w2 = w2 - hyper.learning_rate * gw2
            b2 = b2 - hyper.learning_rate * gb2
        epoch_loss, _ = nn_loss_and_grads(w1, b1, w2, b2, X, y, sw)
        if not np.isfinite(epoch_loss):
            raise ArithmeticError(f"non-finite loss after epoch {len(trace) + 1}; "
                                  f"lower the learning rate ({hyper.learning_rate})")
        trace.append(epoch_loss)
    return NNModel(w1=w1, b1=b1, w2=w2, b2=b2, hyper=hyper, loss_trace=trace)


def predict_nn(model: NNModel, vector: np.ndarray) -> tuple[float, bool]:
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (model.n_inputs,):
        raise ValueError(f"expected vector of length {model.n_inputs}, got {vector.shape}")
    score, _, _ = nn_forward(model.w1, model.b1, model.w2, model.b2, vector[None, :])
    s = float(score[0])
    return s, s >= 0.5


def predict_nn_batch(model: NNModel, vectors: np.ndarray) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] != model.n_inputs:
        raise ValueError(f"expected (n, {model.n_inputs}) matrix, got {vectors.shape}")
    scores, _, _ = nn_forward(model.w1, model.b1, model.w2, model.b2, vectors)
    return scores
