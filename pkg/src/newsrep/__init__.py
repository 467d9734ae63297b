"""Reputation scoring for news URLs shared on a social network.

Three scoring methods over a bipartite item/user share graph: sparse
logistic regression on user and word presence features, a topic-model
classifier over co-sharing communities, and harmonic belief propagation
seeded from curated site lists.
"""

__version__ = "0.1.0"

from .graph import NewsItem, ShareGraph, UserNode, load_snapshot, save_snapshot
from .ingest import (
    Dataset,
    GroundTruth,
    RawRecord,
    SplitSpec,
    build_graph,
    build_split,
    canonicalize,
    extract_site,
    load_ground_truth,
    scrub_site_mentions,
    tokenize,
)
from .harmonic import HarmonicConfig, LabelSeed, propagate, subsample_positives
from .logreg import LRHyper, LRModel, class_weights, predict_lr, train_lr
from .synth import SynthConfig, generate
from .topics import NNHyper, build_corpus, fit_lda, infer_topics, predict_nn, train_nn

__all__ = [
    "NewsItem", "ShareGraph", "UserNode", "load_snapshot", "save_snapshot",
    "Dataset", "GroundTruth", "RawRecord", "SplitSpec",
    "build_graph", "build_split", "canonicalize", "extract_site",
    "load_ground_truth", "scrub_site_mentions", "tokenize",
    "HarmonicConfig", "LabelSeed", "propagate", "subsample_positives",
    "LRHyper", "LRModel", "class_weights", "predict_lr", "train_lr",
    "SynthConfig", "generate",
    "NNHyper", "build_corpus", "fit_lda", "infer_topics", "predict_nn", "train_nn",
]
