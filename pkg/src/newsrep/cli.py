"""Command-line pipeline: synth -> ingest -> split -> run -> correlate.

Every command is deterministic given identical inputs, flags, and seed, and
reports embed the resolved configuration. Exit codes: 0 success, 1 usage
error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harmonic as hr
from . import ingest as ing
from . import logreg as lr
from . import metrics as mx
from . import synth as sy
from . import topics as tp
from .graph import load_snapshot, save_snapshot

METHODS = ("lr-u", "lr-ut", "lr-t", "topics", "harmonic")

EDGES_FILE = "edges.tsv"
ITEMS_FILE = "items.jsonl"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_snapshot_dir(snapshot_dir: str):
    snap = Path(snapshot_dir)
    graph = load_snapshot(snap / EDGES_FILE, snap / ITEMS_FILE)
    graph.freeze()
    return graph


def _load_split_file(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# -- subcommands -------------------------------------------------------


def cmd_synth(args) -> int:
    overrides = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            overrides.update(json.load(fh))
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.n_users is not None:
        overrides["n_users"] = args.n_users
    if "start" in overrides:
        from datetime import date
        overrides["start"] = date.fromisoformat(overrides["start"])
    for key in ("title_words", "desc_words"):
        if key in overrides:
            overrides[key] = tuple(overrides[key])
    cfg = sy.SynthConfig(**overrides)
    corpus = sy.generate(cfg)
    manifest = sy.write_corpus(corpus, args.out)
    print(f"wrote {manifest['n_records']} records for {manifest['n_sites']} sites "
          f"to {args.out}")
    return 0


def cmd_ingest(args) -> int:
    records, line_rejects = ing.parse_records(args.records)
    for lineno, reason in line_rejects[:20]:
        print(f"warning: line {lineno}: {reason}", file=sys.stderr)
    graph, url_rejects = ing.build_graph(records)
    if graph.n_items == 0:
        raise ValueError(f"no ingestible records in {args.records}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_snapshot(graph, out / EDGES_FILE, out / ITEMS_FILE)
    manifest = {
        "records_file": str(args.records),
        "n_records": len(records) + len(line_rejects),
        "n_parsed": len(records),
        "n_line_rejects": len(line_rejects),
        "n_url_rejects": len(url_rejects),
        "reject_lines": [[ln, reason] for ln, reason in line_rejects[:20]],
        "n_items": graph.n_items,
        "n_users": graph.n_users,
        "n_edges": graph.n_edges,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    print(f"ingested {graph.n_edges} edges / {graph.n_items} items / "
          f"{graph.n_users} users ({len(line_rejects) + len(url_rejects)} rejected)")
    return 0


def cmd_split(args) -> int:
    graph = _load_snapshot_dir(args.snapshot)
    gt = ing.load_ground_truth(args.gt)
    specs = _load_split_file(args.split)
    if args.name not in specs:
        raise ValueError(f"split {args.name!r} not in {args.split} "
                         f"(available: {sorted(specs)})")
    spec = ing.split_spec_from_dict(specs[args.name])
    ds = ing.build_split(graph, spec, gt, name=args.name)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_snapshot(ds.graph, out / EDGES_FILE, out / ITEMS_FILE)
    manifest = {
        "split": args.name,
        "spec": specs[args.name],
        "gt": gt.name,
        "n_items": ds.n_items,
        "n_hoax": ds.n_hoax,
        "n_nonhoax": ds.n_items - ds.n_hoax,
        "n_users": ds.graph.n_users,
        "n_edges": ds.graph.n_edges,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    print(f"split {args.name}: {ds.n_items} items ({ds.n_hoax} hoax), "
          f"{ds.graph.n_edges} edges")
    return 0


def _run_lr(method: str, train_ds, test_ds, aliases, args, out: Path):
    mode = {"lr-u": "U", "lr-ut": "UT", "lr-t": "T"}[method]
    hyper = lr.LRHyper(l2_strength=args.l2, max_iters=args.max_iters, seed=args.seed)
    model = lr.train_lr(train_ds, mode, hyper, aliases)
    lr.save_model(model, out / "model.json")
    scores, preds = lr.predict_dataset(model, test_ds)
    return scores, preds, {"mode": mode, "converged": model.converged,
                           "n_iters": model.n_iters,
                           "dimension": model.feature_space.dimension,
                           "l2_strength": args.l2}


def _run_topics(train_ds, test_ds, args, out: Path):
    corpus = tp.build_corpus([train_ds, test_ds], min_count=args.min_count)
    model = tp.fit_lda(corpus, n_topics=args.topics_k, gibbs_iters=args.gibbs_iters,
                       seed=args.seed)
    train_bags = tp.dataset_bags(train_ds)
    test_bags = tp.dataset_bags(test_ds)
    train_ids = [it.item_id for it in train_ds.graph.items]
    test_ids = [it.item_id for it in test_ds.graph.items]
    train_vecs = tp.infer_matrix(model, [train_bags[i] for i in train_ids], seed=args.seed)
    test_vecs = tp.infer_matrix(model, [test_bags[i] for i in test_ids], seed=args.seed)
    labels = [train_ds.labels[i] for i in train_ids]
    nn = tp.train_nn(train_vecs, labels, tp.NNHyper(seed=args.seed))
    test_scores = tp.predict_nn_batch(nn, test_vecs)
    scores = {iid: float(s) for iid, s in zip(test_ids, test_scores)}
    preds = {iid: s >= 0.5 for iid, s in scores.items()}
    return scores, preds, {"n_topics": model.n_topics, "alpha": model.alpha,
                           "eta": model.eta, "gibbs_iters": args.gibbs_iters,
                           "min_count": args.min_count,
                           "vocab_size": len(model.vocabulary),
                           "dropped_docs": len(corpus.dropped_items)}


def _run_harmonic(graph, train_ds, test_ds, gt, gt2, args, out: Path):
    cfg = hr.HarmonicConfig(c=args.c, iterations=args.iters,
                            pos_factor=args.pos_factor, seed=args.seed)
    seeds = hr.build_label_seed(train_ds, gt, cfg, other_gt=gt2)
    result = hr.propagate(graph, seeds, cfg)
    hr.save_beliefs(result, out / "q_items.tsv", out / "q_users.tsv")
    test_ids = [it.item_id for it in test_ds.graph.items]
    scores = hr.scores(result, test_ids)
    preds = {iid: q < 0.0 for iid, q in scores.items()}
    return scores, preds, {"c": cfg.c, "iterations": cfg.iterations,
                           "pos_factor": cfg.pos_factor,
                           "n_fake_seeds": len(seeds.fake_items),
                           "n_nonfake_seeds": len(seeds.nonfake_items)}


def cmd_run(args) -> int:
    graph = _load_snapshot_dir(args.snapshot)
    gt = ing.load_ground_truth(args.gt)
    gt2 = ing.load_ground_truth(args.gt2) if args.gt2 else None
    aliases = ing.load_aliases(args.aliases) if args.aliases else {}
    specs = _load_split_file(args.split)
    for name in (args.train_name, args.test_name):
        if name not in specs:
            raise ValueError(f"split {name!r} not in {args.split} "
                             f"(available: {sorted(specs)})")
    train_spec = ing.split_spec_from_dict(specs[args.train_name])
    if args.min_shares is not None:
        train_spec.min_shares = args.min_shares
    test_spec = ing.split_spec_from_dict(specs[args.test_name])
    train_ds = ing.build_split(graph, train_spec, gt, name=args.train_name)
    test_ds = ing.build_split(graph, test_spec, gt, name=args.test_name)
    if train_ds.n_items == 0 or test_ds.n_items == 0:
        raise ValueError("empty train or test split")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.method in ("lr-u", "lr-ut", "lr-t"):
        scores, preds, method_info = _run_lr(args.method, train_ds, test_ds,
                                             aliases, args, out)
    elif args.method == "topics":
        scores, preds, method_info = _run_topics(train_ds, test_ds, args, out)
    else:
        scores, preds, method_info = _run_harmonic(graph, train_ds, test_ds,
                                                   gt, gt2, args, out)

    config = {
        "method": args.method,
        "snapshot": str(args.snapshot),
        "gt": gt.name,
        "gt2": gt2.name if gt2 else None,
        "train_split": args.train_name,
        "test_split": args.test_name,
        "train_spec": specs[args.train_name],
        "test_spec": specs[args.test_name],
        "min_shares_override": args.min_shares,
        "seed": args.seed,
        "train_items": train_ds.n_items,
        "train_hoax": train_ds.n_hoax,
        "test_items": test_ds.n_items,
        "test_hoax": test_ds.n_hoax,
    }
    config.update({f"method_{k}": v for k, v in method_info.items()})
    report = mx.build_report(
        labels=test_ds.labels,
        predictions=preds,
        items=list(test_ds.graph.items),
        share_counts=test_ds.graph.share_counts(),
        method=args.method,
        split_name=f"{args.train_name}->{args.test_name}",
        train_gt=gt if gt2 else None,
        other_gt=gt2,
        config=config,
    )
    mx.save_report(report, out / "report.json", out / "report.txt", out / "sites.csv")
    with open(out / "predictions.tsv", "w", encoding="utf-8") as fh:
        for iid in sorted(preds):
            fh.write(f"{iid}\t{scores[iid]:.6g}\t{'hoax' if preds[iid] else 'nonhoax'}\n")
    print(mx.render_text(report))
    return 0


def cmd_correlate(args) -> int:
    graph = _load_snapshot_dir(args.snapshot)
    sites = [s.strip() for s in args.sites.split(",") if s.strip()]
    if not sites:
        raise ValueError("no sites given")
    matrix = mx.correlation_matrix(graph, sites)
    lines = ["site," + ",".join(sites)]
    for i, site in enumerate(sites):
        lines.append(site + "," + ",".join(f"{matrix[i, j]:.6f}" for j in range(len(sites))))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(text, end="")
    return 0


# -- parser ------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="newsrep",
                     description="Reputation scoring for news URLs on a share graph")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic share corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-users", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON file of SynthConfig overrides")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="parse records into a share-graph snapshot")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", help="materialize a temporal split of a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--split", required=True, help="JSON file of named split specs")
    p.add_argument("--name", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("run", help="train/propagate a method and evaluate it")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--gt2", default=None)
    p.add_argument("--aliases", default=None)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--split", required=True, help="JSON file of named split specs")
    p.add_argument("--train-name", default="train")
    p.add_argument("--test-name", default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--min-shares", type=int, default=None,
                   help="override the train split's min_shares")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--c", type=float, default=0.02)
    p.add_argument("--iters", type=int, default=4)
    p.add_argument("--pos-factor", type=int, default=1)
    p.add_argument("--topics-k", type=int, default=100)
    p.add_argument("--gibbs-iters", type=int, default=200)
    p.add_argument("--min-count", type=int, default=5)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("correlate", help="site-correlation matrix over a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--sites", required=True, help="comma-separated site list")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_correlate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
