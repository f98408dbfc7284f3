"""Command-line interface: ``dgcn {preprocess,train,evaluate,compare,spectrum}``.

Set ``DGCN_LOG_LEVEL`` (DEBUG, INFO, WARNING, ...) to control logging.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import nn
from .errors import ConvergenceError, DGCNError, ValidationError
from .graph import (
    add_self_loops,
    largest_scc,
    load_edgelist,
    load_node_data,
    write_edgelist,
    write_node_data,
)
from .pipeline import (
    TrainConfig,
    build_features,
    compare,
    evaluate,
    format_table,
    propagation_for,
    restrict_to_lscc,
    run_experiment,
    split_nodes,
    seed_streams,
)
from .spectral import directed_laplacian, perron_vector, propagation_matrix, transition_matrix, write_matrix
from .synthetic import directed_sbm

log = logging.getLogger("dgcn")

PATH_KEYS = ("data_dir", "edgelist", "labels", "features", "out")
PRNG_NAME = "numpy PCG64 via SeedSequence(seed).spawn(3) -> (split, init, dropout)"


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment line."""
    pairs = {}
    base = Path(path).resolve().parent
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in PATH_KEYS and value and not os.path.isabs(value):
                value = str(base / value)
            pairs[key] = value
    return pairs


def parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ValidationError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def effective_config(args) -> TrainConfig:
    pairs = read_config(args.config) if args.config else {}
    pairs.update(parse_overrides(getattr(args, "overrides", None)))
    if getattr(args, "out", None):
        pairs["out"] = args.out
    return TrainConfig.from_strings(pairs)


def load_dataset(cfg: TrainConfig):
    if cfg.synthetic == "sbm":
        return directed_sbm(n=cfg.sbm_n, p_in=cfg.sbm_p_in, p_out=cfg.sbm_p_out, seed=cfg.seed)
    if cfg.data_dir:
        d = Path(cfg.data_dir)
        g = load_edgelist(d / "graph.edgelist", weighted=True)
        feats = d / "features.txt"
        data = load_node_data(g, d / "labels.txt", feats if feats.exists() else None)
        return g, data
    if not cfg.edgelist or not cfg.labels:
        raise ValidationError("config needs synthetic=sbm, data_dir, or edgelist + labels")
    g = load_edgelist(cfg.edgelist, weighted=cfg.weighted, binarize=cfg.binarize)
    return g, load_node_data(g, cfg.labels, cfg.features)


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(cfg: TrainConfig, default: str) -> Path:
    out = Path(cfg.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ----------------------------------------------------------------- commands


def cmd_preprocess(args) -> int:
    g = load_edgelist(args.edgelist, weighted=args.weighted, binarize=not args.sum_duplicates)
    if g.n == 0:
        raise ValidationError(f"{args.edgelist}: no edges")
    data = load_node_data(g, args.labels, args.features)
    print(f"Input: {g.n} nodes, {g.num_edges} edges")
    sub, sub_data = restrict_to_lscc(g, data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_edgelist(sub, out / "graph.edgelist")
    write_node_data(sub, sub_data, out / "labels.txt", out / "features.txt")
    with open(out / "node_map.tsv", "w", encoding="utf-8") as fh:
        for i, nid in enumerate(sub.node_ids):
            fh.write(f"{i}\t{nid}\n")
    report = {
        "input_nodes": g.n,
        "input_edges": g.num_edges,
        "lscc_nodes": sub.n,
        "lscc_edges": sub.num_edges,
        "classes": sub_data.num_classes,
        "labeled_lscc_nodes": int(len(sub_data.labeled)),
        "feature_width": int(sub_data.features.shape[1]),
        "binarized": not args.sum_duplicates,
    }
    _write_json(out / "report.json", report)
    print(f"LSCC: {sub.n} nodes, {sub.num_edges} edges")
    return 0


def cmd_train(args) -> int:
    cfg = effective_config(args)
    g, data = load_dataset(cfg)
    exp, runs = run_experiment(cfg, g, data, keep_params=True)
    out = _out_dir(cfg, "results")
    for r in runs:
        nn.save_params(r.params, out / f"params_seed{r.seed}.txt")
    summary = {"config": cfg.to_dict(), "prng": PRNG_NAME, "propagation": cfg.propagation, **exp.to_dict()}
    _write_json(out / "results.json", summary)
    table = format_table({cfg.propagation: exp}, dataset=_dataset_name(cfg))
    (out / "results.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return 0


def cmd_evaluate(args) -> int:
    cfg = effective_config(args)
    seed = cfg.seed if args.seed is None else args.seed
    g, data = load_dataset(cfg)
    sub, sub_data = restrict_to_lscc(g, data)
    params = nn.load_params(args.checkpoint)
    a_hat = propagation_for(sub, cfg.propagation)
    x = build_features(sub, sub_data)
    split_rng, _, _ = seed_streams(seed)
    _, test_idx = split_nodes(sub.n, cfg.train_fraction, split_rng, labels=sub_data.labels)
    acc = evaluate(params, a_hat, x, sub_data.labels, test_idx)
    print(f"accuracy {acc:.6f} on {len(test_idx)} test nodes (seed {seed})")
    return 0


def cmd_compare(args) -> int:
    cfg = effective_config(args)
    g, data = load_dataset(cfg)
    cols = compare(cfg, g, data)
    out = _out_dir(cfg, "results")
    _write_json(
        out / "compare.json",
        {"config": cfg.to_dict(), "prng": PRNG_NAME, **{k: v.to_dict() for k, v in cols.items()}},
    )
    table = format_table(cols, dataset=_dataset_name(cfg))
    (out / "compare.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    if cols["dgcn"].mean < cols["baseline-sym"].mean:
        log.warning("DGCN mean accuracy is below the symmetric baseline on this data")
    return 0


def cmd_spectrum(args) -> int:
    g = load_edgelist(args.edgelist, weighted=args.weighted)
    if g.n == 0:
        raise ValidationError(f"{args.edgelist}: no edges")
    keep = largest_scc(g)
    if len(keep) < g.n:
        print(f"using LSCC: {len(keep)} of {g.n} nodes")
        g = g.induced_subgraph(keep)
    p = transition_matrix(add_self_loops(g))
    perron = perron_vector(p, tol=args.tol, max_iter=args.max_iter)
    a_hat = propagation_matrix(p, perron, dense=True)
    lap = directed_laplacian(p, perron, dense=True)
    eig = np.linalg.eigvalsh(lap)
    in_range = bool(eig.min() >= -1e-10 and eig.max() <= 2 + 1e-10)
    np.set_printoptions(precision=6, suppress=True)
    print(f"nodes {g.n}, edges {g.num_edges}; perron iterations {perron.iterations}, residual {perron.residual:.3e}")
    if g.n <= args.print_limit:
        print("phi =", perron.phi)
        print("A_hat =")
        print(a_hat)
    print(f"laplacian eigenvalues: min {eig.min():.12g}, max {eig.max():.12g}, within [0, 2]: {in_range}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_matrix(out / "phi.txt", perron.phi)
        write_matrix(out / "a_hat.txt", a_hat)
        write_matrix(out / "laplacian_eigenvalues.txt", eig)
        _write_json(
            out / "spectrum.json",
            {
                "nodes": g.n,
                "edges": g.num_edges,
                "iterations": perron.iterations,
                "residual": perron.residual,
                "eig_min": float(eig.min()),
                "eig_max": float(eig.max()),
                "within_0_2": in_range,
            },
        )
    return 0


def _dataset_name(cfg: TrainConfig) -> str:
    if cfg.synthetic:
        return cfg.synthetic.upper()
    if cfg.data_dir:
        return Path(cfg.data_dir).name
    return Path(cfg.edgelist).stem if cfg.edgelist else "dataset"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgcn", description="Directed-graph spectral GCN experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="extract the LSCC and align labels/features")
    p.add_argument("--edgelist", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--features")
    p.add_argument("--out", required=True)
    p.add_argument("--weighted", action="store_true", help="read a third weight column")
    p.add_argument("--sum-duplicates", action="store_true", help="sum repeated edges instead of binarizing")
    p.set_defaults(func=cmd_preprocess)

    for name, func, help_ in (
        ("train", cmd_train, "train over config.runs seeds"),
        ("compare", cmd_compare, "DGCN vs symmetric baseline on identical seeds"),
        ("evaluate", cmd_evaluate, "score a checkpoint on its seed's test split"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config")
        p.add_argument("--out")
        p.add_argument("overrides", nargs="*", metavar="key=value")
        if name == "evaluate":
            p.add_argument("--checkpoint", required=True)
            p.add_argument("--seed", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("spectrum", help="Perron vector, A_hat and Laplacian eigenvalues")
    p.add_argument("--edgelist", required=True)
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--out")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--print-limit", type=int, default=20, help="print phi and A_hat up to this many nodes")
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("DGCN_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DGCNError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
