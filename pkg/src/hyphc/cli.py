"""Command-line entry point: ``hyphc {gen,fit,decode,eval}``.

Exit codes: 0 success, 2 configuration or usage error, 3 data error,
4 training aborted on a non-finite loss.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import io
from .data import planted_two_level
from .errors import ConfigError, InvalidInputError, NonFiniteLossError, ParseError
from .nn import checkpoint_bytes, forward
from .oracle import MAX_EXHAUSTIVE_N, best_tree_exhaustive
from .similarity import build_similarity
from .train import TrainConfig, fit
from .tree import dasgupta_cost, decode, dendrogram_purity, from_newick, to_dot, to_newick

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NONFINITE = 4

FIT_OUTPUTS = ("model.ckpt", "embeddings.csv", "run.json", "tree.newick", "metrics.json")


class _ExitError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def load_config(path) -> TrainConfig:
    if path is None:
        return TrainConfig()
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return TrainConfig.from_dict(raw)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_gen(args) -> int:
    x, labels = planted_two_level(args.supers, args.subs, args.per_cluster, args.dim, args.seed)
    io.atomic_write(args.out, io.features_csv(x, labels))
    return 0


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = TrainConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    x, labels = io.read_features(args.input)
    os.makedirs(args.out, exist_ok=True)

    progress = None
    if args.verbose:
        def progress(entry):
            print(f"epoch {entry['epoch']:4d}  ct {entry['loss_ct']:.5f}  hc {entry['loss_hc']:.5f}"
                  f"  tau {entry['tau']:.4g}", file=sys.stderr)

    model, emb, record = fit(x, cfg, progress=progress)
    tree = decode(emb)
    latents = forward(model, x)[0]
    graph = build_similarity(latents, cfg.similarity, cfg.rbf_sigma)
    metrics = {"n": len(x), "dasgupta_cost": dasgupta_cost(tree, graph)}
    if labels is not None:
        metrics["dendrogram_purity"] = dendrogram_purity(tree, labels)
    if record.epochs:
        last = record.epochs[-1]
        metrics.update({k: last[k] for k in ("loss_ct", "loss_hc", "loss_joint")})

    out = args.out
    io.atomic_write(os.path.join(out, "model.ckpt"), checkpoint_bytes(model))
    io.atomic_write(os.path.join(out, "embeddings.csv"), io.embeddings_csv(emb))
    io.atomic_write(os.path.join(out, "run.json"), record.to_json() + "\n")
    io.atomic_write(os.path.join(out, "tree.newick"), to_newick(tree) + "\n")
    io.atomic_write(os.path.join(out, "metrics.json"), _dumps(metrics))
    return 0


def cmd_decode(args) -> int:
    emb = io.read_embeddings(args.embeddings)
    if len(emb) < 2:
        raise InvalidInputError(f"{args.embeddings}: need at least 2 points")
    tree = decode(emb)
    io.atomic_write(args.out, to_newick(tree) + "\n")
    if args.dot:
        io.atomic_write(args.dot, to_dot(tree))
    return 0


def cmd_eval(args) -> int:
    if args.labels is None and args.similarities is None:
        raise _ExitError(EXIT_CONFIG, "eval needs --labels and/or --similarities")
    if args.oracle and args.similarities is None:
        raise _ExitError(EXIT_CONFIG, "--oracle needs --similarities")
    if not os.path.isfile(args.tree):
        raise InvalidInputError(f"file not found: {args.tree}")
    with open(args.tree, encoding="utf-8") as fh:
        tree = from_newick(fh.read())
    n = tree.n_leaves
    if args.oracle and n > MAX_EXHAUSTIVE_N:
        raise _ExitError(EXIT_CONFIG, f"--oracle is limited to n <= {MAX_EXHAUSTIVE_N}, tree has {n}")
    result = {}
    if args.similarities is not None:
        graph = io.read_similarities(args.similarities, n)
        result["dasgupta_cost"] = dasgupta_cost(tree, graph)
        if args.oracle:
            result["oracle_cost"] = best_tree_exhaustive(graph)[1]
    if args.labels is not None:
        labels = io.read_labels(args.labels)
        if len(labels) != n:
            raise InvalidInputError(f"{args.labels}: {len(labels)} labels for a tree with {n} leaves")
        result["dendrogram_purity"] = dendrogram_purity(tree, labels)
    sys.stdout.write(_dumps(result))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyphc", description="Joint contrastive and hyperbolic hierarchical clustering.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--preset", choices=["planted2level"], default="planted2level")
    p.add_argument("--supers", type=int, default=4)
    p.add_argument("--subs", type=int, default=4)
    p.add_argument("--per-cluster", type=int, default=8)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fit", help="train and decode a hierarchy")
    p.add_argument("--input", required=True, help="features CSV (optional 'label' column)")
    p.add_argument("--config", help="TOML config mirroring TrainConfig fields")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("decode", help="decode a tree from disk embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dot", help="also write a DOT graph here")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="score a Newick tree")
    p.add_argument("--tree", required=True)
    p.add_argument("--labels")
    p.add_argument("--similarities")
    p.add_argument("--oracle", action="store_true", help="also compute the exhaustive optimum")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen" and (min(args.supers, args.subs, args.per_cluster) < 1 or args.dim < 2):
        parser.error("need --supers, --subs, --per-cluster >= 1 and --dim >= 2")
    try:
        return args.func(args)
    except _ExitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteLossError as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except (InvalidInputError, ParseError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
