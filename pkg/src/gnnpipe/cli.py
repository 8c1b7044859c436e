"""Command-line harness: generate graphs, partition, print plan digests,
run training, sweep cache sizes."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .graph import load_graph, save_graph, synth_powerlaw
from .partition import (edge_cut, halo_expand, partition_edgecut,
                        partition_random, save_partition)
from .plan import generate_plan
from .train import RunConfig, run, worker_metrics_path


def _add_common_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", help="RGF1 graph file (omit to generate)")
    p.add_argument("--nodes", type=int, help="generated graph size")
    p.add_argument("--edges-per-node", type=int, dest="edges_per_node")
    p.add_argument("--feat-dim", type=int, dest="feat_dim")
    p.add_argument("--classes", type=int, dest="classes")
    p.add_argument("--partitions", type=int)
    p.add_argument("--partitioner", choices=["random", "edgecut"])
    p.add_argument("--partition-file", dest="partition_file")
    p.add_argument("--seed", type=int, help="base seed s0")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--fanout", help="comma-separated per-layer fanouts, e.g. 10,25")
    p.add_argument("--layers", type=int)
    p.add_argument("--hidden-dim", type=int, dest="hidden_dim")
    p.add_argument("--lr", type=float)
    p.add_argument("--mode", choices=["baseline", "rapid"])
    p.add_argument("--precision", choices=["f32", "f64"])
    p.add_argument("--n-hot", dest="n_hot",
                   help="hot-set size: absolute count or percent like 15%%")
    p.add_argument("--hot-scope", dest="hot_scope", choices=["global", "epoch"])
    p.add_argument("--prefetch-depth", type=int, dest="prefetch_depth")
    p.add_argument("--latency-ms", type=float, dest="latency_ms")
    p.add_argument("--transport", choices=["inproc", "tcp"])
    p.add_argument("--metrics-out", dest="metrics_out")
    p.add_argument("--dump-cache-keys", action="store_true", dest="dump_cache_keys")
    p.add_argument("--config", help="key=value config file (CLI flags win)")


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            key, val = line.split("=", 1)
            values[key.strip()] = val.strip()
    return values


def _build_run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    file_vals = _read_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(cli_name: str, file_key: str):
        v = getattr(args, cli_name, None)
        if v is not None and v is not False:
            return v
        return file_vals.get(file_key)

    def set_if(attr, value, conv=None):
        if value is not None:
            setattr(cfg, attr, conv(value) if conv else value)

    set_if("graph_path", pick("graph", "graph"))
    set_if("gen_nodes", pick("nodes", "nodes"), int)
    set_if("gen_edges_per_node", pick("edges_per_node", "edges_per_node"), int)
    set_if("feat_dim", pick("feat_dim", "feat_dim"), int)
    set_if("num_classes", pick("classes", "classes"), int)
    set_if("partitions", pick("partitions", "partitions"), int)
    set_if("partitioner", pick("partitioner", "partitioner"))
    set_if("partition_path", pick("partition_file", "partition_file"))
    set_if("s0", pick("seed", "seed"), int)
    set_if("epochs", pick("epochs", "epochs"), int)
    set_if("batch_size", pick("batch_size", "batch_size"), int)
    fanout = pick("fanout", "fanout")
    if fanout is not None:
        cfg.fanouts = [int(x) for x in str(fanout).split(",") if x]
        cfg.num_layers = len(cfg.fanouts)
    set_if("num_layers", pick("layers", "layers"), int)
    set_if("hidden_dim", pick("hidden_dim", "hidden_dim"), int)
    set_if("lr", pick("lr", "lr"), float)
    set_if("mode", pick("mode", "mode"))
    set_if("precision", pick("precision", "precision"))
    n_hot = pick("n_hot", "n_hot")
    if n_hot is not None:
        n_hot = str(n_hot)
        if n_hot.endswith("%"):
            cfg.n_hot = None
            cfg.n_hot_pct = float(n_hot[:-1])
        else:
            cfg.n_hot = int(n_hot)
    set_if("hot_scope", pick("hot_scope", "hot_scope"))
    set_if("prefetch_depth", pick("prefetch_depth", "prefetch_depth"), int)
    set_if("latency_ms", pick("latency_ms", "latency_ms"), float)
    set_if("transport", pick("transport", "transport"))
    set_if("metrics_out", pick("metrics_out", "metrics_out"))
    if getattr(args, "dump_cache_keys", False):
        cfg.dump_cache_keys = True
    return cfg


def _cmd_gen(args: argparse.Namespace) -> int:
    g = synth_powerlaw(args.nodes, args.edges_per_node, args.feat_dim,
                       args.classes, args.seed)
    save_graph(g, args.out)
    print(f"wrote {args.out}: {g.num_nodes} nodes, {g.num_edges} edge entries")
    return 0


def _cmd_partition(args: argparse.Namespace) -> int:
    g = load_graph(args.graph)
    if args.partitioner == "random":
        book = partition_random(g, args.partitions, args.seed)
    else:
        book = partition_edgecut(g, args.partitions)
    save_partition(book, args.out)
    print(f"wrote {args.out}: k={book.k}, edge cut={edge_cut(g, book.owner)}")
    return 0


def _cmd_plan(args: argparse.Namespace) -> int:
    cfg = _build_run_config(args)
    if cfg.graph_path:
        g = load_graph(cfg.graph_path)
    else:
        g = synth_powerlaw(cfg.gen_nodes, cfg.gen_edges_per_node, cfg.feat_dim,
                           cfg.num_classes, cfg.s0)
    plan = generate_plan(g, np.flatnonzero(g.train_mask), cfg.fanouts,
                         cfg.batch_size, cfg.epochs, cfg.s0)
    print(plan.digest_hex())
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = _build_run_config(args)
    try:
        cfg.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    results = run(cfg)
    for r in results:
        print(f"worker {r.part}: plan digest {r.plan_digest}")
        if r.cache_keys is not None:
            print(f"worker {r.part}: cache keys {r.cache_keys.tolist()}")
        for rec in r.records:
            print(f"worker {r.part} epoch {rec.epoch}: loss={rec.loss:.4f} "
                  f"acc={rec.train_acc:.4f} nodes_pulled={rec.nodes_pulled} "
                  f"t_e={rec.t_e_ms:.1f}ms")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _build_run_config(args)
    try:
        cfg.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    base_out = cfg.metrics_out
    for size in args.n_hot_list.split(";"):
        size = size.strip()
        swept = RunConfig(**vars(cfg))
        if size.endswith("%"):
            swept.n_hot = None
            swept.n_hot_pct = float(size[:-1])
        else:
            swept.n_hot = int(size)
        if base_out:
            swept.metrics_out = base_out.replace(".csv", f".nhot{size.rstrip('%')}.csv")
        results = run(swept)
        pulled = sum(rec.nodes_pulled for r in results for rec in r.records)
        print(f"n_hot={size}: total fallback nodes_pulled={pulled}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="gnnpipe")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic power-law graph")
    p_gen.add_argument("--nodes", type=int, required=True)
    p_gen.add_argument("--edges-per-node", type=int, default=5, dest="edges_per_node")
    p_gen.add_argument("--feat-dim", type=int, default=32, dest="feat_dim")
    p_gen.add_argument("--classes", type=int, default=8)
    p_gen.add_argument("--seed", type=int, default=7)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen)

    p_part = sub.add_parser("partition", help="partition a graph to an RPB1 file")
    p_part.add_argument("--graph", required=True)
    p_part.add_argument("--partitions", type=int, required=True)
    p_part.add_argument("--partitioner", choices=["random", "edgecut"],
                        default="edgecut")
    p_part.add_argument("--seed", type=int, default=7)
    p_part.add_argument("--out", required=True)
    p_part.set_defaults(func=_cmd_partition)

    p_plan = sub.add_parser("plan", help="print the 16-hex-digit plan digest")
    _add_common_train_flags(p_plan)
    p_plan.set_defaults(func=_cmd_plan)

    p_train = sub.add_parser("train", help="run one training configuration")
    _add_common_train_flags(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_sweep = sub.add_parser("sweep", help="sweep hot-set sizes")
    _add_common_train_flags(p_sweep)
    p_sweep.add_argument("--n-hot-list", required=True, dest="n_hot_list",
                         help="semicolon-separated sizes, e.g. '0;1%%;5%%;15%%'")
    p_sweep.set_defaults(func=_cmd_sweep)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
