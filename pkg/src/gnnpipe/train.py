"""End-to-end runner: partition, plan, caches, prefetch, SGD loop, metrics.

Two modes share one arithmetic path. `baseline` assembles every batch's
features with on-demand sync pulls (no cache, no prefetch); `rapid` adds
the hot-node cache, the double-buffer swap, and the asynchronous
prefetcher. Because both consume bit-identical feature rows in the same
order, they produce bit-identical parameter trajectories for the same
plan.
"""

from __future__ import annotations

import csv
import logging
import threading
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import cache as cache_mod
from . import model
from .graph import Graph, load_graph, synth_powerlaw
from .partition import (PartitionBook, halo_expand, load_partition,
                        partition_edgecut, partition_random)
from .plan import BatchPlan, collect_access, generate_plan, top_hot
from .prefetch import Prefetcher, assemble_bundle
from .rng import mix64
from .store import (InprocTransport, StoreClient, StoreShard, TcpShardServer,
                    TcpTransport, TransferAccount)

log = logging.getLogger(__name__)

CSV_HEADER = [
    "epoch", "mode", "t_e_ms", "rpc_calls", "nodes_pulled", "bytes_pulled",
    "cache_hits", "cache_misses", "reuse_ratio", "loss", "train_acc",
]

_PARAM_SEED_TAG = 0x70617261


@dataclass
class MetricsRecord:
    epoch: int
    mode: str
    t_e_ms: float
    rpc_calls: int
    nodes_pulled: int
    bytes_pulled: int
    cache_hits: int
    cache_misses: int
    reuse_ratio: float | None
    loss: float
    train_acc: float


def write_metrics(records: list[MetricsRecord], path) -> None:
    """CSV with the fixed header; reuse_ratio is empty when undefined."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([
                r.epoch, r.mode, repr(r.t_e_ms), r.rpc_calls, r.nodes_pulled,
                r.bytes_pulled, r.cache_hits, r.cache_misses,
                "" if r.reuse_ratio is None else repr(r.reuse_ratio),
                repr(r.loss), repr(r.train_acc),
            ])


def read_metrics(path) -> list[MetricsRecord]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        out = []
        for row in reader:
            out.append(MetricsRecord(
                epoch=int(row["epoch"]),
                mode=row["mode"],
                t_e_ms=float(row["t_e_ms"]),
                rpc_calls=int(row["rpc_calls"]),
                nodes_pulled=int(row["nodes_pulled"]),
                bytes_pulled=int(row["bytes_pulled"]),
                cache_hits=int(row["cache_hits"]),
                cache_misses=int(row["cache_misses"]),
                reuse_ratio=None if row["reuse_ratio"] == "" else float(row["reuse_ratio"]),
                loss=float(row["loss"]),
                train_acc=float(row["train_acc"]),
            ))
        return out


@dataclass
class RunConfig:
    # graph source: a path to an RGF1 file or generator parameters
    graph_path: str | None = None
    gen_nodes: int = 20000
    gen_edges_per_node: int = 5
    feat_dim: int = 32
    num_classes: int = 8
    partitions: int = 2
    partitioner: str = "edgecut"  # random | edgecut
    partition_path: str | None = None
    s0: int = 7
    epochs: int = 5
    batch_size: int = 512
    fanouts: list[int] = field(default_factory=lambda: [10, 25])
    n_hot: int | None = None  # absolute count; None -> use n_hot_pct
    n_hot_pct: float = 15.0  # percent of each worker's remote node set
    hot_scope: str = "epoch"  # epoch | global
    prefetch_depth: int = 3
    mode: str = "rapid"  # baseline | rapid
    latency_ms: float = 0.0
    transport: str = "inproc"  # inproc | tcp
    lr: float = 0.05
    hidden_dim: int = 32
    num_layers: int = 2
    precision: str = "f32"  # f32 | f64
    metrics_out: str | None = None
    dump_cache_keys: bool = False

    def validate(self) -> None:
        if self.mode not in ("baseline", "rapid"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.hot_scope not in ("epoch", "global"):
            raise ValueError(f"unknown hot scope {self.hot_scope!r}")
        if self.partitioner not in ("random", "edgecut"):
            raise ValueError(f"unknown partitioner {self.partitioner!r}")
        if self.transport not in ("inproc", "tcp"):
            raise ValueError(f"unknown transport {self.transport!r}")
        if self.prefetch_depth < 1:
            raise ValueError("prefetch depth must be >= 1")
        if self.precision not in ("f32", "f64"):
            raise ValueError(f"unknown precision {self.precision!r}")
        if len(self.fanouts) != self.num_layers:
            raise ValueError("fanouts must list one value per layer")


@dataclass
class WorkerResult:
    part: int
    records: list[MetricsRecord]
    params: list[model.LayerParams]
    plan_digest: str
    cache_keys: np.ndarray | None = None
    cache_fill: TransferAccount = field(default_factory=TransferAccount)


def _load_or_generate(cfg: RunConfig) -> Graph:
    if cfg.graph_path:
        return load_graph(cfg.graph_path)
    return synth_powerlaw(cfg.gen_nodes, cfg.gen_edges_per_node, cfg.feat_dim,
                          cfg.num_classes, cfg.s0)


def _partition(g: Graph, cfg: RunConfig) -> PartitionBook:
    if cfg.partition_path:
        book = load_partition(cfg.partition_path)
    elif cfg.partitioner == "random":
        book = partition_random(g, cfg.partitions, cfg.s0)
    else:
        book = partition_edgecut(g, cfg.partitions)
    return halo_expand(g, book)


def resolve_n_hot(cfg: RunConfig, num_remote: int) -> int:
    if cfg.n_hot is not None:
        return cfg.n_hot
    return int(num_remote * cfg.n_hot_pct / 100.0)


def _run_worker(
    part: int,
    g: Graph,
    book: PartitionBook,
    plan: BatchPlan,
    shard: StoreShard,
    client: StoreClient,
    cfg: RunConfig,
) -> WorkerResult:
    dtype = np.float32 if cfg.precision == "f32" else np.float64
    params = model.init_params(g.feat_dim, cfg.hidden_dim, g.num_classes,
                               cfg.num_layers, mix64(cfg.s0 ^ _PARAM_SEED_TAG),
                               dtype=dtype)
    fallback = TransferAccount()
    fill = TransferAccount()
    rapid = cfg.mode == "rapid"

    fcache: cache_mod.FeatureCache | None = None
    n_hot = 0
    if rapid and cfg.epochs > 0:
        scope_epoch = 0 if cfg.hot_scope == "epoch" else None
        freq = collect_access(plan, book, part, epoch=scope_epoch)
        remote_all = collect_access(plan, book, part) if cfg.hot_scope == "epoch" else freq
        n_hot = resolve_n_hot(cfg, len(remote_all))
        fcache = cache_mod.build_steady(top_hot(freq, n_hot), client, fill)

    records: list[MetricsRecord] = []
    labels = g.labels
    features_dtype = dtype
    for e in range(cfg.epochs):
        fb0 = fallback.snapshot()
        t_start = time.perf_counter()
        if rapid and cfg.hot_scope == "epoch" and e + 1 < cfg.epochs:
            fcache.start_secondary_build(plan, e + 1, book, part, n_hot, client, fill)
        loss_sum = 0.0
        n_batches = plan.num_batches(e)
        if rapid:
            pf = Prefetcher(plan, e, book.owner, part, shard, client, fcache,
                            fallback, depth=cfg.prefetch_depth)
            try:
                while True:
                    bundle = pf.next_bundle()
                    if bundle is None:
                        break
                    rows = bundle.rows.astype(features_dtype, copy=False)
                    loss, grads = model.loss_and_grad(bundle.block, rows,
                                                      labels, params)
                    params = model.sgd_step(params, grads, cfg.lr)
                    loss_sum += loss
            finally:
                pf.drain()
        else:
            for i in range(n_batches):
                block = plan.block(e, i)
                bundle = assemble_bundle(block, book.owner, part, shard, client,
                                         None, fallback)
                rows = bundle.rows.astype(features_dtype, copy=False)
                loss, grads = model.loss_and_grad(block, rows, labels, params)
                params = model.sgd_step(params, grads, cfg.lr)
                loss_sum += loss
        hits = misses = 0
        reuse = None
        if fcache is not None:
            fcache.wait_secondary()
            hits, misses = fcache.hits, fcache.misses
            reuse = fcache.reuse_ratio()
            fcache.swap()
        elif not rapid:
            misses = fallback.nodes_pulled - fb0[1]
            reuse = 0.0 if misses else None
        t_e_ms = (time.perf_counter() - t_start) * 1000.0
        fb1 = fallback.snapshot()
        acc = model.evaluate(g, params, g.train_mask)
        records.append(MetricsRecord(
            epoch=e,
            mode=cfg.mode,
            t_e_ms=t_e_ms,
            rpc_calls=fb1[0] - fb0[0],
            nodes_pulled=fb1[1] - fb0[1],
            bytes_pulled=fb1[2] - fb0[2],
            cache_hits=hits,
            cache_misses=misses,
            reuse_ratio=reuse,
            loss=loss_sum / n_batches if n_batches else float("nan"),
            train_acc=acc if acc is not None else float("nan"),
        ))
    return WorkerResult(
        part=part,
        records=records,
        params=params,
        plan_digest=plan.digest_hex(),
        cache_keys=fcache.hot_ids.copy() if (fcache is not None and cfg.dump_cache_keys) else None,
        cache_fill=fill,
    )


def build_shards(g: Graph, book: PartitionBook, latency_ms: float = 0.0) -> list[StoreShard]:
    shards = []
    for p in range(book.k):
        owned = book.owned(p)
        shards.append(StoreShard(p, owned, g.features[owned], latency_ms))
    return shards


def run(cfg: RunConfig) -> list[WorkerResult]:
    """Execute the pipeline for every partition's worker; write CSVs."""
    cfg.validate()
    g = _load_or_generate(cfg)
    book = _partition(g, cfg)
    shards = build_shards(g, book, cfg.latency_ms)

    servers: list[TcpShardServer] = []
    def make_transports() -> list:
        if cfg.transport == "inproc":
            return [InprocTransport(s) for s in shards]
        return [TcpTransport(srv.address[0], srv.address[1]) for srv in servers]

    if cfg.transport == "tcp":
        servers = [TcpShardServer(s) for s in shards]

    train_nodes = np.flatnonzero(g.train_mask)
    plan = generate_plan(g, train_nodes, cfg.fanouts, cfg.batch_size,
                         cfg.epochs, cfg.s0)

    results: list[WorkerResult | None] = [None] * book.k
    errors: list[BaseException] = []

    def worker(p: int) -> None:
        client = StoreClient(book.owner, make_transports(), g.feat_dim)
        try:
            results[p] = _run_worker(p, g, book, plan, shards[p], client, cfg)
        except BaseException as exc:
            errors.append(exc)
        finally:
            client.close()

    threads = [threading.Thread(target=worker, args=(p,)) for p in range(book.k)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for srv in servers:
        srv.close()
    if errors:
        raise errors[0]

    out = [r for r in results if r is not None]
    if cfg.metrics_out:
        for r in out:
            write_metrics(r.records, worker_metrics_path(cfg.metrics_out, r.part))
    return out


def worker_metrics_path(path: str, part: int) -> str:
    """Insert the worker id before the extension: out.csv -> out.w0.csv."""
    if "." in path.rsplit("/", 1)[-1]:
        stem, ext = path.rsplit(".", 1)
        return f"{stem}.w{part}.{ext}"
    return f"{path}.w{part}"
