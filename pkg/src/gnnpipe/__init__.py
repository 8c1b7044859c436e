"""Desk-scale distributed GNN training engine with deterministic
precomputed sampling, hot-node feature caching, bulk feature pulls, and
asynchronous prefetching."""

from .graph import Graph, load_graph, save_graph, synth_powerlaw
from .partition import PartitionBook, halo_expand, partition_edgecut, partition_random
from .plan import BatchPlan, FrequencyTable, collect_access, generate_plan, top_hot
from .sampler import ComputationBlock, SeedSchedule, epoch_batches, sample_block, seed_for
from .store import StoreClient, StoreShard, TransferAccount, bytes_for
from .train import MetricsRecord, RunConfig, run, write_metrics

__all__ = [
    "Graph", "load_graph", "save_graph", "synth_powerlaw",
    "PartitionBook", "halo_expand", "partition_edgecut", "partition_random",
    "BatchPlan", "FrequencyTable", "collect_access", "generate_plan", "top_hot",
    "ComputationBlock", "SeedSchedule", "epoch_batches", "sample_block", "seed_for",
    "StoreClient", "StoreShard", "TransferAccount", "bytes_for",
    "MetricsRecord", "RunConfig", "run", "write_metrics",
]
