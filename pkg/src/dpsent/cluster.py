"""In-process master/worker cluster for data-parallel logistic regression.

Workers are tasks on a thread pool (numpy releases the GIL inside its
kernels) and, for embedding, processes. The network between them is a
star centred on the master: every transfer is a :class:`TransferRecord`
lasting ``latency + 8 * bytes / bandwidth``, and the master handles its
transfers one after another, so a synchronization round over k workers
costs k times one exchange.

In synchronous mode each global step takes the next ``batch_size``
examples of the shared epoch order, hands worker i the i-th contiguous
slice, waits for every gradient, merges them by example count in worker
order and applies one SGD step on the master. With zero initialization
this reproduces :func:`dpsent.model.train_single` up to rounding.
"""

from __future__ import annotations

import csv
import enum
import multiprocessing
import os
import threading
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import phases as ph
from .errors import ContractError
from .ingest import Document, EmbedderConfig, embed, preprocess
from .model import (
    Dataset,
    GradientVector,
    Hyperparams,
    Metrics,
    ModelParams,
    confusion_counts,
    epoch_order,
    gradient_from_probs,
    predict_proba,
    sgd_step,
    split,
)
from .phases import ComputeModel, PhaseReport, TransferPhase, TransferRecord

__all__ = [
    "SyncMode",
    "ClusterConfig",
    "NetworkModel",
    "Partition",
    "partition",
    "distribution_transfers",
    "worker_gradient",
    "aggregate",
    "simulate_transfer",
    "train_distributed",
    "transfers_to_csv",
    "MASTER",
    "COUNT_BYTES",
]

MASTER = "master"
# confusion counts travel as four 64-bit integers
COUNT_BYTES = 8 * 4
# wall-clock of the distributed training loop, master updates excluded
TRAIN = "train"


class SyncMode(str, enum.Enum):
    SYNCHRONOUS = "synchronous"
    LOCAL_EPOCHS = "local_epochs"


@dataclass(frozen=True)
class ClusterConfig:
    worker_count: int = 4
    cores_per_worker: int = 4
    ram_gb_per_worker: float = 8.0
    master_cores: int = 8
    master_ram_gb: float = 16.0
    sync_mode: SyncMode = SyncMode.SYNCHRONOUS
    embed_in_processes: bool = True

    def __post_init__(self):
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        if min(self.cores_per_worker, self.master_cores) < 1:
            raise ValueError("core counts must be positive")
        if min(self.ram_gb_per_worker, self.master_ram_gb) <= 0:
            raise ValueError("RAM sizes must be positive")
        object.__setattr__(self, "sync_mode", SyncMode(self.sync_mode))


@dataclass(frozen=True)
class NetworkModel:
    """Star topology link parameters.

    ``record_bytes`` is the size of one distributed training record; left
    as ``None`` it means one embedded example, ``float_bytes * (d + 1)``.
    """

    link_bandwidth_gbps: float = 10.0
    link_latency_us: float = 50.0
    record_bytes: int | None = None
    float_bytes: int = 8
    topology: str = "star"

    def __post_init__(self):
        if not self.link_bandwidth_gbps > 0:
            raise ValueError("link bandwidth must be positive")
        if self.link_latency_us < 0:
            raise ValueError("link latency must be nonnegative")
        if self.record_bytes is not None and self.record_bytes < 1:
            raise ValueError("record_bytes must be positive")
        if self.float_bytes < 1:
            raise ValueError("float_bytes must be positive")
        if self.topology != "star":
            raise ValueError(f"unsupported topology {self.topology!r}")

    def record_size(self, dim: int) -> int:
        return self.record_bytes if self.record_bytes is not None else self.float_bytes * (dim + 1)

    def param_bytes(self, dim: int) -> int:
        return self.float_bytes * (dim + 1)


def simulate_transfer(nbytes: int, net: NetworkModel) -> float:
    if nbytes < 0:
        raise ContractError("byte count must be nonnegative")
    return net.link_latency_us * 1e-6 + 8.0 * nbytes / (net.link_bandwidth_gbps * 1e9)


def _record(phase: TransferPhase, src: str, dst: str, nbytes: int, net: NetworkModel):
    return TransferRecord(phase, src, dst, int(nbytes), simulate_transfer(nbytes, net))


def _worker_name(i: int) -> str:
    return f"worker{i}"


def _balanced_bounds(n: int, k: int) -> list[tuple[int, int]]:
    base, extra = divmod(n, k)
    bounds, start = [], 0
    for i in range(k):
        stop = start + base + (1 if i < extra else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


@dataclass(frozen=True)
class Partition:
    worker_id: int
    start: int
    stop: int
    examples: Dataset

    def __len__(self) -> int:
        return self.stop - self.start


def partition(train_set: Dataset, k: int) -> list[Partition]:
    """Contiguous split into k pieces whose sizes differ by at most one."""
    n = len(train_set)
    if k < 1:
        raise ContractError("k must be >= 1")
    if n == 0:
        raise ContractError("cannot partition an empty training set")
    if k > n:
        raise ContractError(f"k={k} workers exceeds {n} training examples")
    return [Partition(i, a, b, train_set[a:b]) for i, (a, b) in enumerate(_balanced_bounds(n, k))]


def distribution_transfers(parts: Sequence[Partition], net: NetworkModel, dim: int) -> list[TransferRecord]:
    rb = net.record_size(dim)
    return [
        _record(TransferPhase.DATA_DISTRIBUTION, MASTER, _worker_name(p.worker_id), len(p) * rb, net)
        for p in parts
    ]


def worker_gradient(partition_slice: Dataset, params: ModelParams, l2: float = 0.0) -> GradientVector:
    grad, _, _ = _timed_gradient(partition_slice, params, l2)
    return grad


def _timed_gradient(batch: Dataset, params: ModelParams, l2: float):
    if len(batch) == 0:
        raise ContractError("worker received an empty slice")
    if params.dim != batch.dim:
        raise ContractError(f"dimension mismatch: params have {params.dim}, slice has {batch.dim}")
    t0 = time.perf_counter()
    probs = predict_proba(params, batch.X)
    t1 = time.perf_counter()
    grad = gradient_from_probs(params, batch, probs, l2)
    return grad, t1 - t0, time.perf_counter() - t1


def aggregate(updates: Sequence[GradientVector]) -> GradientVector:
    """Example-count weighted mean, accumulated in the order given (worker id order)."""
    if not updates:
        raise ContractError("nothing to aggregate")
    d = len(updates[0].d_weights)
    total = 0
    dw = np.zeros(d)
    db = 0.0
    for u in updates:
        if len(u.d_weights) != d:
            raise ContractError(f"update dimension {len(u.d_weights)} != {d}")
        if u.example_count < 1:
            raise ContractError("update carries no examples")
        dw += u.example_count * u.d_weights
        db += u.example_count * u.d_bias
        total += u.example_count
    return GradientVector(dw / total, db / total, total)


class _TaskTracker:
    def __init__(self):
        self._lock = threading.Lock()
        self.active = 0
        self.peak = 0

    def __enter__(self):
        with self._lock:
            self.active += 1
            self.peak = max(self.peak, self.active)

    def __exit__(self, *exc):
        with self._lock:
            self.active -= 1


def _grad_task(tracker: _TaskTracker, batch: Dataset, params: ModelParams, l2: float):
    with tracker:
        return _timed_gradient(batch, params, l2)


def _local_epoch_task(tracker, part: Partition, params: ModelParams, hp: Hyperparams, epoch: int):
    with tracker:
        data = part.examples
        order = np.random.default_rng([hp.shuffle_seed, epoch, part.worker_id + 1]).permutation(len(data))
        steps = 0
        for start in range(0, len(data), hp.batch_size):
            batch = data[order[start : start + hp.batch_size]]
            grad = gradient_from_probs(params, batch, predict_proba(params, batch.X), hp.l2)
            params = sgd_step(params, grad, hp.learning_rate)
            steps += 1
        return params, steps


def _confusion_task(tracker, params: ModelParams, shard: Dataset):
    with tracker:
        if len(shard) == 0:
            return np.zeros((2, 2), dtype=np.int64)
        return confusion_counts(predict_proba(params, shard.X), shard.y)


def _embed_shard(texts: list[str], embedder: EmbedderConfig):
    t0 = time.perf_counter()
    tokens = [preprocess(t) for t in texts]
    t1 = time.perf_counter()
    X = np.zeros((len(texts), embedder.dimension))
    for i, toks in enumerate(tokens):
        X[i] = embed(toks, embedder)
    return X, t1 - t0, time.perf_counter() - t1


def _embed_distributed(
    docs: Sequence[Document], embedder: EmbedderConfig, cc: ClusterConfig,
    report: PhaseReport, compute: ComputeModel,
) -> Dataset:
    k = cc.worker_count
    n = len(docs)
    bounds = _balanced_bounds(n, k)
    shards = [[doc.raw_text for doc in docs[a:b]] for a, b in bounds]
    t0 = time.perf_counter()
    if k > 1 and cc.embed_in_processes and n > 0:
        ctx = multiprocessing.get_context("fork" if os.name == "posix" else "spawn")
        with ProcessPoolExecutor(max_workers=k, mp_context=ctx) as pool:
            results = list(pool.map(_embed_shard, shards, [embedder] * k))
    else:
        results = [_embed_shard(s, embedder) for s in shards]
    elapsed = time.perf_counter() - t0
    pre = max((r[1] for r in results), default=0.0)
    report.add_wall(ph.PREPROCESS, pre)
    report.add_wall(ph.EMBEDDING, max(elapsed - pre, 0.0))
    biggest = max(b - a for a, b in bounds)
    report.documents += n
    report.add_sim(ph.PREPROCESS, biggest * compute.c_pre)
    report.add_sim(ph.EMBEDDING, biggest * embedder.dimension * compute.c_emb)
    X = np.vstack([r[0] for r in results]) if n else np.zeros((0, embedder.dimension))
    return Dataset(X, np.array([int(doc.label) for doc in docs], dtype=np.float64))


def train_distributed(
    data: Dataset | Sequence[Document],
    hp: Hyperparams | None = None,
    cc: ClusterConfig | None = None,
    net: NetworkModel | None = None,
    embedder: EmbedderConfig | None = None,
    *,
    compute: ComputeModel | None = None,
) -> tuple[ModelParams, Metrics, PhaseReport]:
    """Data-parallel training on a simulated star cluster of ``cc.worker_count`` workers.

    Accepts the same inputs as :func:`dpsent.model.train_single`. Documents
    are preprocessed and embedded on the workers in parallel, each taking a
    contiguous shard of the corpus. Returns the master's final parameters,
    validation metrics gathered from the workers, and a
    :class:`~dpsent.phases.PhaseReport` with both wall-clock and simulated
    times plus every transfer.
    """
    hp = hp or Hyperparams()
    cc = cc or ClusterConfig()
    net = net or NetworkModel()
    compute = compute or ComputeModel()
    k = cc.worker_count
    report = PhaseReport(workers=k)

    if isinstance(data, Dataset):
        dataset = data
    else:
        dataset = _embed_distributed(data, embedder or EmbedderConfig(), cc, report, compute)
    if len(dataset) == 0:
        raise ContractError("cannot train on an empty dataset")
    train, val = split(dataset, hp.train_fraction, hp.shuffle_seed)
    parts = partition(train, k)
    d = dataset.dim
    report.train_examples = len(train)
    report.transfers.extend(distribution_transfers(parts, net, d))

    tracker = _TaskTracker()
    params = ModelParams.zeros(d)
    with ThreadPoolExecutor(max_workers=k, thread_name_prefix="worker") as pool:
        t0 = time.perf_counter()
        if cc.sync_mode is SyncMode.SYNCHRONOUS:
            params = _run_synchronous(pool, tracker, train, params, hp, k, net, compute, report)
        else:
            params = _run_local_epochs(pool, tracker, parts, params, hp, k, net, compute, report)
        # master update time is already under UPDATE; TRAIN holds the rest of the loop
        report.add_wall(TRAIN, time.perf_counter() - t0 - report.wall.get(ph.UPDATE, 0.0))

        t0 = time.perf_counter()
        shards = [val[a:b] for a, b in _balanced_bounds(len(val), k)]
        counts = [f.result() for f in [pool.submit(_confusion_task, tracker, params, s) for s in shards]]
        confusion = np.zeros((2, 2), dtype=np.int64)
        for c in counts:
            confusion += c
        metrics = Metrics.from_confusion(confusion)
        report.add_wall(ph.EVALUATE, time.perf_counter() - t0)
    report.eval_examples = len(val)
    report.add_sim(ph.EVALUATE, max(len(s) for s in shards) * d * compute.c_fwd)
    for i in range(k):
        report.transfers.append(
            _record(TransferPhase.RESULT_COLLECTION, _worker_name(i), MASTER, COUNT_BYTES, net)
        )
    report.test_messages = k
    report.peak_tasks = tracker.peak
    return params, metrics, report


def _sync_records(k: int, d: int, net: NetworkModel):
    nbytes = net.param_bytes(d)
    up = [_record(TransferPhase.MODEL_SYNCHRONIZATION, _worker_name(i), MASTER, nbytes, net) for i in range(k)]
    down = [_record(TransferPhase.MODEL_SYNCHRONIZATION, MASTER, _worker_name(i), nbytes, net) for i in range(k)]
    return up + down


def _run_synchronous(pool, tracker, train, params, hp, k, net, compute, report):
    d = train.dim
    n = len(train)
    round_records = _sync_records(k, d, net)
    sim_fwd = sim_bwd = 0.0
    wall_master = 0.0
    steps = passes = messages = 0
    for epoch in range(hp.epochs):
        order = epoch_order(n, hp.shuffle_seed, epoch)
        for start in range(0, n, hp.batch_size):
            idx = order[start : start + hp.batch_size]
            slices = [s for s in np.array_split(idx, k) if len(s)]
            futures = [pool.submit(_grad_task, tracker, train[s], params, hp.l2) for s in slices]
            results = [f.result() for f in futures]
            t0 = time.perf_counter()
            params = sgd_step(params, aggregate([r[0] for r in results]), hp.learning_rate)
            wall_master += time.perf_counter() - t0
            widest = max(len(s) for s in slices)
            sim_fwd += widest * d * compute.c_fwd
            sim_bwd += widest * d * compute.c_bwd
            report.transfers.extend(round_records)
            messages += k * len(idx)
            passes += len(idx)
            steps += 1
    report.add_wall(ph.UPDATE, wall_master)
    report.add_sim(ph.FORWARD, sim_fwd)
    report.add_sim(ph.BACKWARD, sim_bwd)
    report.add_sim(ph.UPDATE, steps * k * d * compute.c_upd)
    report.steps = report.sync_rounds = steps
    report.example_passes = passes
    report.sync_messages = messages
    return params


def _run_local_epochs(pool, tracker, parts, params, hp, k, net, compute, report):
    d = parts[0].examples.dim
    n = sum(len(p) for p in parts)
    round_records = _sync_records(k, d, net)
    sim_fwd = sim_bwd = sim_upd = 0.0
    for epoch in range(hp.epochs):
        futures = [pool.submit(_local_epoch_task, tracker, p, params, hp, epoch) for p in parts]
        results = [f.result() for f in futures]
        w = np.zeros(d)
        b = 0.0
        for p, (local, _) in zip(parts, results):
            w += len(p) * local.weights
            b += len(p) * local.bias
        params = ModelParams(w / n, b / n)
        widest = max(len(p) for p in parts)
        sim_fwd += widest * d * compute.c_fwd
        sim_bwd += widest * d * compute.c_bwd
        sim_upd += (max(s for _, s in results) + k) * d * compute.c_upd
        report.transfers.extend(round_records)
        report.steps += max(s for _, s in results)
        report.example_passes += n
        report.sync_messages += k * n
        report.sync_rounds += 1
    report.add_sim(ph.FORWARD, sim_fwd)
    report.add_sim(ph.BACKWARD, sim_bwd)
    report.add_sim(ph.UPDATE, sim_upd)
    return params


def transfers_to_csv(records: Sequence[TransferRecord], path) -> None:
    """Write ``phase,source,dest,bytes,sim_seconds`` rows, one per transfer."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["phase", "source", "dest", "bytes", "sim_seconds"])
        for r in records:
            writer.writerow([r.phase.value, r.source, r.dest, r.bytes, repr(r.sim_seconds)])
