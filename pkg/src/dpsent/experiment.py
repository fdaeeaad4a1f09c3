"""Experiment configuration and the single / distributed / both / cost-only pipeline.

Config files are INI style: ``[section]`` headers and ``key = value``
lines. Every section and key is optional; see ``DEFAULT_CONFIG_TEXT``.
"""

from __future__ import annotations

import configparser
import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import costmodel
from .cluster import ClusterConfig, NetworkModel, SyncMode, simulate_transfer, train_distributed
from .errors import ContractError
from .ingest import CsvSchema, EmbedderConfig, EmbeddingFormatError, Label, ReadStats, read_csv
from .model import Hyperparams, train_single
from .phases import ComputeModel, PhaseReport
from .report import (
    RunReport,
    bandwidth_table,
    canonical_json,
    compare,
    fingerprint,
    render_bandwidth,
    render_comparison,
)
from .synthetic import bundled_corpus_path

log = logging.getLogger(__name__)

MODES = ("single", "distributed", "both", "cost-only")

DEFAULT_CONFIG_TEXT = """\
[data]
# input = path/to/training.csv   (default: bundled synthetic corpus)
encoding = utf-8
label_column = 0
text_column = 5
# subsample = 20000

[embedder]
dimension = 256
ngram_orders = 1,2
hash_seed = 0

[train]
learning_rate = 0.01
batch_size = 32
epochs = 10
train_fraction = 0.7
l2 = 0
shuffle_seed = 0

[cluster]
workers = 4
cores_per_worker = 4
ram_gb_per_worker = 8
master_cores = 8
master_ram_gb = 16
sync_mode = synchronous

[network]
bandwidth_gbps = 10
latency_us = 50
float_bytes = 8
# record_bytes = 2056

[compute]
# virtual-clock unit costs, seconds per operation
# c_pre = 6e-6

[cost]
# problem shape for --mode cost-only
# n = 1600000
# d = 768
# k = 4
# batch_size = 32
# epochs = 10

[output]
dir = results
"""


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line else ""
        super().__init__(where + message)


class DataError(RuntimeError):
    pass


@dataclass(frozen=True)
class CostShape:
    n: int | None = None
    d: int | None = None
    k: int | None = None
    batch_size: int | None = None
    epochs: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    input: Path | None = None
    schema: CsvSchema = field(default_factory=CsvSchema)
    subsample: int | None = None
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    hp: Hyperparams = field(default_factory=Hyperparams)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    network: NetworkModel = field(default_factory=NetworkModel)
    compute: ComputeModel = field(default_factory=ComputeModel)
    cost: CostShape = field(default_factory=CostShape)
    out_dir: Path = Path("results")

    @property
    def input_path(self) -> Path:
        return self.input if self.input is not None else bundled_corpus_path()

    def fingerprint_dict(self) -> dict:
        """Everything that determines the reproducible outputs, as plain data."""
        return {
            "input": str(self.input) if self.input is not None else "bundled:synthetic_20k",
            "schema": {
                "label_column": self.schema.label_column,
                "text_column": self.schema.text_column,
                "delimiter": self.schema.delimiter,
                "encoding": self.schema.encoding,
            },
            "subsample": self.subsample,
            "embedder": {**asdict(self.embedder), "ngram_orders": list(self.embedder.ngram_orders)},
            "train": asdict(self.hp),
            "cluster": {**asdict(self.cluster), "sync_mode": self.cluster.sync_mode.value},
            "network": asdict(self.network),
            "compute": asdict(self.compute),
        }


_SCHEMA = {
    "data": {"input": str, "encoding": str, "label_column": int, "text_column": int,
             "delimiter": str, "subsample": int},
    "embedder": {"dimension": int, "ngram_orders": str, "hash_seed": int},
    "train": {"learning_rate": float, "batch_size": int, "epochs": int, "train_fraction": float,
              "l2": float, "shuffle_seed": int},
    "cluster": {"workers": int, "cores_per_worker": int, "ram_gb_per_worker": float,
                "master_cores": int, "master_ram_gb": float, "sync_mode": str},
    "network": {"bandwidth_gbps": float, "latency_us": float, "float_bytes": int, "record_bytes": int},
    "compute": {"c_pre": float, "c_emb": float, "c_fwd": float, "c_bwd": float, "c_upd": float},
    "cost": {"n": float, "d": int, "k": int, "batch_size": int, "epochs": int},
    "output": {"dir": str},
}


def _find_line(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section and "=" in line:
            if line.split("=", 1)[0].strip().lower() == key:
                return no
    return None


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse INI text into an :class:`ExperimentConfig`; errors carry a line number."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("cannot parse line", line) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc).split(":")[-1].strip(), getattr(exc, "lineno", None)) from None

    values: dict[str, dict] = {}
    for section in parser.sections():
        sec = section.lower()
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", _find_line(text, sec))
        values[sec] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", _find_line(text, sec, key))
            conv = _SCHEMA[sec][key]
            try:
                values[sec][key] = conv(raw.strip())
            except ValueError:
                raise ConfigError(
                    f"[{sec}] {key} = {raw!r} is not a valid {conv.__name__}", _find_line(text, sec, key)
                ) from None

    def get(sec, key, default=None):
        return values.get(sec, {}).get(key, default)

    def build(sec, key, fn):
        try:
            return fn()
        except ValueError as exc:
            msg = str(exc)
            if key is None:
                # point at the key the message is about, by name or by value
                for k, v in values.get(sec, {}).items():
                    if k in msg or repr(v) in msg or str(v) in msg.split():
                        key = k
                        break
            raise ConfigError(msg, _find_line(text, sec, key) or _find_line(text, sec)) from None

    inp = get("data", "input")
    if inp is not None:
        inp = Path(inp)
        if base_dir is not None and not inp.is_absolute():
            inp = base_dir / inp
    schema = CsvSchema(
        label_column=get("data", "label_column", 0),
        text_column=get("data", "text_column", 5),
        delimiter=get("data", "delimiter", ","),
        encoding=get("data", "encoding", "utf-8"),
    )
    orders_raw = get("embedder", "ngram_orders", "1,2")
    try:
        orders = tuple(int(o) for o in orders_raw.split(",") if o.strip())
    except ValueError:
        raise ConfigError(f"ngram_orders {orders_raw!r} is not a comma list of integers",
                          _find_line(text, "embedder", "ngram_orders")) from None
    embedder = build("embedder", "dimension", lambda: EmbedderConfig(
        dimension=get("embedder", "dimension", 256), ngram_orders=orders,
        hash_seed=get("embedder", "hash_seed", 0)))
    hp = build("train", None, lambda: Hyperparams(**values.get("train", {})))
    cl = values.get("cluster", {})
    cluster = build("cluster", None, lambda: ClusterConfig(
        worker_count=cl.get("workers", 4),
        cores_per_worker=cl.get("cores_per_worker", 4),
        ram_gb_per_worker=cl.get("ram_gb_per_worker", 8.0),
        master_cores=cl.get("master_cores", 8),
        master_ram_gb=cl.get("master_ram_gb", 16.0),
        sync_mode=SyncMode(cl.get("sync_mode", "synchronous").lower()),
    ))
    nw = values.get("network", {})
    network = build("network", None, lambda: NetworkModel(
        link_bandwidth_gbps=nw.get("bandwidth_gbps", 10.0),
        link_latency_us=nw.get("latency_us", 50.0),
        record_bytes=nw.get("record_bytes"),
        float_bytes=nw.get("float_bytes", 8),
    ))
    compute = build("compute", None, lambda: ComputeModel(**values.get("compute", {})))
    cs = values.get("cost", {})
    cost = CostShape(
        n=int(cs["n"]) if "n" in cs else None, d=cs.get("d"), k=cs.get("k"),
        batch_size=cs.get("batch_size"), epochs=cs.get("epochs"),
    )
    subsample = get("data", "subsample")
    if subsample is not None and subsample < 1:
        raise ConfigError("subsample must be positive", _find_line(text, "data", "subsample"))
    return ExperimentConfig(
        input=inp, schema=schema, subsample=subsample, embedder=embedder, hp=hp,
        cluster=cluster, network=network, compute=compute, cost=cost,
        out_dir=Path(get("output", "dir", "results")),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base_dir=path.parent)


def load_documents(cfg: ExperimentConfig):
    path = cfg.input_path
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    stats = ReadStats()
    try:
        docs = list(read_csv(path, cfg.schema, stats))
    except (OSError, UnicodeError, LookupError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    log.info("read %s: %d retained, %d neutral dropped, %d malformed",
             path, stats.retained, stats.dropped_neutral, stats.malformed)
    if not docs:
        raise DataError(f"{path}: no labeled rows")
    if cfg.subsample is not None:
        if cfg.subsample > len(docs):
            raise DataError(f"subsample {cfg.subsample} exceeds {len(docs)} available documents")
        keep = np.sort(np.random.default_rng(cfg.hp.shuffle_seed).permutation(len(docs))[: cfg.subsample])
        docs = [docs[i] for i in keep]
    return docs, stats


def network_unit_costs(net: NetworkModel, dim: int) -> tuple[float, float]:
    """(c_net, c_dist): seconds per worker sync exchange and per distributed record."""
    c_net = 2 * simulate_transfer(net.param_bytes(dim), net)
    c_dist = 8.0 * net.record_size(dim) / (net.link_bandwidth_gbps * 1e9)
    return c_net, c_dist


def _cost_shape_from_config(cfg: ExperimentConfig, n_docs: int | None) -> costmodel.CostInputs:
    n = cfg.cost.n or n_docs
    if n is None:
        raise ConfigError("cost-only mode needs [cost] n")
    d = cfg.cost.d or cfg.embedder.dimension
    k = cfg.cost.k or cfg.cluster.worker_count
    B = cfg.cost.batch_size or cfg.hp.batch_size
    epochs = cfg.cost.epochs if cfg.cost.epochs is not None else cfg.hp.epochs
    n_train = math.ceil(round(cfg.hp.train_fraction * n, 9))
    I = max(1, math.ceil(n_train / B) * epochs)
    c_net, c_dist = network_unit_costs(cfg.network, d)
    cm = cfg.compute
    return costmodel.CostInputs(n=n, d=d, k=k, B=B, I=I, c_pre=cm.c_pre, c_emb=cm.c_emb,
                                c_fwd=cm.c_fwd, c_bwd=cm.c_bwd, c_upd=cm.c_upd,
                                c_net=c_net, c_dist=c_dist)


def cost_report(ci: costmodel.CostInputs, max_k: int = 64) -> dict:
    single = costmodel.estimate_train_single(ci)
    dist = costmodel.estimate_train_distributed(ci)
    return {
        "kind": "cost",
        "inputs": asdict(ci),
        "train_single": single.as_dict(),
        "train_distributed": dist.as_dict(),
        "test_single": costmodel.estimate_test(ci).as_dict(),
        "test_distributed": costmodel.estimate_test(ci, distributed=True).as_dict(),
        "comm_overhead": {
            "train": costmodel.comm_overhead(ci, "train"),
            "test": costmodel.comm_overhead(ci, "test"),
        },
        "speedup_curve": [
            {"k": k, "total": t, "speedup": s}
            for k, t, s in costmodel.speedup_curve(ci, range(1, max_k + 1))
        ],
    }


@dataclass
class RunOutputs:
    files: dict[str, str] = field(default_factory=dict)
    texts: dict[str, str] = field(default_factory=dict)
    reports: dict[str, object] = field(default_factory=dict)


def _calibrated_prediction(single_report: PhaseReport, cfg: ExperimentConfig, dist_report: PhaseReport | None):
    shape = costmodel.inputs_for_run(single_report, cfg.embedder.dimension, cfg.hp.batch_size)
    ci = costmodel.calibrate(single_report, shape)
    c_net, c_dist = network_unit_costs(cfg.network, cfg.embedder.dimension)
    ci = replace(ci, c_net=c_net, c_dist=c_dist)
    out = cost_report(ci.with_workers(cfg.cluster.worker_count))
    out["calibrated_from"] = "single"
    if dist_report is not None:
        pred = out["train_distributed"]["total"]
        sim = dist_report.simulated_train
        out["validation"] = {
            "predicted_train_seconds": pred,
            "simulated_train_seconds": sim,
            "relative_error": (pred - sim) / sim if sim else 0.0,
            "sync_klogk_seconds": out["train_distributed"]["sync"],
            "sync_flat_star_seconds": out["train_distributed"]["sync_flat_star"],
            "simulated_sync_seconds": dist_report.network_seconds.get("ModelSynchronization", 0.0),
        }
    return out


def run(cfg: ExperimentConfig, mode: str = "both", write: bool = True) -> RunOutputs:
    """Execute one experiment and (unless ``write`` is false) write its files.

    Every file is produced only after all computation has succeeded, so a
    failure leaves the output directory untouched.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    out = RunOutputs()
    fp = fingerprint(cfg.fingerprint_dict())
    payloads: dict[str, object] = {}

    if mode == "cost-only":
        ci = _cost_shape_from_config(cfg, None)
        payloads["cost.json"] = cost_report(ci)
    else:
        docs, stats = load_documents(cfg)
        timings = {"read": asdict(stats)}
        single_phases = dist_phases = None
        if mode in ("single", "both"):
            params, metrics, single_phases = train_single(docs, cfg.hp, cfg.embedder, compute=cfg.compute)
            rep = RunReport.from_run("single", params, metrics, single_phases, fp)
            payloads["single.json"] = rep
            out.reports["single"] = rep
            timings["single"] = {"wall_seconds": single_phases.wall, "peak_tasks": single_phases.peak_tasks}
        if mode in ("distributed", "both"):
            params, metrics, dist_phases = train_distributed(
                docs, cfg.hp, cfg.cluster, cfg.network, cfg.embedder, compute=cfg.compute)
            rep = RunReport.from_run("distributed", params, metrics, dist_phases, fp)
            payloads["distributed.json"] = rep
            out.reports["distributed"] = rep
            out.texts["bandwidth"] = render_bandwidth(bandwidth_table(dist_phases.transfers))
            timings["distributed"] = {"wall_seconds": dist_phases.wall, "peak_tasks": dist_phases.peak_tasks}
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["phase", "source", "dest", "bytes", "sim_seconds"])
            for r in dist_phases.transfers:
                w.writerow([r.phase.value, r.source, r.dest, r.bytes, repr(r.sim_seconds)])
            payloads["transfers.csv"] = buf.getvalue()
        if mode == "both":
            comp = compare(out.reports["single"], out.reports["distributed"])
            payloads["comparison.json"] = comp
            out.reports["comparison"] = comp
            out.texts["comparison"] = render_comparison(comp)
            payloads["cost.json"] = _calibrated_prediction(single_phases, cfg, dist_phases)
        payloads["timings.json"] = timings

    for name, payload in payloads.items():
        if isinstance(payload, str):
            text = payload
        elif isinstance(payload, dict):
            text = canonical_json(payload)
        else:
            text = canonical_json(payload.to_dict())
        out.texts.setdefault(name, text)
    if write:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        for name in payloads:
            path = cfg.out_dir / name
            path.write_text(out.texts[name], encoding="utf-8")
            out.files[name] = str(path)
    return out


SWEEP_HEADER = ["k", "wall_seconds", "sim_seconds", "predicted_seconds", "accuracy"]


def sweep(cfg: ExperimentConfig, k_values, write: bool = True) -> list[dict]:
    """Distributed runs over several worker counts, one CSV row each.

    ``wall_seconds`` is the measured embed+train+evaluate wall-clock,
    ``sim_seconds`` the run's simulated total and ``predicted_seconds`` the
    cost model calibrated on the k=1 run (performed extra if 1 is not listed).
    """
    ks = [int(k) for k in k_values]
    if not ks or min(ks) < 1:
        raise ContractError("k values must be a nonempty list of integers >= 1")
    docs, _ = load_documents(cfg)
    results = {}
    for k in sorted(set(ks) | {1}):
        cc = replace(cfg.cluster, worker_count=k)
        _, metrics, phases = train_distributed(docs, cfg.hp, cc, cfg.network, cfg.embedder, compute=cfg.compute)
        results[k] = (metrics, phases)
    base = results[1][1]
    shape = costmodel.inputs_for_run(base, cfg.embedder.dimension, cfg.hp.batch_size)
    ci = costmodel.calibrate(base, shape)
    rows = []
    for k in ks:
        metrics, phases = results[k]
        pred = costmodel.estimate_train_distributed(ci.with_workers(k)).total
        pred += ci.c_fwd * phases.eval_examples * ci.d / k
        rows.append({
            "k": k,
            "wall_seconds": phases.wall_total,
            "sim_seconds": phases.simulated_total,
            "predicted_seconds": pred,
            "accuracy": metrics.accuracy,
        })
    if write:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        with open(cfg.out_dir / "sweep.csv", "w", newline="", encoding="ascii") as fh:
            w = csv.DictWriter(fh, SWEEP_HEADER, lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({key: (repr(v) if isinstance(v, float) else v) for key, v in row.items()})
    return rows


__all__ = [
    "ConfigError", "DataError", "ExperimentConfig", "CostShape", "DEFAULT_CONFIG_TEXT", "MODES",
    "parse_config", "load_config", "load_documents", "network_unit_costs", "cost_report",
    "run", "sweep", "RunOutputs", "EmbeddingFormatError", "Label",
]
