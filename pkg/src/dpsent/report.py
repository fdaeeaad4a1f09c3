"""Run reports, single-vs-distributed comparison tables and canonical JSON files."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .costmodel import CostEstimate
from .errors import ContractError, ReportError
from .model import Metrics, ModelParams
from .phases import TRANSFER_PHASES, PhaseReport, TransferRecord

__all__ = [
    "RunReport",
    "ComparisonRow",
    "Comparison",
    "BandwidthRow",
    "REFERENCE_RESULTS",
    "compare",
    "bandwidth_table",
    "render_comparison",
    "render_bandwidth",
    "canonical_json",
    "write_report",
    "read_report",
    "fingerprint",
    "params_digest",
]

# Four-worker cluster against one node, 1.6M tweets with contextual embeddings.
REFERENCE_RESULTS = {
    "single": {"processing_seconds": 179.0, "accuracy": 0.852},
    "distributed": {"processing_seconds": 46.0, "accuracy": 0.881, "workers": 4},
    "stated_improvement_pct": {"processing_time": 75.0, "accuracy": 3.5},
}


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ReportError(f"non-finite value {x!r} cannot be written as JSON")
    s = format(x, ".17g")
    if not any(c in s for c in ".e"):
        s += ".0"
    return s


def canonical_json(obj: Any) -> str:
    """Sorted keys, two-space indent, floats at 17 significant digits, trailing newline."""
    return _dump(obj, 0) + "\n"


def _dump(obj: Any, level: int) -> str:
    pad = "  " * (level + 1)
    end = "  " * level
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(obj[k], level + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + _dump(v, level + 1) for v in obj) + "\n" + end + "]"
    raise ReportError(f"cannot serialize {type(obj).__name__}")


def fingerprint(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def params_digest(params: ModelParams) -> str:
    return hashlib.sha256(params.as_vector().astype("<f8").tobytes()).hexdigest()


@dataclass(frozen=True)
class BandwidthRow:
    phase: str
    transfers: int
    bytes: int
    sim_seconds: float
    avg_gbps: float | None
    peak_gbps: float | None


def bandwidth_table(records: Sequence[TransferRecord]) -> list[BandwidthRow]:
    """Average and peak link rate per phase, in the fixed phase order.

    Average is total bits over total simulated seconds; peak is the largest
    single-transfer rate. Zero-duration transfers count toward bytes but not
    toward the peak. Phases without transfers are left out.
    """
    if not records:
        raise ContractError("bandwidth table needs at least one transfer record")
    rows = []
    for phase in TRANSFER_PHASES:
        recs = [r for r in records if r.phase == phase]
        if not recs:
            continue
        nbytes = sum(r.bytes for r in recs)
        secs = sum(r.sim_seconds for r in recs)
        rates = [8 * r.bytes / r.sim_seconds / 1e9 for r in recs if r.sim_seconds > 0]
        rows.append(BandwidthRow(
            phase=phase.value,
            transfers=len(recs),
            bytes=nbytes,
            sim_seconds=secs,
            avg_gbps=8 * nbytes / secs / 1e9 if secs > 0 else None,
            peak_gbps=max(rates) if rates else None,
        ))
    return rows


@dataclass
class RunReport:
    """Deterministic summary of one training run.

    ``measured`` holds wall-clock timings and peak task concurrency; it is
    the only part that differs between identical runs and is left empty in
    reproducible report files.
    """

    mode: str
    workers: int
    metrics: Metrics | None
    processing_seconds: float | None
    phases: dict = field(default_factory=dict)
    bandwidth: list = field(default_factory=list)
    cost_prediction: dict | None = None
    fingerprint: str = ""
    params_digest: str = ""
    measured: dict | None = None

    @classmethod
    def from_run(
        cls,
        mode: str,
        params: ModelParams,
        metrics: Metrics,
        phases: PhaseReport,
        config_fingerprint: str = "",
        cost: CostEstimate | None = None,
        include_measured: bool = False,
    ) -> "RunReport":
        summary = {
            "simulated_seconds": dict(phases.simulated),
            "network_seconds": phases.network_seconds,
            "bytes": phases.bytes,
            "simulated_train": phases.simulated_train,
            "simulated_test": phases.simulated_test,
            "simulated_total": phases.simulated_total,
            "documents": phases.documents,
            "train_examples": phases.train_examples,
            "eval_examples": phases.eval_examples,
            "steps": phases.steps,
            "sync_rounds": phases.sync_rounds,
            "sync_messages": phases.sync_messages,
            "test_messages": phases.test_messages,
        }
        bw = [asdict(r) for r in bandwidth_table(phases.transfers)] if phases.transfers else []
        measured = None
        if include_measured:
            measured = {"wall_seconds": dict(phases.wall), "peak_tasks": phases.peak_tasks}
        return cls(
            mode=mode,
            workers=phases.workers,
            metrics=metrics,
            processing_seconds=phases.simulated_total,
            phases=summary,
            bandwidth=bw,
            cost_prediction=cost.as_dict() if cost is not None else None,
            fingerprint=config_fingerprint,
            params_digest=params_digest(params),
            measured=measured,
        )

    @classmethod
    def from_values(cls, mode: str, processing_seconds: float, accuracy: float, workers: int = 1):
        """A bare report carrying only a processing time and an accuracy."""
        total = 1000
        correct = round(accuracy * total)
        metrics = Metrics(accuracy, correct, total, ((correct, 0), (total - correct, 0)))
        return cls(mode=mode, workers=workers, metrics=metrics, processing_seconds=processing_seconds)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = "run"
        if self.metrics is not None:
            d["metrics"]["confusion"] = [list(r) for r in self.metrics.confusion]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        d = dict(d)
        d.pop("kind", None)
        m = d.get("metrics")
        if m is not None:
            d["metrics"] = Metrics(m["accuracy"], m["correct"], m["total"],
                                   tuple(tuple(r) for r in m["confusion"]))
        return cls(**d)


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    unit: str
    single: float
    distributed: float
    improvement_pct: float
    absolute_delta: float


@dataclass
class Comparison:
    rows: list[ComparisonRow]
    single_fingerprint: str = ""
    distributed_fingerprint: str = ""
    workers: int = 1

    def row(self, name: str) -> ComparisonRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = "comparison"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Comparison":
        d = dict(d)
        d.pop("kind", None)
        d["rows"] = [ComparisonRow(**r) for r in d["rows"]]
        return cls(**d)


def _require(report: RunReport, which: str):
    if report.processing_seconds is None:
        raise ReportError(f"{which} report is missing 'processing_seconds'")
    if report.metrics is None:
        raise ReportError(f"{which} report is missing 'metrics'")


def compare(single: RunReport, dist: RunReport) -> Comparison:
    """Processing time as a reduction, accuracy as a relative gain, both in percent.

    The accuracy row also records the absolute change in percentage points.
    """
    _require(single, "single")
    _require(dist, "distributed")
    ts, td = single.processing_seconds, dist.processing_seconds
    a_s, a_d = single.metrics.accuracy, dist.metrics.accuracy
    time_pct = (ts - td) / ts * 100 if ts else 0.0
    acc_pct = (a_d - a_s) / a_s * 100 if a_s else 0.0
    rows = [
        ComparisonRow("processing_time", "s", ts, td, time_pct, td - ts),
        ComparisonRow("accuracy", "fraction", a_s, a_d, acc_pct, (a_d - a_s) * 100),
    ]
    return Comparison(rows, single.fingerprint, dist.fingerprint, dist.workers)


def render_comparison(comp: Comparison) -> str:
    lines = [
        f"{'Metric':<16}{'Single node':>14}{'Distributed':>14}{'Improvement':>13}",
        "-" * 57,
    ]
    for r in comp.rows:
        if r.name == "accuracy":
            s, d = f"{r.single * 100:.2f} %", f"{r.distributed * 100:.2f} %"
            extra = f"  ({r.absolute_delta:+.2f} pp)"
            label = "Accuracy"
        else:
            s, d = f"{r.single:.2f} s", f"{r.distributed:.2f} s"
            extra = ""
            label = "Processing time" if r.name == "processing_time" else r.name
        lines.append(f"{label:<16}{s:>14}{d:>14}{r.improvement_pct:>12.2f}%{extra}")
    return "\n".join(lines) + "\n"


def render_bandwidth(rows: Sequence[BandwidthRow]) -> str:
    lines = [f"{'Phase':<24}{'Avg. BW':>14}{'Peak BW':>14}", "-" * 52]
    for r in rows:
        avg = "n/a" if r.avg_gbps is None else f"{r.avg_gbps:.3f} Gbps"
        peak = "n/a" if r.peak_gbps is None else f"{r.peak_gbps:.3f} Gbps"
        lines.append(f"{r.phase:<24}{avg:>14}{peak:>14}")
    return "\n".join(lines) + "\n"


def write_report(report: RunReport | Comparison | dict, path: str | Path) -> None:
    payload = report if isinstance(report, dict) else report.to_dict()
    Path(path).write_text(canonical_json(payload), encoding="utf-8")


def read_report(path: str | Path) -> RunReport | Comparison | dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = data.get("kind")
    if kind == "run":
        return RunReport.from_dict(data)
    if kind == "comparison":
        return Comparison.from_dict(data)
    return data
