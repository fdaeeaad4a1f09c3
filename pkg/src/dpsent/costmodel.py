"""Parametric time model of single-node and distributed training and testing.

Each asymptotic term becomes ``unit cost * operation count`` with a constant
factor of one:

=============  ======================  ==========================
term           single node             distributed (k workers)
=============  ======================  ==========================
preprocess     c_pre * n               / k
embedding      c_emb * n * d           / k
forward        c_fwd * d * B * I       / k
backward       c_bwd * d * B * I       / k
update         c_upd * d * I           / k
distribution   0                       c_dist * n / k
sync           0                       c_net * k * log2(k) * I
=============  ======================  ==========================

``B * I / n`` is the number of epochs, so the forward term is
``c_fwd * n * d * epochs``. The simulator's flat star costs
``c_net * k * I`` for synchronization; estimates carry that figure in
``sync_flat_star`` next to the ``k log k`` term so the two can be compared.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from . import phases as ph
from .errors import CalibrationError
from .phases import ComputeModel, PhaseReport, TransferPhase

__all__ = [
    "CostInputs",
    "CostEstimate",
    "estimate_train_single",
    "estimate_train_distributed",
    "estimate_test",
    "comm_overhead",
    "calibrate",
    "inputs_for_run",
    "speedup_curve",
]


@dataclass(frozen=True)
class CostInputs:
    n: int
    d: int
    k: int = 1
    B: int = 32
    I: int = 1
    c_pre: float = 0.0
    c_emb: float = 0.0
    c_fwd: float = 0.0
    c_bwd: float = 0.0
    c_upd: float = 0.0
    c_net: float = 0.0
    c_dist: float = 0.0

    def __post_init__(self):
        for name, v in asdict(self).items():
            if v < 0:
                raise ValueError(f"{name} must be nonnegative, got {v}")
        for name in ("n", "d", "k", "B"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def with_workers(self, k: int) -> "CostInputs":
        return replace(self, k=k)

    def compute_model(self) -> ComputeModel:
        return ComputeModel(self.c_pre, self.c_emb, self.c_fwd, self.c_bwd, self.c_upd)


@dataclass(frozen=True)
class CostEstimate:
    """Predicted seconds per term.

    ``total`` is the sum of preprocess, embedding, forward, backward,
    update, distribution and sync. ``node_train`` is the sum of the five
    compute terms and ``distribution_total`` the undivided transfer of all
    n records; both are reported for reading, not added again.
    """

    preprocess: float
    embedding: float
    forward: float
    backward: float
    update: float
    distribution: float
    sync: float
    node_train: float
    distribution_total: float
    sync_flat_star: float
    total: float
    predicted_speedup: float
    workers: int

    def as_dict(self) -> dict:
        return asdict(self)


def _log2(k: int) -> float:
    return 0.0 if k <= 1 else math.log2(k)


def _single_terms(ci: CostInputs) -> dict[str, float]:
    return {
        "preprocess": ci.c_pre * ci.n,
        "embedding": ci.c_emb * ci.n * ci.d,
        "forward": ci.c_fwd * ci.d * ci.B * ci.I,
        "backward": ci.c_bwd * ci.d * ci.B * ci.I,
        "update": ci.c_upd * ci.d * ci.I,
    }


def _estimate(terms: dict[str, float], *, distribution: float = 0.0, sync: float = 0.0,
              distribution_total: float = 0.0, sync_flat_star: float = 0.0,
              workers: int = 1) -> CostEstimate:
    total = (
        terms["preprocess"] + terms["embedding"] + terms["forward"]
        + terms["backward"] + terms["update"] + distribution + sync
    )
    return CostEstimate(
        **terms,
        distribution=distribution,
        sync=sync,
        node_train=sum(terms.values()),
        distribution_total=distribution_total,
        sync_flat_star=sync_flat_star,
        total=total,
        predicted_speedup=1.0,
        workers=workers,
    )


def _speedup(baseline: float, est: CostEstimate) -> CostEstimate:
    return replace(est, predicted_speedup=baseline / est.total if est.total > 0 else 1.0)


def estimate_train_single(ci: CostInputs) -> CostEstimate:
    return _estimate(_single_terms(ci))


def estimate_train_distributed(ci: CostInputs) -> CostEstimate:
    single = estimate_train_single(ci)
    est = _estimate(
        {name: t / ci.k for name, t in _single_terms(ci).items()},
        distribution=ci.c_dist * ci.n / ci.k,
        sync=ci.c_net * ci.k * _log2(ci.k) * ci.I,
        distribution_total=ci.c_dist * ci.n,
        sync_flat_star=ci.c_net * ci.k * ci.I,
        workers=ci.k,
    )
    return _speedup(single.total, est)


def estimate_test(ci: CostInputs, distributed: bool = False) -> CostEstimate:
    """Forward-only inference cost; never has a synchronization term."""
    terms = {
        "preprocess": ci.c_pre * ci.n,
        "embedding": ci.c_emb * ci.n * ci.d,
        "forward": ci.c_fwd * ci.n * ci.d,
        "backward": 0.0,
        "update": 0.0,
    }
    if not distributed:
        return _estimate(terms)
    est = _estimate(
        {name: t / ci.k for name, t in terms.items()},
        distribution=ci.c_dist * ci.n / ci.k,
        distribution_total=ci.c_dist * ci.n,
        workers=ci.k,
    )
    return _speedup(sum(terms.values()), est)


def comm_overhead(ci: CostInputs, phase: str) -> int:
    """Synchronization message units: ``k*B*I`` when training, ``k`` when testing."""
    if phase.lower() == "train":
        return ci.k * ci.B * ci.I
    if phase.lower() == "test":
        return ci.k
    raise ValueError(f"phase must be 'train' or 'test', got {phase!r}")


def _per_op(time_s: float, count: float, what: str) -> float:
    if count == 0:
        if time_s > 0:
            raise CalibrationError(f"{what}: {time_s:g} s measured against zero operations")
        return 0.0
    return time_s / count


def calibrate(measured: PhaseReport, ci_shape: CostInputs, clock: str = "simulated") -> CostInputs:
    """Fill the unit costs of ``ci_shape`` from a measured run.

    Each compute constant is the phase time divided by that term's operation
    count under ``ci_shape``. ``c_dist`` is distribution seconds per record
    and ``c_net`` is synchronization seconds per worker exchange, i.e.
    divided by ``workers * I`` of the measured run, which keeps a k=1 run
    usable even though ``k log k`` vanishes there.

    ``clock`` selects the virtual clock (``"simulated"``) or measured
    wall-clock (``"wall"``, which needs per-phase training timings as
    produced by the single-node trainer).
    """
    if clock == "simulated":
        times = measured.simulated
    elif clock == "wall":
        times = measured.wall
        if measured.steps and ph.FORWARD not in times:
            raise CalibrationError("wall-clock calibration needs forward/backward/update timings")
    else:
        raise ValueError(f"unknown clock {clock!r}")
    ci = ci_shape
    net = measured.network_seconds
    return replace(
        ci,
        c_pre=_per_op(times.get(ph.PREPROCESS, 0.0), ci.n, "preprocess"),
        c_emb=_per_op(times.get(ph.EMBEDDING, 0.0), ci.n * ci.d, "embedding"),
        c_fwd=_per_op(times.get(ph.FORWARD, 0.0), ci.d * ci.B * ci.I, "forward"),
        c_bwd=_per_op(times.get(ph.BACKWARD, 0.0), ci.d * ci.B * ci.I, "backward"),
        c_upd=_per_op(times.get(ph.UPDATE, 0.0), ci.d * ci.I, "update"),
        c_dist=_per_op(net.get(TransferPhase.DATA_DISTRIBUTION.value, 0.0), ci.n, "distribution"),
        c_net=_per_op(
            net.get(TransferPhase.MODEL_SYNCHRONIZATION.value, 0.0),
            measured.workers * ci.I,
            "sync",
        ),
    )


def inputs_for_run(report: PhaseReport, dim: int, batch_size: int, k: int | None = None) -> CostInputs:
    """Shape (n, d, k, B, I) of a finished run, with zero unit costs."""
    return CostInputs(
        n=max(report.documents, report.train_examples, 1),
        d=dim,
        k=k if k is not None else report.workers,
        B=batch_size,
        I=report.sync_rounds or report.steps,
    )


def speedup_curve(ci: CostInputs, ks) -> list[tuple[int, float, float]]:
    """``(k, predicted total seconds, predicted speedup)`` for each k."""
    out = []
    for k in ks:
        est = estimate_train_distributed(ci.with_workers(k))
        out.append((k, est.total, est.predicted_speedup))
    return out
