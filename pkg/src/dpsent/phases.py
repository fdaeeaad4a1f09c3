"""Per-phase accounting shared by the single-node and cluster trainers.

Two clocks are kept side by side. ``wall`` holds measured wall-clock seconds
and varies from run to run. ``simulated`` holds seconds on a virtual clock:
compute phases are charged operation counts times the unit costs of a
:class:`ComputeModel`, network phases are the sum of their
:class:`TransferRecord` durations. The virtual clock is fully determined by
the configuration, which is what makes report files reproducible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

PREPROCESS = "preprocess"
EMBEDDING = "embedding"
FORWARD = "forward"
BACKWARD = "backward"
UPDATE = "update"
EVALUATE = "evaluate"

COMPUTE_PHASES = (PREPROCESS, EMBEDDING, FORWARD, BACKWARD, UPDATE, EVALUATE)
TRAIN_COMPUTE_PHASES = (PREPROCESS, EMBEDDING, FORWARD, BACKWARD, UPDATE)


class TransferPhase(str, enum.Enum):
    DATA_DISTRIBUTION = "DataDistribution"
    MODEL_SYNCHRONIZATION = "ModelSynchronization"
    RESULT_COLLECTION = "ResultCollection"


TRANSFER_PHASES = tuple(TransferPhase)


@dataclass(frozen=True)
class ComputeModel:
    """Virtual-clock unit costs, in seconds per elementary operation.

    ``c_pre`` is per document, ``c_emb`` per document-dimension,
    ``c_fwd``/``c_bwd`` per example-dimension and ``c_upd`` per parameter
    touched on the master (aggregating k updates touches k*d of them).
    The defaults are rounded measurements of this package's numpy code on
    a single core; :func:`dpsent.costmodel.calibrate` can produce a
    host-specific set from a measured run.
    """

    c_pre: float = 6e-6
    c_emb: float = 2.5e-7
    c_fwd: float = 1.5e-9
    c_bwd: float = 1.2e-9
    c_upd: float = 2e-8

    def __post_init__(self):
        for name in ("c_pre", "c_emb", "c_fwd", "c_bwd", "c_upd"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True, slots=True)
class TransferRecord:
    phase: TransferPhase
    source: str
    dest: str
    bytes: int
    sim_seconds: float


@dataclass
class PhaseReport:
    workers: int = 1
    wall: dict[str, float] = field(default_factory=dict)
    simulated: dict[str, float] = field(default_factory=dict)
    transfers: list[TransferRecord] = field(default_factory=list)
    documents: int = 0
    train_examples: int = 0
    eval_examples: int = 0
    example_passes: int = 0
    steps: int = 0
    sync_rounds: int = 0
    sync_messages: int = 0
    test_messages: int = 0
    peak_tasks: int = 0

    def add_wall(self, phase: str, seconds: float) -> None:
        self.wall[phase] = self.wall.get(phase, 0.0) + seconds

    def add_sim(self, phase: str, seconds: float) -> None:
        self.simulated[phase] = self.simulated.get(phase, 0.0) + seconds

    @property
    def network_seconds(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for r in self.transfers:
            out[r.phase.value] = out.get(r.phase.value, 0.0) + r.sim_seconds
        return out

    @property
    def bytes(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.transfers:
            out[r.phase.value] = out.get(r.phase.value, 0) + r.bytes
        return out

    @property
    def simulated_train(self) -> float:
        """Virtual seconds of the training pipeline: compute plus distribution and sync."""
        net = self.network_seconds
        return (
            sum(self.simulated.get(p, 0.0) for p in TRAIN_COMPUTE_PHASES)
            + net.get(TransferPhase.DATA_DISTRIBUTION.value, 0.0)
            + net.get(TransferPhase.MODEL_SYNCHRONIZATION.value, 0.0)
        )

    @property
    def simulated_test(self) -> float:
        net = self.network_seconds
        return self.simulated.get(EVALUATE, 0.0) + net.get(
            TransferPhase.RESULT_COLLECTION.value, 0.0
        )

    @property
    def simulated_total(self) -> float:
        return self.simulated_train + self.simulated_test

    @property
    def wall_total(self) -> float:
        return sum(self.wall.values())

    def wall_of(self, *phases: str) -> float:
        return sum(self.wall.get(p, 0.0) for p in phases)
