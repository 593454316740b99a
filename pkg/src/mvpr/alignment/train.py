"""Teacher-student feature alignment training loop.

The teacher embeds one domain and stays frozen; the student starts from
the teacher's weights and is fine-tuned so its embeddings of the paired
domain match. Pairs are sampled uniformly with replacement by a seeded
generator, so runs are bit-reproducible.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractViolation, InputError, TrainingDiverged
from .losses import mse_loss_t
from .model import EmbeddingModel, forward
from .optim import AdamState, adam_step
from .tape import Tensor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 50000
    batch_size: int = 32
    learning_rate: float = 1e-5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    rng_seed: int = 0
    holdout_fraction: float = 0.2
    log_every: int = 100

    def __post_init__(self):
        numeric = {
            "iterations": self.iterations,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_eps": self.adam_eps,
            "log_every": self.log_every,
        }
        for name, value in numeric.items():
            if value <= 0:
                raise InputError(f"{name} must be positive, got {value}")
        if not (0.0 <= self.holdout_fraction < 1.0):
            raise InputError("holdout_fraction must lie in [0, 1)")

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(raw) - known
        if bad:
            raise InputError(f"unknown training config keys: {sorted(bad)}")
        return cls(**raw)


@dataclass
class PairedAlignmentSet:
    """Same-viewpoint image pairs from the two domains."""

    real: np.ndarray  # (N, C, H, W)
    synt: np.ndarray
    pair_ids: list[str]

    def __post_init__(self):
        self.real = np.asarray(self.real, dtype=np.float64)
        self.synt = np.asarray(self.synt, dtype=np.float64)
        if self.real.shape != self.synt.shape:
            raise InputError(
                f"real {self.real.shape} and synt {self.synt.shape} shapes differ"
            )
        if len(self.pair_ids) != len(self.real):
            raise InputError("one pair id per image pair required")

    def __len__(self) -> int:
        return len(self.real)


@dataclass
class TrainLog:
    entries: list[tuple[int, float, float]] = field(default_factory=list)  # step, loss, wallclock_s
    holdout_initial: float = 0.0
    holdout_final: float = 0.0
    train_indices: list[int] = field(default_factory=list)
    holdout_indices: list[int] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "loss", "wallclock_s"])
            for step, loss, wallclock in self.entries:
                w.writerow([step, repr(loss), f"{wallclock:.3f}"])


def alignment_loss_mean(teacher: EmbeddingModel, student: EmbeddingModel,
                        real: np.ndarray, synt: np.ndarray) -> float:
    t_out = forward(teacher, real)
    s_out = forward(student, synt)
    return float(np.mean((t_out - s_out) ** 2))


def align(
    teacher: EmbeddingModel,
    student: EmbeddingModel,
    data: PairedAlignmentSet,
    cfg: TrainConfig,
    init_student_from_teacher: bool = True,
) -> tuple[EmbeddingModel, TrainLog]:
    """Fine-tune the student to mirror the frozen teacher on the pairs.

    Raises TrainingDiverged (carrying the last good parameters) on a
    non-finite loss or gradient.
    """
    if teacher.architecture != student.architecture:
        raise ContractViolation("teacher and student must share the architecture")
    if len(data) == 0:
        raise InputError("alignment set is empty")
    if cfg.batch_size > len(data):
        raise InputError(
            f"batch_size {cfg.batch_size} exceeds pair count {len(data)}"
        )

    rng = np.random.default_rng(cfg.rng_seed)
    perm = rng.permutation(len(data))
    n_hold = int(round(cfg.holdout_fraction * len(data)))
    n_hold = min(n_hold, len(data) - cfg.batch_size) if n_hold else 0
    hold_idx = np.sort(perm[:n_hold])
    train_idx = np.sort(perm[n_hold:])

    theta = teacher.params.copy() if init_student_from_teacher else student.params.copy()
    teacher_out = forward(teacher, data.real)  # frozen: embed every pair once
    eval_idx = hold_idx if len(hold_idx) else train_idx

    def holdout_loss(params: np.ndarray) -> float:
        student_eval = EmbeddingModel(student.architecture, params)
        out = forward(student_eval, data.synt[eval_idx])
        return float(np.mean((teacher_out[eval_idx] - out) ** 2))

    log = TrainLog(
        train_indices=[int(i) for i in train_idx],
        holdout_indices=[int(i) for i in hold_idx],
    )
    log.holdout_initial = holdout_loss(theta)

    state = AdamState.zeros(len(theta))
    started = time.perf_counter()
    for step in range(cfg.iterations):
        batch = train_idx[rng.integers(0, len(train_idx), size=cfg.batch_size)]
        params = Tensor(theta, requires_grad=True)
        loss = mse_loss_t(teacher_out[batch], student.forward_tensor(data.synt[batch], params))
        loss_value = float(loss.data)
        if not np.isfinite(loss_value):
            raise TrainingDiverged(
                f"loss became non-finite at step {step}",
                last_good_params=theta.copy(),
                step=step,
            )
        if step % cfg.log_every == 0:
            log.entries.append((step, loss_value, time.perf_counter() - started))
        loss.backward()
        try:
            theta, state = adam_step(theta, params.grad, state, cfg)
        except TrainingDiverged as exc:
            exc.last_good_params = theta.copy()
            raise
    trained = EmbeddingModel(student.architecture, theta)
    final_train = float(
        np.mean((teacher_out[train_idx] - forward(trained, data.synt[train_idx])) ** 2)
    )
    log.entries.append((cfg.iterations, final_train, time.perf_counter() - started))
    log.holdout_final = holdout_loss(theta)
    logger.info(
        "alignment finished: holdout %.3g -> %.3g over %d steps",
        log.holdout_initial, log.holdout_final, cfg.iterations,
    )
    return trained, log
