"""Teacher-student distillation: temperature-softened targets, the
combined soft/hard objective, the distillation training loop, and the
per-epoch-window convergence metric.

During training the same temperature softens both the teacher's and the
student's output distributions; inference always runs at temperature 1.
The teacher is frozen throughout: its forward passes are detached, so no
gradient ever reaches its parameters.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import autodiff as ad
from .model.autodiff import Tensor
from .model.training import (
    Adam,
    Batch,
    TrainConfig,
    cross_entropy,
    iter_batches,
    train_step,
)
from .model.transformer import TransformerModel

DISTILL_MODE_ENV = "GECKIT_DISTILL_MODE"
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class DistillConfig:
    """Weighting between soft (teacher) and hard (label) losses.

    ``soft_scale`` multiplies the soft term only; 1.0 uses the plain
    linear combination, while temperature**2 restores gradient magnitudes
    that temperature softening shrinks.
    """

    alpha: float = 0.5
    temperature: float = 4.0
    soft_scale: float = 1.0

    def __post_init__(self) -> None:
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.soft_scale <= 0:
            raise ValueError(f"soft_scale must be positive, got {self.soft_scale}")


def softmax_with_temperature(scores: np.ndarray, temperature: float) -> np.ndarray:
    """exp(z_i / T) / sum_j exp(z_j / T) along the last axis, computed with
    max-subtraction; temperature 1 is the standard softmax."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    z = scores / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def soft_loss(teacher_probs: np.ndarray, student_probs: np.ndarray) -> float:
    """Cross-entropy of the student distribution under the teacher's:
    -sum_i t_i log s_i, with s clamped away from zero. Minimal (equal to
    the teacher's entropy) exactly when the distributions coincide."""
    t = np.asarray(teacher_probs, dtype=np.float64)
    s = np.asarray(student_probs, dtype=np.float64)
    if t.shape != s.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {s.shape}")
    return float(-(t * np.log(np.maximum(s, PROB_FLOOR))).sum(axis=-1).sum())


def distillation_loss(
    student_logits: Tensor,
    teacher_logits: np.ndarray,
    targets: np.ndarray,
    loss_mask: np.ndarray,
    cfg: DistillConfig,
    reduce: str = "mean",
) -> Tensor:
    """alpha * soft_scale * L_soft + (1 - alpha) * L_hard.

    The soft term softens both models with cfg.temperature; the hard term
    is ordinary label cross-entropy at temperature 1. Both are summed per
    position, masked, then averaged over real (non-PAD) positions unless
    ``reduce="sum"``. The teacher side enters as a constant.
    """
    student_logits = ad.as_tensor(student_logits)
    if student_logits.shape != np.shape(teacher_logits):
        raise ValueError(
            f"student/teacher logit shapes differ: {student_logits.shape} vs "
            f"{np.shape(teacher_logits)}"
        )
    dtype = student_logits.data.dtype
    mask = Tensor(loss_mask.astype(dtype))
    denom = max(float(np.sum(loss_mask)), 1.0) if reduce == "mean" else 1.0
    if reduce not in ("mean", "sum"):
        raise ValueError(f"unknown reduce {reduce!r}")

    teacher_soft = softmax_with_temperature(teacher_logits, cfg.temperature).astype(dtype)
    student_log_soft = ad.log_softmax(
        ad.mul(student_logits, 1.0 / cfg.temperature), axis=-1
    )
    soft_per_pos = ad.mul(ad.tsum(ad.mul(student_log_soft, Tensor(teacher_soft)), axis=-1), -1.0)
    soft_term = ad.mul(ad.tsum(ad.mul(soft_per_pos, mask)), 1.0 / denom)

    hard_logp = ad.log_softmax(student_logits, axis=-1)
    hard_per_pos = ad.mul(ad.gather_last(hard_logp, targets), -1.0)
    hard_term = ad.mul(ad.tsum(ad.mul(hard_per_pos, mask)), 1.0 / denom)

    return ad.add(
        ad.mul(soft_term, cfg.alpha * cfg.soft_scale),
        ad.mul(hard_term, 1.0 - cfg.alpha),
    )


@dataclass
class ConvergenceSeries:
    """Dev-set score trajectory sampled every ``delta_epoch`` epochs."""

    checkpoints: list[tuple[int, float]] = field(default_factory=list)
    delta_epoch: int = 10

    def append(self, epoch: int, f05: float) -> None:
        if self.checkpoints and epoch <= self.checkpoints[-1][0]:
            raise ValueError(f"epochs must be strictly increasing, got {epoch}")
        self.checkpoints.append((epoch, f05))

    def to_csv(self) -> str:
        lines = ["epoch,f05"]
        lines += [f"{e},{f:.6f}" for e, f in self.checkpoints]
        return "\n".join(lines) + "\n"


def convergence_rate(series: ConvergenceSeries) -> list[float]:
    """Score improvement per epoch between consecutive checkpoints."""
    points = series.checkpoints
    if len(points) < 2:
        raise ValueError("need at least two checkpoints")
    return [
        (f1 - f0) / (e1 - e0) for (e0, f0), (e1, f1) in zip(points, points[1:])
    ]


def _teacher_step_logits(teacher: TransformerModel, batch: Batch) -> np.ndarray:
    return teacher.logits(batch.src, batch.tgt_in).data


def distill_train(
    teacher: TransformerModel | None,
    student: TransformerModel,
    encoded_train: Sequence[tuple[list[int], list[int]]],
    train_cfg: TrainConfig,
    distill_cfg: DistillConfig,
    seed: int,
    evaluator: Callable[[TransformerModel], float] | None = None,
    delta_epoch: int = 10,
    mode: str | None = None,
) -> tuple[list[float], ConvergenceSeries]:
    """Train the student on the distillation objective; returns per-step
    losses and the dev-score series (epoch 0 and every delta_epoch-th).

    With ``teacher=None`` the loop degrades to plain fine-tuning on the
    hard loss while consuming the random stream identically, so runs with
    alpha=0 match plain fine-tuning step for step. ``mode`` ("serial" or
    "pipelined", default from the GECKIT_DISTILL_MODE variable) selects
    whether teacher forward passes for the next batch overlap the
    student's update for the current one; both orderings produce the
    same result because the teacher is frozen.
    """
    if teacher is not None and teacher.config.vocab_size != student.config.vocab_size:
        raise ValueError(
            f"teacher/student vocabulary sizes differ: "
            f"{teacher.config.vocab_size} vs {student.config.vocab_size}"
        )
    mode = mode or os.environ.get(DISTILL_MODE_ENV, "serial")
    if mode not in ("serial", "pipelined"):
        raise ValueError(f"unknown distillation mode {mode!r}")
    if delta_epoch < 1:
        raise ValueError("delta_epoch must be >= 1")

    # Identical rng derivation to training.fit: shuffling and dropout come
    # from one stream, so the alpha=0 run is comparable step for step.
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    optimizer = Adam(student.params, train_cfg)
    series = ConvergenceSeries(delta_epoch=delta_epoch)
    if evaluator is not None:
        series.append(0, evaluator(student))

    current_teacher_logits: dict[str, np.ndarray | None] = {"value": None}

    def kd_loss(model: TransformerModel, batch: Batch, train_mode: bool, step_rng) -> Tensor:
        logits = model.logits(batch.src, batch.tgt_in, train_mode, step_rng)
        if teacher is None:
            return cross_entropy(logits, batch)
        return distillation_loss(
            logits, current_teacher_logits["value"], batch.tgt_out, batch.loss_mask, distill_cfg
        )

    losses: list[float] = []
    step = 0
    pool = ThreadPoolExecutor(max_workers=1) if (mode == "pipelined" and teacher) else None
    try:
        for epoch in range(1, train_cfg.epochs + 1):
            batches = iter_batches(encoded_train, train_cfg.batch_size, rng)
            future = None
            if pool is not None and batches:
                future = pool.submit(_teacher_step_logits, teacher, batches[0])
            for i, batch in enumerate(batches):
                if teacher is not None:
                    if pool is not None:
                        current_teacher_logits["value"] = future.result()
                        if i + 1 < len(batches):
                            future = pool.submit(_teacher_step_logits, teacher, batches[i + 1])
                    else:
                        current_teacher_logits["value"] = _teacher_step_logits(teacher, batch)
                step += 1
                lr = train_cfg.learning_rate(step)
                losses.append(train_step(student, batch, optimizer, lr, kd_loss, rng))
            if evaluator is not None and epoch % delta_epoch == 0:
                series.append(epoch, evaluator(student))
    finally:
        if pool is not None:
            pool.shutdown(wait=False)
    return losses, series
