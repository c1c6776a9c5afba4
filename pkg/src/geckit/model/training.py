"""Batching, cross-entropy loss, Adam, and the training loop."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..textcore import BOS_ID, EOS_ID, PAD_ID, ParallelPair, Vocab
from . import autodiff as ad
from .autodiff import Tensor
from .transformer import TransformerModel


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters.

    ``lr_schedule`` is either "warmup_isqrt" (linear warmup to ``peak_lr``
    then inverse-square-root decay) or "flat" (constant ``flat_lr``).
    """

    batch_size: int = 32
    epochs: int = 1
    lr_schedule: str = "warmup_isqrt"
    peak_lr: float = 1e-3
    warmup_steps: int = 400
    flat_lr: float = 1e-7
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def learning_rate(self, step: int) -> float:
        if self.lr_schedule == "flat":
            return self.flat_lr
        if self.lr_schedule != "warmup_isqrt":
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")
        step = max(step, 1)
        return self.peak_lr * min(step / self.warmup_steps, (self.warmup_steps / step) ** 0.5)


@dataclass
class Batch:
    src: np.ndarray      # (B, Ls) with PAD fill
    tgt_in: np.ndarray   # (B, Lt) BOS-prefixed
    tgt_out: np.ndarray  # (B, Lt) EOS-suffixed labels
    loss_mask: np.ndarray  # (B, Lt) 1.0 on real labels, 0.0 on PAD

    def __len__(self) -> int:
        return self.src.shape[0]


def encode_pair(pair: ParallelPair, vocab: Vocab) -> tuple[list[int], list[int]]:
    """Source ids get a terminating EOS; target ids stay bare (BOS/EOS are
    added at batch time)."""
    return vocab.encode(pair.source) + [EOS_ID], vocab.encode(pair.target)


def encode_corpus(pairs: Sequence[ParallelPair], vocab: Vocab) -> list[tuple[list[int], list[int]]]:
    return [encode_pair(p, vocab) for p in pairs]


def _pad(rows: list[list[int]], width: int) -> np.ndarray:
    out = np.full((len(rows), width), PAD_ID, dtype=np.int64)
    for i, row in enumerate(rows):
        out[i, : len(row)] = row
    return out


def make_batch(encoded: Sequence[tuple[list[int], list[int]]]) -> Batch:
    srcs = [s for s, _ in encoded]
    tgt_in = [[BOS_ID] + t for _, t in encoded]
    tgt_out = [t + [EOS_ID] for _, t in encoded]
    src = _pad(srcs, max(len(s) for s in srcs))
    width = max(len(t) for t in tgt_in)
    tgt_in_arr = _pad(tgt_in, width)
    tgt_out_arr = _pad(tgt_out, width)
    return Batch(src, tgt_in_arr, tgt_out_arr, (tgt_out_arr != PAD_ID).astype(np.float64))


def iter_batches(
    encoded: Sequence[tuple[list[int], list[int]]],
    batch_size: int,
    rng: np.random.Generator | None = None,
) -> list[Batch]:
    """Split a corpus into padded batches, optionally shuffling first."""
    order = np.arange(len(encoded))
    if rng is not None:
        order = rng.permutation(len(encoded))
    return [
        make_batch([encoded[i] for i in order[k : k + batch_size]])
        for k in range(0, len(encoded), batch_size)
    ]


def cross_entropy(logits: Tensor, batch: Batch, reduce: str = "mean") -> Tensor:
    """Label cross-entropy with PAD positions excluded from the loss."""
    logp = ad.log_softmax(logits, axis=-1)
    mask = Tensor(batch.loss_mask.astype(logits.data.dtype))
    nll = ad.mul(ad.mul(ad.gather_last(logp, batch.tgt_out), -1.0), mask)
    total = ad.tsum(nll)
    if reduce == "sum":
        return total
    if reduce != "mean":
        raise ValueError(f"unknown reduce {reduce!r}")
    return ad.mul(total, 1.0 / max(batch.loss_mask.sum(), 1.0))


# A loss function maps (model, batch, train_mode, rng) to a scalar Tensor.
LossFn = Callable[[TransformerModel, Batch, bool, np.random.Generator | None], Tensor]


def hard_loss(model: TransformerModel, batch: Batch, train_mode: bool, rng) -> Tensor:
    return cross_entropy(model.logits(batch.src, batch.tgt_in, train_mode, rng), batch)


class Adam:
    """Adam with bias correction, keyed by parameter name."""

    def __init__(self, params: dict[str, Tensor], cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.step_count = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.items()}

    def apply(self, lr: float) -> None:
        cfg = self.cfg
        self.step_count += 1
        b1c = 1.0 - cfg.adam_beta1 ** self.step_count
        b2c = 1.0 - cfg.adam_beta2 ** self.step_count
        for name, t in self.params.items():
            if t.grad is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= cfg.adam_beta1
            m += (1 - cfg.adam_beta1) * t.grad
            v *= cfg.adam_beta2
            v += (1 - cfg.adam_beta2) * (t.grad * t.grad)
            t.data -= lr * (m / b1c) / (np.sqrt(v / b2c) + cfg.adam_eps)


def train_step(
    model: TransformerModel,
    batch: Batch,
    optimizer: Adam,
    lr: float,
    loss_fn: LossFn = hard_loss,
    rng: np.random.Generator | None = None,
    train_mode: bool = True,
) -> float:
    """One gradient step; aborts (with diagnostics) on a non-finite loss."""
    model.zero_grads()
    loss = loss_fn(model, batch, train_mode, rng)
    value = float(loss.data)
    if not np.isfinite(value):
        raise RuntimeError(
            f"non-finite loss {value} at optimizer step {optimizer.step_count + 1} "
            f"(batch of {len(batch)}, lr {lr:.3g})"
        )
    loss.backward()
    optimizer.apply(lr)
    return value


def fit(
    model: TransformerModel,
    encoded: Sequence[tuple[list[int], list[int]]],
    cfg: TrainConfig,
    seed: int,
    loss_fn: LossFn = hard_loss,
    epoch_callback: Callable[[int, TransformerModel], None] | None = None,
) -> list[float]:
    """Train for cfg.epochs over the corpus; returns per-step losses.

    ``epoch_callback(epoch, model)`` runs before training (epoch 0) and
    after each completed epoch, which is where dev-set evaluation hooks
    in. One generator seeded from ``seed`` drives both batch shuffling
    and dropout, so runs are reproducible step for step.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    optimizer = Adam(model.params, cfg)
    losses: list[float] = []
    step = 0
    if epoch_callback is not None:
        epoch_callback(0, model)
    for epoch in range(1, cfg.epochs + 1):
        for batch in iter_batches(encoded, cfg.batch_size, rng):
            step += 1
            lr = cfg.learning_rate(step)
            losses.append(train_step(model, batch, optimizer, lr, loss_fn, rng))
        if epoch_callback is not None:
            epoch_callback(epoch, model)
    return losses
