"""Encoder-decoder transformer built on the local autodiff engine.

Desk-scale by default (2 layers, d_model 64) but the configuration can
express full-size models. Residual blocks are post-norm (add, then layer
norm), positions use fixed sinusoidal encodings, and the decoder applies
a causal mask plus padding masks derived from PAD ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..textcore import PAD_ID
from . import autodiff as ad
from .autodiff import Tensor

NEG_INF = -1e9


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 256
    n_layers: int = 2
    dropout_rate: float = 0.1
    max_seq_len: int = 64
    tie_embeddings: bool = False
    param_dtype: str = "float64"  # float32 roughly halves step time

    def __post_init__(self) -> None:
        dims = (self.vocab_size, self.d_model, self.n_heads, self.d_ff,
                self.n_layers, self.max_seq_len)
        if any(d <= 0 for d in dims):
            raise ValueError(f"all dimensions must be positive: {self}")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.param_dtype not in ("float32", "float64"):
            raise ValueError(f"param_dtype must be float32 or float64, got {self.param_dtype}")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(self.param_dtype)


def positional_encoding(max_len: int, d_model: int) -> np.ndarray:
    """Sinusoidal position table: sin on even columns, cos on odd ones."""
    if max_len <= 0 or d_model <= 0:
        raise ValueError("dimensions must be positive")
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    idx = np.arange(d_model, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * np.floor(idx / 2.0) / d_model)
    table = np.where(idx % 2 == 0, np.sin(angle), np.cos(angle))
    return table


def scaled_dot_attention(
    q: Tensor, k: Tensor, v: Tensor, mask: np.ndarray | None = None
) -> tuple[Tensor, np.ndarray]:
    """softmax(q kᵀ / sqrt(d_head)) v with optional boolean visibility mask.

    ``mask`` broadcasts against the (query, key) score matrix; False
    entries receive zero attention weight. Returns the attended values
    and the weight matrix (as a plain array, for diagnostics).
    """
    d_head = q.shape[-1]
    if k.shape[-1] != d_head:
        raise ValueError(f"query/key width mismatch: {q.shape} vs {k.shape}")
    if k.shape[-2] != v.shape[-2]:
        raise ValueError(f"key/value length mismatch: {k.shape} vs {v.shape}")
    scores = ad.mul(ad.matmul(q, _swap_last(k)), 1.0 / math.sqrt(d_head))
    if mask is not None:
        np.broadcast_shapes(mask.shape, scores.shape)
        bias = np.where(mask, 0.0, NEG_INF).astype(scores.data.dtype)
        scores = ad.add(scores, Tensor(bias))
    weights = ad.softmax(scores, axis=-1)
    return ad.matmul(weights, v), weights.data


def _swap_last(t: Tensor) -> Tensor:
    axes = list(range(len(t.shape)))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return ad.transpose(t, axes)


@dataclass
class AttentionParams:
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    bq: Tensor
    bk: Tensor
    bv: Tensor
    bo: Tensor


def multi_head_attention(
    x_q: Tensor,
    x_k: Tensor,
    x_v: Tensor,
    params: AttentionParams,
    mask: np.ndarray | None,
    n_heads: int,
    collect: list | None = None,
) -> Tensor:
    """Project into heads, attend per head, concatenate, project out.

    Head i sees the i-th d_model/n_heads-wide slice of the query/key/value
    projections, so the per-head projection matrices are column blocks of
    ``wq``/``wk``/``wv``.
    """
    batch, q_len, d_model = x_q.shape
    if d_model % n_heads:
        raise ValueError(f"d_model {d_model} not divisible by n_heads {n_heads}")
    d_head = d_model // n_heads

    def split_heads(x: Tensor, length: int) -> Tensor:
        x = ad.reshape(x, (batch, length, n_heads, d_head))
        return ad.transpose(x, (0, 2, 1, 3))

    k_len = x_k.shape[1]
    q = split_heads(ad.add(ad.matmul(x_q, params.wq), params.bq), q_len)
    k = split_heads(ad.add(ad.matmul(x_k, params.wk), params.bk), k_len)
    v = split_heads(ad.add(ad.matmul(x_v, params.wv), params.bv), k_len)
    attended, weights = scaled_dot_attention(q, k, v, mask)
    if collect is not None:
        collect.append(weights)
    merged = ad.reshape(ad.transpose(attended, (0, 2, 1, 3)), (batch, q_len, d_model))
    return ad.add(ad.matmul(merged, params.wo), params.bo)


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    limit = math.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def init_parameters(config: ModelConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    """Fresh parameter dict in canonical (checkpoint) order."""
    d, dff, v = config.d_model, config.d_ff, config.vocab_size
    dtype = config.np_dtype
    params: dict[str, Tensor] = {}

    def mat(name: str, shape: tuple[int, ...]) -> None:
        params[name] = Tensor(_glorot(rng, shape).astype(dtype), requires_grad=True)

    def vec(name: str, size: int, value: float = 0.0) -> None:
        params[name] = Tensor(np.full(size, value, dtype=dtype), requires_grad=True)

    mat("embedding", (v, d))

    def attn_block(prefix: str) -> None:
        for w in ("wq", "wk", "wv", "wo"):
            mat(f"{prefix}.{w}", (d, d))
        for b in ("bq", "bk", "bv", "bo"):
            vec(f"{prefix}.{b}", d)

    def ln_block(prefix: str) -> None:
        vec(f"{prefix}.gain", d, 1.0)
        vec(f"{prefix}.bias", d, 0.0)

    def ffn_block(prefix: str) -> None:
        mat(f"{prefix}.w1", (d, dff))
        vec(f"{prefix}.b1", dff)
        mat(f"{prefix}.w2", (dff, d))
        vec(f"{prefix}.b2", d)

    for i in range(config.n_layers):
        attn_block(f"enc.{i}.attn")
        ln_block(f"enc.{i}.ln1")
        ffn_block(f"enc.{i}.ffn")
        ln_block(f"enc.{i}.ln2")
    for i in range(config.n_layers):
        attn_block(f"dec.{i}.self_attn")
        ln_block(f"dec.{i}.ln1")
        attn_block(f"dec.{i}.cross_attn")
        ln_block(f"dec.{i}.ln2")
        ffn_block(f"dec.{i}.ffn")
        ln_block(f"dec.{i}.ln3")
    if not config.tie_embeddings:
        mat("out.weight", (d, v))
        vec("out.bias", v)
    return params


class TransformerModel:
    """Configuration plus named parameter tensors, with forward passes.

    A model is single-writer during training; once training stops it can
    be shared freely across threads for decoding and evaluation.
    """

    def __init__(
        self,
        config: ModelConfig,
        params: dict[str, Tensor] | None = None,
        rng: np.random.Generator | None = None,
    ):
        self.config = config
        if params is None:
            params = init_parameters(config, rng or np.random.default_rng(0))
        self.params = params
        self._pe = positional_encoding(config.max_seq_len, config.d_model).astype(config.np_dtype)

    # -- parameter plumbing --------------------------------------------------

    def attention_params(self, prefix: str) -> AttentionParams:
        p = self.params
        return AttentionParams(
            *(p[f"{prefix}.{n}"] for n in ("wq", "wk", "wv", "wo", "bq", "bk", "bv", "bo"))
        )

    def zero_grads(self) -> None:
        for t in self.params.values():
            t.zero_grad()

    def clone(self) -> "TransformerModel":
        copies = {
            name: Tensor(t.data.copy(), requires_grad=True) for name, t in self.params.items()
        }
        return TransformerModel(self.config, params=copies)

    # -- forward -------------------------------------------------------------

    def _check_ids(self, ids: np.ndarray, what: str) -> np.ndarray:
        ids = np.atleast_2d(np.asarray(ids, dtype=np.int64))
        if ids.shape[1] > self.config.max_seq_len:
            raise ValueError(
                f"{what} length {ids.shape[1]} exceeds max_seq_len {self.config.max_seq_len}"
            )
        if ids.size and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            raise ValueError(f"{what} ids outside vocab of size {self.config.vocab_size}")
        return ids

    def _embed(self, ids: np.ndarray, train_mode: bool, rng) -> Tensor:
        x = ad.mul(ad.embedding(self.params["embedding"], ids), math.sqrt(self.config.d_model))
        x = ad.add(x, Tensor(self._pe[: ids.shape[1]]))
        if train_mode:
            x = ad.dropout(x, self.config.dropout_rate, rng)
        return x

    def _residual(self, x: Tensor, sub: Tensor, ln_prefix: str, train_mode: bool, rng) -> Tensor:
        if train_mode:
            sub = ad.dropout(sub, self.config.dropout_rate, rng)
        return ad.layer_norm(
            ad.add(x, sub),
            self.params[f"{ln_prefix}.gain"],
            self.params[f"{ln_prefix}.bias"],
        )

    def _ffn(self, x: Tensor, prefix: str) -> Tensor:
        p = self.params
        hidden = ad.relu(ad.add(ad.matmul(x, p[f"{prefix}.w1"]), p[f"{prefix}.b1"]))
        return ad.add(ad.matmul(hidden, p[f"{prefix}.w2"]), p[f"{prefix}.b2"])

    def encode(
        self,
        src_ids: np.ndarray,
        train_mode: bool = False,
        rng: np.random.Generator | None = None,
        collect_attention: list | None = None,
    ) -> tuple[Tensor, np.ndarray]:
        """Returns encoder states and the source key-visibility mask."""
        src_ids = self._check_ids(src_ids, "source")
        src_visible = (src_ids != PAD_ID)[:, None, None, :]
        x = self._embed(src_ids, train_mode, rng)
        for i in range(self.config.n_layers):
            attended = multi_head_attention(
                x, x, x, self.attention_params(f"enc.{i}.attn"), src_visible,
                self.config.n_heads, collect_attention,
            )
            x = self._residual(x, attended, f"enc.{i}.ln1", train_mode, rng)
            x = self._residual(x, self._ffn(x, f"enc.{i}.ffn"), f"enc.{i}.ln2", train_mode, rng)
        return x, src_visible

    def decode(
        self,
        tgt_ids: np.ndarray,
        memory: Tensor,
        src_visible: np.ndarray,
        train_mode: bool = False,
        rng: np.random.Generator | None = None,
        collect_attention: list | None = None,
    ) -> Tensor:
        tgt_ids = self._check_ids(tgt_ids, "target")
        t_len = tgt_ids.shape[1]
        causal = np.tril(np.ones((t_len, t_len), dtype=bool))[None, None]
        tgt_visible = (tgt_ids != PAD_ID)[:, None, None, :] & causal
        x = self._embed(tgt_ids, train_mode, rng)
        for i in range(self.config.n_layers):
            self_att = multi_head_attention(
                x, x, x, self.attention_params(f"dec.{i}.self_attn"), tgt_visible,
                self.config.n_heads, collect_attention,
            )
            x = self._residual(x, self_att, f"dec.{i}.ln1", train_mode, rng)
            cross = multi_head_attention(
                x, memory, memory, self.attention_params(f"dec.{i}.cross_attn"), src_visible,
                self.config.n_heads, collect_attention,
            )
            x = self._residual(x, cross, f"dec.{i}.ln2", train_mode, rng)
            x = self._residual(x, self._ffn(x, f"dec.{i}.ffn"), f"dec.{i}.ln3", train_mode, rng)
        return x

    def logits(
        self,
        src_ids: np.ndarray,
        tgt_ids: np.ndarray,
        train_mode: bool = False,
        rng: np.random.Generator | None = None,
        collect_attention: list | None = None,
    ) -> Tensor:
        """Unnormalized next-token scores, shape (batch, tgt_len, vocab)."""
        if train_mode and self.config.dropout_rate > 0 and rng is None:
            raise ValueError("train_mode with dropout requires an rng")
        memory, src_visible = self.encode(src_ids, train_mode, rng, collect_attention)
        states = self.decode(tgt_ids, memory, src_visible, train_mode, rng, collect_attention)
        if self.config.tie_embeddings:
            return ad.matmul(states, _swap_last_2d(self.params["embedding"]))
        return ad.add(ad.matmul(states, self.params["out.weight"]), self.params["out.bias"])

    def forward(
        self,
        src_ids: np.ndarray,
        tgt_ids: np.ndarray,
        train_mode: bool = False,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        """Per-position probability distributions over the vocabulary."""
        scores = self.logits(src_ids, tgt_ids, train_mode=train_mode, rng=rng)
        return ad.softmax(scores, axis=-1).data


def _swap_last_2d(t: Tensor) -> Tensor:
    return ad.transpose(t, (1, 0))
