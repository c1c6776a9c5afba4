"""Beam-search decoding (greedy as the width-1 special case).

Decoding is batch-first and incremental: a whole corpus decodes
together, every sentence's beams advancing in lockstep as rows of one
batch, and each step feeds only the newest token while per-layer
attention caches carry the past. Per-sentence results are identical to
decoding sentences one at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..textcore import BOS_ID, EOS_ID, PAD_ID
from .transformer import NEG_INF, TransformerModel


@dataclass(frozen=True)
class BeamConfig:
    beam_size: int = 5
    max_decode_len: int = 32
    length_penalty: float = 0.0  # 0 disables length normalization

    def __post_init__(self) -> None:
        if self.beam_size < 1:
            raise ValueError(f"beam_size must be >= 1, got {self.beam_size}")
        if self.max_decode_len < 1:
            raise ValueError("max_decode_len must be >= 1")


def _normalized(score: float, length: int, penalty: float) -> float:
    if penalty == 0.0:
        return score
    return score / (length ** penalty)


def _layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / np.sqrt(var + eps) * gain + bias


def _log_softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class _IncrementalDecoder:
    """Numpy-only decoder forward that reuses cached keys and values.

    Produces the same next-token distributions as running the full
    decoder over the growing prefix, at O(prefix) instead of O(prefix^2)
    cost. Evaluation only: nothing here touches the autodiff graph.
    """

    def __init__(self, model: TransformerModel, memory: np.ndarray, src_visible: np.ndarray):
        self.model = model
        cfg = model.config
        self.n_heads, self.d_head = cfg.n_heads, cfg.d_head
        p = {name: t.data for name, t in model.params.items()}
        self.p = p
        self.pe = model._pe
        self.scale = math.sqrt(cfg.d_model)
        # cross-attention keys/values depend only on the encoder output
        self.cross_k = []
        self.cross_v = []
        for i in range(cfg.n_layers):
            pre = f"dec.{i}.cross_attn"
            self.cross_k.append(self._heads(memory @ p[f"{pre}.wk"] + p[f"{pre}.bk"]))
            self.cross_v.append(self._heads(memory @ p[f"{pre}.wv"] + p[f"{pre}.bv"]))
        # (N, 1, 1, src_len) additive bias for padded source keys
        self.cross_bias = np.where(src_visible, 0.0, NEG_INF).astype(memory.dtype)
        self.self_k: list[np.ndarray | None] = [None] * cfg.n_layers
        self.self_v: list[np.ndarray | None] = [None] * cfg.n_layers

    def _heads(self, x: np.ndarray) -> np.ndarray:
        """(rows, len, d_model) -> (rows, heads, len, d_head)."""
        rows, length, _ = x.shape
        return x.reshape(rows, length, self.n_heads, self.d_head).transpose(0, 2, 1, 3)

    def _attend(self, q: np.ndarray, k: np.ndarray, v: np.ndarray, bias=None) -> np.ndarray:
        """q: (rows, d); k/v: (rows, heads, len, d_head) -> (rows, d)."""
        rows = q.shape[0]
        qh = q.reshape(rows, self.n_heads, 1, self.d_head)
        scores = qh @ np.swapaxes(k, -1, -2) / math.sqrt(self.d_head)
        if bias is not None:
            scores = scores + bias
        weights = np.exp(scores - scores.max(axis=-1, keepdims=True))
        weights /= weights.sum(axis=-1, keepdims=True)
        return (weights @ v).reshape(rows, self.n_heads * self.d_head)

    def reorder(self, rows: np.ndarray) -> None:
        """Gather cache rows after beam selection."""
        for i in range(len(self.self_k)):
            if self.self_k[i] is not None:
                self.self_k[i] = self.self_k[i][rows]
                self.self_v[i] = self.self_v[i][rows]
        self.cross_k = [k[rows] for k in self.cross_k]
        self.cross_v = [v[rows] for v in self.cross_v]
        self.cross_bias = self.cross_bias[rows]

    def step(self, tokens: np.ndarray, position: int) -> np.ndarray:
        """Advance every row by one token; returns next-token log-probs."""
        p = self.p
        cfg = self.model.config
        x = p["embedding"][tokens] * self.scale + self.pe[position]
        for i in range(cfg.n_layers):
            pre = f"dec.{i}.self_attn"
            q = x @ p[f"{pre}.wq"] + p[f"{pre}.bq"]
            k_new = self._heads((x @ p[f"{pre}.wk"] + p[f"{pre}.bk"])[:, None, :])
            v_new = self._heads((x @ p[f"{pre}.wv"] + p[f"{pre}.bv"])[:, None, :])
            if self.self_k[i] is None:
                self.self_k[i], self.self_v[i] = k_new, v_new
            else:
                self.self_k[i] = np.concatenate([self.self_k[i], k_new], axis=2)
                self.self_v[i] = np.concatenate([self.self_v[i], v_new], axis=2)
            attended = self._attend(q, self.self_k[i], self.self_v[i]) @ p[f"{pre}.wo"] + p[f"{pre}.bo"]
            x = _layer_norm(x + attended, p[f"dec.{i}.ln1.gain"], p[f"dec.{i}.ln1.bias"])

            pre = f"dec.{i}.cross_attn"
            q = x @ p[f"{pre}.wq"] + p[f"{pre}.bq"]
            cross = self._attend(q, self.cross_k[i], self.cross_v[i], self.cross_bias)
            cross = cross @ p[f"{pre}.wo"] + p[f"{pre}.bo"]
            x = _layer_norm(x + cross, p[f"dec.{i}.ln2.gain"], p[f"dec.{i}.ln2.bias"])

            pre = f"dec.{i}.ffn"
            hidden = np.maximum(x @ p[f"{pre}.w1"] + p[f"{pre}.b1"], 0.0)
            x = _layer_norm(
                x + (hidden @ p[f"{pre}.w2"] + p[f"{pre}.b2"]),
                p[f"dec.{i}.ln3.gain"], p[f"dec.{i}.ln3.bias"],
            )
        if cfg.tie_embeddings:
            logits = x @ p["embedding"].T
        else:
            logits = x @ p["out.weight"] + p["out.bias"]
        return _log_softmax(logits)


class _SentenceBeam:
    """Search state for one sentence: live prefixes plus completions."""

    __slots__ = ("beams", "completed", "done")

    def __init__(self) -> None:
        self.beams: list[tuple[list[int], float]] = [([], 0.0)]
        self.completed: list[tuple[list[int], float]] = []
        self.done = False

    def advance(self, logp: np.ndarray, cfg: BeamConfig) -> list[int]:
        """One expansion step; ``logp`` has a row per live beam. Returns
        the surviving beams' parent indices (into the previous beam list)."""
        vocab = logp.shape[-1]
        totals = np.array([[b[1]] for b in self.beams]) + logp
        flat = totals.reshape(-1)
        order = np.argsort(-flat, kind="stable")[: cfg.beam_size * 2]
        next_beams: list[tuple[list[int], float]] = []
        parents: list[int] = []
        for flat_idx in order:
            beam_idx, token = divmod(int(flat_idx), vocab)
            score = float(flat[flat_idx])
            if not math.isfinite(score):
                continue
            prefix = self.beams[beam_idx][0]
            if token == EOS_ID:
                self.completed.append((prefix, score))
            elif len(next_beams) < cfg.beam_size:
                next_beams.append((prefix + [token], score))
                parents.append(beam_idx)
        self.beams = next_beams
        if not next_beams:
            self.done = True
            return parents
        if cfg.length_penalty == 0.0 and self.completed:
            # scores only decrease as prefixes grow, so once every live
            # beam is below the best completion the sentence is settled
            best_done = max(score for _, score in self.completed)
            if all(score <= best_done for _, score in next_beams):
                self.done = True
        return parents

    def best(self, cfg: BeamConfig) -> list[int]:
        pool = self.completed if self.completed else self.beams
        ranked = max(
            enumerate(pool),
            key=lambda item: (
                _normalized(item[1][1], len(item[1][0]) + 1, cfg.length_penalty),
                -item[0],
            ),
        )
        return list(ranked[1][0])


def decode_corpus(
    model: TransformerModel,
    sources: list[np.ndarray] | list[list[int]],
    cfg: BeamConfig,
) -> list[list[int]]:
    """Beam-decode every source; returns generated ids without BOS/EOS.

    Scores are summed token log-probabilities (including the EOS step),
    optionally divided by length**length_penalty. PAD and BOS are never
    emitted. Ties break toward the lower (beam, token) index, so
    beam_size 1 is exactly greedy argmax decoding.
    """
    if not sources:
        return []
    arrays = [np.asarray(s, dtype=np.int64) for s in sources]
    for arr in arrays:
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("every source must be a non-empty 1-D id sequence")

    width = max(arr.size for arr in arrays)
    src = np.full((len(arrays), width), PAD_ID, dtype=np.int64)
    for i, arr in enumerate(arrays):
        src[i, : arr.size] = arr
    memory, src_visible = model.encode(src)

    states = [_SentenceBeam() for _ in arrays]
    decoder = _IncrementalDecoder(model, memory.data, src_visible)
    # row r of the decoder batch belongs to sentence owner[r], beam r - offset
    owner = np.arange(len(arrays))
    decoder.reorder(owner)

    for step in range(cfg.max_decode_len):
        tokens = []
        for i, sb in enumerate(states):
            if not sb.done:
                tokens.extend(
                    BOS_ID if not b[0] else b[0][-1] for b in sb.beams
                )
        if not tokens:
            break
        logp = decoder.step(np.asarray(tokens, dtype=np.int64), step)
        logp[:, PAD_ID] = -math.inf
        logp[:, BOS_ID] = -math.inf

        row = 0
        keep_rows: list[int] = []
        for sb in states:
            if sb.done:
                continue
            n = len(sb.beams)
            parents = sb.advance(logp[row : row + n], cfg)
            if not sb.done:
                keep_rows.extend(row + p for p in parents)
            row += n
        decoder.reorder(np.asarray(keep_rows, dtype=np.int64))
    return [sb.best(cfg) for sb in states]


def beam_decode(model: TransformerModel, src_ids: np.ndarray, cfg: BeamConfig) -> list[int]:
    """Single-sentence convenience wrapper over :func:`decode_corpus`."""
    return decode_corpus(model, [np.asarray(src_ids)], cfg)[0]


def greedy_decode(model: TransformerModel, src_ids: np.ndarray, max_decode_len: int) -> list[int]:
    return beam_decode(model, src_ids, BeamConfig(beam_size=1, max_decode_len=max_decode_len))
