"""Trainable encoder-decoder transformer with verified gradients."""

from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .decoding import BeamConfig, beam_decode, decode_corpus, greedy_decode
from .training import (
    Adam,
    Batch,
    TrainConfig,
    cross_entropy,
    encode_corpus,
    encode_pair,
    fit,
    hard_loss,
    iter_batches,
    make_batch,
    train_step,
)
from .transformer import (
    AttentionParams,
    ModelConfig,
    TransformerModel,
    init_parameters,
    multi_head_attention,
    positional_encoding,
    scaled_dot_attention,
)

__all__ = [
    "Adam",
    "AttentionParams",
    "Batch",
    "BeamConfig",
    "ModelConfig",
    "Tensor",
    "TrainConfig",
    "TransformerModel",
    "beam_decode",
    "decode_corpus",
    "cross_entropy",
    "encode_corpus",
    "encode_pair",
    "fit",
    "greedy_decode",
    "hard_loss",
    "init_parameters",
    "iter_batches",
    "load_checkpoint",
    "make_batch",
    "multi_head_attention",
    "positional_encoding",
    "save_checkpoint",
    "scaled_dot_attention",
    "train_step",
]
