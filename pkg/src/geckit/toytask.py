"""Bundled synthetic correction task for desk-scale experiments.

The "language": 64 two-character tokens over the letters a-h, ordered
lexicographically. A well-formed sentence is a consecutive run of 4-8
alphabet tokens, so every corruption (duplicated, dropped, replaced, or
swapped tokens and characters) has a recoverable correction. Sources are
noised copies of the clean targets, which makes the mapping learnable by
a two-layer model in minutes while exercising the full error taxonomy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .noiser import NoiseResources, inject_noise
from .scorer import GoldEditSet, extract_edits
from .textcore import ParallelPair, make_pair

TOKEN_CHARS = "abcdefgh"


def token_alphabet() -> list[str]:
    """All 64 two-character tokens, lexicographically ordered."""
    return [a + b for a in TOKEN_CHARS for b in TOKEN_CHARS]


def toy_resources() -> NoiseResources:
    """Deterministic candidate pools for the toy language.

    Synonyms of a token are the other tokens sharing its first letter; a
    character's homophone is the next letter (cyclic).
    """
    alphabet = token_alphabet()
    synonyms = {
        tok: tuple(t for t in alphabet if t[0] == tok[0] and t != tok) for tok in alphabet
    }
    chars = list(TOKEN_CHARS)
    homophones = {
        c: (chars[(i + 1) % len(chars)],) for i, c in enumerate(chars)
    }
    return NoiseResources(
        synonyms=synonyms, homophones=homophones, char_pool=tuple(chars)
    )


@dataclass(frozen=True)
class ToyTaskConfig:
    n_external: int = 480
    n_train: int = 960
    n_dev: int = 100
    n_test: int = 200
    min_len: int = 4
    max_len: int = 8
    noise_rate: float = 0.25  # per-unit corruption rate for internal data
    data_seed: int = 20_000

    def __post_init__(self) -> None:
        if self.min_len < 1 or self.max_len < self.min_len:
            raise ValueError("bad sentence length bounds")
        if not 0 < self.noise_rate <= 1:
            raise ValueError("noise_rate must be in (0, 1]")


@dataclass
class ToyData:
    external: list[ParallelPair]  # clean text, both sides identical
    train: list[ParallelPair]     # noised source, clean target
    dev: list[ParallelPair]
    test: list[ParallelPair]


def sample_clean_sentence(rng: np.random.Generator, cfg: ToyTaskConfig) -> list[str]:
    alphabet = token_alphabet()
    length = int(rng.integers(cfg.min_len, cfg.max_len + 1))
    start = int(rng.integers(0, len(alphabet) - length + 1))
    return alphabet[start : start + length]


def _noised_pairs(
    n: int, cfg: ToyTaskConfig, rng: np.random.Generator, res: NoiseResources
) -> list[ParallelPair]:
    pairs = []
    for _ in range(n):
        clean = sample_clean_sentence(rng, cfg)
        noised, _ = inject_noise(make_pair(clean, clean), None, cfg.noise_rate, rng, res)
        pairs.append(noised)
    return pairs


def build_corpora(cfg: ToyTaskConfig) -> ToyData:
    """Deterministic corpora from cfg.data_seed; the external set stays
    clean (the augmentation stage is what corrupts it)."""
    res = toy_resources()
    streams = {
        name: np.random.default_rng(np.random.SeedSequence(cfg.data_seed, spawn_key=(k,)))
        for k, name in enumerate(("external", "train", "dev", "test"))
    }
    external = []
    for _ in range(cfg.n_external):
        clean = sample_clean_sentence(streams["external"], cfg)
        external.append(make_pair(clean, clean))
    return ToyData(
        external=external,
        train=_noised_pairs(cfg.n_train, cfg, streams["train"], res),
        dev=_noised_pairs(cfg.n_dev, cfg, streams["dev"], res),
        test=_noised_pairs(cfg.n_test, cfg, streams["test"], res),
    )


def derive_gold_edits(pairs: list[ParallelPair]) -> list[GoldEditSet]:
    """Annotate evaluation pairs: the gold edits are the canonical minimal
    alignment of each source onto its clean target."""
    out = []
    for pair in pairs:
        edits, _ = extract_edits(pair.source, pair.target)
        out.append(GoldEditSet(edits))
    return out
