"""Tokenization, vocabulary management, and parallel-corpus I/O.

Corpora are UTF-8 TSV files (``source<TAB>target``, one pair per line,
tokens joined by single spaces). Word segmentation is deterministic
greedy longest-match against a user-supplied lexicon, so that
word-granularity corpus operations are reproducible without external
tooling.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

PAD, BOS, EOS, UNK = "PAD", "BOS", "EOS", "UNK"
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3

SPECIAL_TOKENS = (PAD, BOS, EOS, UNK)

# Length-filter defaults: keep sources with 20..80 tokens inclusive.
DEFAULT_MIN_LEN = 20
DEFAULT_MAX_LEN = 80


class CorpusFormatError(ValueError):
    """Raised when a corpus, lexicon, or vocab file is malformed."""


@dataclass(frozen=True)
class ParallelPair:
    """One (source, target) sentence pair, the unit of all corpora."""

    source: tuple[str, ...]
    target: tuple[str, ...]

    def __post_init__(self) -> None:
        for side, toks in (("source", self.source), ("target", self.target)):
            for tok in toks:
                if "\t" in tok or "\n" in tok:
                    raise ValueError(f"{side} token contains tab/newline: {tok!r}")


def make_pair(source: Sequence[str], target: Sequence[str]) -> ParallelPair:
    return ParallelPair(tuple(source), tuple(target))


@dataclass(frozen=True)
class SegmentationLexicon:
    """Multi-character words used by greedy longest-match segmentation."""

    entries: frozenset[str]
    max_word_len: int = field(init=False)

    def __post_init__(self) -> None:
        for word in self.entries:
            if len(word) < 2:
                raise ValueError(f"lexicon entry shorter than 2 chars: {word!r}")
        longest = max((len(w) for w in self.entries), default=1)
        object.__setattr__(self, "max_word_len", longest)

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "SegmentationLexicon":
        return cls(frozenset(words))

    @classmethod
    def load(cls, path: str | Path) -> "SegmentationLexicon":
        """Load a lexicon file: UTF-8, one word per line, blanks ignored."""
        words = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            word = line.strip()
            if word:
                words.append(word)
        return cls.from_words(words)


def segment(sentence: str, lexicon: SegmentationLexicon) -> list[str]:
    """Split a character sequence into words by greedy longest-match.

    At each position the longest lexicon entry starting there is taken,
    falling back to a single character. Joining the output restores the
    input exactly, so segmentation never loses characters.
    """
    words: list[str] = []
    i = 0
    n = len(sentence)
    while i < n:
        best = sentence[i]
        limit = min(lexicon.max_word_len, n - i)
        for length in range(limit, 1, -1):
            candidate = sentence[i : i + length]
            if candidate in lexicon.entries:
                best = candidate
                break
        words.append(best)
        i += len(best)
    return words


class Vocab:
    """Token/id bijection with fixed special ids PAD=0, BOS=1, EOS=2, UNK=3.

    Out-of-vocabulary tokens encode to UNK; decoding an id outside the
    table raises.
    """

    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[:4]) != SPECIAL_TOKENS:
            raise ValueError(f"first four tokens must be {SPECIAL_TOKENS}")
        self.tokens: list[str] = list(tokens)
        self.index: dict[str, int] = {}
        for i, tok in enumerate(self.tokens):
            if tok in self.index:
                raise ValueError(f"duplicate token in vocab: {tok!r}")
            self.index[tok] = i

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @classmethod
    def build(cls, corpus: Iterable[ParallelPair], min_freq: int = 1) -> "Vocab":
        """Build from a corpus: specials first, then tokens by descending
        frequency (ties broken lexicographically) with ``min_freq`` cutoff."""
        counts: collections.Counter[str] = collections.Counter()
        for pair in corpus:
            counts.update(pair.source)
            counts.update(pair.target)
        kept = [t for t, c in counts.items() if c >= min_freq and t not in SPECIAL_TOKENS]
        kept.sort(key=lambda t: (-counts[t], t))
        return cls(list(SPECIAL_TOKENS) + kept)

    def encode(self, sentence: Sequence[str]) -> list[int]:
        unk = UNK_ID
        return [self.index.get(tok, unk) for tok in sentence]

    def decode(self, ids: Sequence[int]) -> list[str]:
        out = []
        for i in ids:
            if not 0 <= i < len(self.tokens):
                raise IndexError(f"id {i} outside vocab of size {len(self.tokens)}")
            out.append(self.tokens[i])
        return out

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if len(lines) < 4:
            raise CorpusFormatError(f"vocab file {path} has fewer than 4 lines")
        return cls(lines)


def filter_by_length(
    corpus: Sequence[ParallelPair],
    min_len: int = DEFAULT_MIN_LEN,
    max_len: int = DEFAULT_MAX_LEN,
) -> list[ParallelPair]:
    """Keep pairs whose source length lies in [min_len, max_len], preserving order."""
    if min_len > max_len:
        raise ValueError(f"min_len {min_len} exceeds max_len {max_len}")
    return [p for p in corpus if min_len <= len(p.source) <= max_len]


def load_corpus(path: str | Path) -> list[ParallelPair]:
    """Read a TSV parallel corpus. Blank lines are ignored; a line without
    exactly one tab, or with an empty side, is a format error."""
    pairs: list[ParallelPair] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            cells = line.split("\t")
            if len(cells) != 2:
                raise CorpusFormatError(
                    f"{path}:{lineno}: expected source<TAB>target, got {len(cells)} fields"
                )
            source, target = cells[0].split(), cells[1].split()
            if not source or not target:
                raise CorpusFormatError(f"{path}:{lineno}: empty source or target")
            pairs.append(make_pair(source, target))
    return pairs


def write_corpus(corpus: Iterable[ParallelPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in corpus:
            fh.write(" ".join(pair.source) + "\t" + " ".join(pair.target) + "\n")


def load_sentences(path: str | Path) -> list[list[str]]:
    """Read one tokenized sentence per line (tokens space-separated).

    Blank lines are kept as empty sentences so line numbers stay aligned
    with a parallel file (e.g. hypothesis vs. source).
    """
    return [line.split() for line in Path(path).read_text(encoding="utf-8").splitlines()]


def write_sentences(sentences: Iterable[Sequence[str]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            fh.write(" ".join(sent) + "\n")
