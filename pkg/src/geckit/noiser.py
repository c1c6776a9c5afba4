"""Synthetic error injection and fivefold corpus augmentation.

Errors come in four categories (redundancy, missing, selection, order) at
two granularities (whole words, single characters inside a word). Noise
application is recorded as a list of :class:`NoiseOp` so that every
corruption can be replayed forward or inverted exactly.

Augmentation copies a clean corpus five times: copies 1-4 receive noise
of a single category each (granularity drawn per pair), copy 5 receives
comprehensive noise where every perturbation draws its own category and
granularity. Determinism comes from per-(copy, pair) seeds derived from
one master seed, so serial and parallel runs produce identical output.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .textcore import ParallelPair, make_pair

REDUNDANCY, MISSING, SELECTION, ORDER = "redundancy", "missing", "selection", "order"
CATEGORIES = (REDUNDANCY, MISSING, SELECTION, ORDER)

WORD, CHAR = "word", "char"
GRANULARITIES = (WORD, CHAR)

NEAR_SYNONYM, HOMOPHONE, OTHER = "near_synonym", "homophone", "other"
SELECTION_SUBTYPES = (NEAR_SYNONYM, HOMOPHONE, OTHER)


class ResourceError(ValueError):
    """A noise category was requested without the resource it needs."""


@dataclass(frozen=True)
class ErrorCategory:
    """A concrete error kind: category + granularity (+ subtype).

    ``selection_subtype`` is required for character-level selection
    errors and forbidden everywhere else; those are the only
    combinations the taxonomy admits.
    """

    category: str
    granularity: str
    selection_subtype: str | None = None

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"unknown granularity {self.granularity!r}")
        needs_subtype = self.category == SELECTION and self.granularity == CHAR
        if needs_subtype and self.selection_subtype not in SELECTION_SUBTYPES:
            raise ValueError("char-level selection requires a subtype "
                             f"from {SELECTION_SUBTYPES}")
        if not needs_subtype and self.selection_subtype is not None:
            raise ValueError("selection_subtype only valid for char-level selection")


@dataclass(frozen=True)
class NoiseResources:
    """Candidate pools driving selection/redundancy perturbations."""

    synonyms: Mapping[str, tuple[str, ...]]
    homophones: Mapping[str, tuple[str, ...]]
    char_pool: tuple[str, ...]

    def __post_init__(self) -> None:
        for name, table in (("synonyms", self.synonyms), ("homophones", self.homophones)):
            for key, cands in table.items():
                if not cands:
                    raise ValueError(f"{name}[{key!r}] is empty")
                if key in cands:
                    raise ValueError(f"{name}[{key!r}] contains its own key")

    @classmethod
    def load(cls, directory: str | Path) -> "NoiseResources":
        """Read ``synonyms.tsv``, ``homophones.tsv`` and ``char_pool.txt``."""
        directory = Path(directory)
        return cls(
            synonyms=_load_candidate_tsv(directory / "synonyms.tsv"),
            homophones=_load_candidate_tsv(directory / "homophones.tsv"),
            char_pool=tuple(
                line.strip()
                for line in (directory / "char_pool.txt").read_text(encoding="utf-8").splitlines()
                if line.strip()
            ),
        )

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        _write_candidate_tsv(self.synonyms, directory / "synonyms.tsv")
        _write_candidate_tsv(self.homophones, directory / "homophones.tsv")
        (directory / "char_pool.txt").write_text(
            "\n".join(self.char_pool) + "\n", encoding="utf-8"
        )


def _load_candidate_tsv(path: Path) -> dict[str, tuple[str, ...]]:
    table: dict[str, tuple[str, ...]] = {}
    if not path.exists():
        return table
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        cells = line.split("\t")
        table[cells[0]] = tuple(cells[1:])
    return table


def _write_candidate_tsv(table: Mapping[str, Sequence[str]], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(table):
            fh.write(key + "\t" + "\t".join(table[key]) + "\n")


@dataclass(frozen=True)
class NoiseOp:
    """Audit record of one injected error, replayable and invertible.

    ``position`` indexes the token sequence at application time. Word
    granularity: redundancy inserts ``replacement`` after ``position``,
    missing deletes the token there, selection rewrites it, order swaps
    it with its right neighbor (``original``/``replacement`` hold the
    pre-swap left/right tokens). Char granularity: the token at
    ``position`` is rewritten from ``original`` to ``replacement``
    (removed entirely when ``replacement`` is empty).
    """

    category: str
    granularity: str
    position: int
    original: str
    replacement: str

    def as_dict(self) -> dict:
        return {
            "category": self.category,
            "granularity": self.granularity,
            "position": self.position,
            "original": self.original,
            "replacement": self.replacement,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseOp":
        return cls(d["category"], d["granularity"], int(d["position"]),
                   d["original"], d["replacement"])


def replay_ops(source: Sequence[str], ops: Iterable[NoiseOp]) -> list[str]:
    """Apply recorded ops in order, validating each against the sequence."""
    work = list(source)
    for op in ops:
        if op.granularity == CHAR:
            _check(work[op.position] == op.original, op, work)
            if op.replacement:
                work[op.position] = op.replacement
            else:
                del work[op.position]
        elif op.category == REDUNDANCY:
            _check(work[op.position] == op.original, op, work)
            work.insert(op.position + 1, op.replacement)
        elif op.category == MISSING:
            _check(work[op.position] == op.original, op, work)
            del work[op.position]
        elif op.category == SELECTION:
            _check(work[op.position] == op.original, op, work)
            work[op.position] = op.replacement
        else:  # order
            _check(
                work[op.position] == op.original and work[op.position + 1] == op.replacement,
                op, work,
            )
            work[op.position], work[op.position + 1] = work[op.position + 1], work[op.position]
    return work


def invert_ops(corrupted: Sequence[str], ops: Sequence[NoiseOp]) -> list[str]:
    """Undo recorded ops (inverse of :func:`replay_ops`)."""
    work = list(corrupted)
    for op in reversed(ops):
        if op.granularity == CHAR:
            if op.replacement:
                _check(work[op.position] == op.replacement, op, work)
                work[op.position] = op.original
            else:
                work.insert(op.position, op.original)
        elif op.category == REDUNDANCY:
            _check(work[op.position + 1] == op.replacement, op, work)
            del work[op.position + 1]
        elif op.category == MISSING:
            work.insert(op.position, op.original)
        elif op.category == SELECTION:
            _check(work[op.position] == op.replacement, op, work)
            work[op.position] = op.original
        else:  # order
            _check(
                work[op.position] == op.replacement and work[op.position + 1] == op.original,
                op, work,
            )
            work[op.position], work[op.position + 1] = work[op.position + 1], work[op.position]
    return work


def _check(ok: bool, op: NoiseOp, work: Sequence[str]) -> None:
    if not ok:
        raise ValueError(f"op {op} does not match sequence {list(work)}")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ResourceError(message)


def _validate_resources(cat: ErrorCategory, res: NoiseResources) -> None:
    if cat.category == SELECTION:
        if cat.granularity == WORD or cat.selection_subtype == NEAR_SYNONYM:
            _require(bool(res.synonyms), f"{cat} requires a non-empty synonyms table")
        elif cat.selection_subtype == HOMOPHONE:
            _require(bool(res.homophones), f"{cat} requires a non-empty homophones table")
        else:
            _require(bool(res.char_pool), f"{cat} requires a non-empty char pool")


def _choice(rng: np.random.Generator, items: Sequence[str]) -> str:
    return items[int(rng.integers(len(items)))]


def inject_noise(
    pair: ParallelPair,
    cat: ErrorCategory | None,
    rate: float,
    rng: np.random.Generator,
    res: NoiseResources,
) -> tuple[ParallelPair, list[NoiseOp]]:
    """Corrupt the source side of a pair; the target is never modified.

    Every eligible unit (token for word granularity, character for char
    granularity) is independently hit with probability ``rate``. With
    ``cat=None`` ("comprehensive" mode) units are tokens and each hit
    draws its own category, granularity and, when needed, subtype.
    Hits that would produce a no-op or an empty source are skipped:
    order needs a distinct right neighbor, selection needs candidates
    for the unit, and the last remaining token is never deleted.
    """
    if not 0 < rate <= 1:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    if not pair.source:
        raise ValueError("source is empty")
    if cat is not None:
        _validate_resources(cat, res)
    else:
        _require(
            bool(res.synonyms) and bool(res.homophones) and bool(res.char_pool),
            "comprehensive noise requires synonyms, homophones and a char pool",
        )

    work = list(pair.source)
    ops: list[NoiseOp] = []

    if cat is not None and cat.granularity == CHAR:
        _inject_char_units(work, cat, rate, rng, res, ops)
    else:
        _inject_word_units(work, cat, rate, rng, res, ops)

    return make_pair(work, pair.target), ops


def _sample_category(rng: np.random.Generator) -> ErrorCategory:
    category = CATEGORIES[int(rng.integers(4))]
    granularity = GRANULARITIES[int(rng.integers(2))]
    subtype = None
    if category == SELECTION and granularity == CHAR:
        subtype = SELECTION_SUBTYPES[int(rng.integers(3))]
    return ErrorCategory(category, granularity, subtype)


def _inject_word_units(
    work: list[str],
    cat: ErrorCategory | None,
    rate: float,
    rng: np.random.Generator,
    res: NoiseResources,
    ops: list[NoiseOp],
) -> None:
    n_original = len(work)
    delta = 0
    for pos in range(n_original):
        if rng.random() >= rate:
            continue
        hit_cat = cat if cat is not None else _sample_category(rng)
        cur = pos + delta
        if hit_cat.granularity == CHAR:
            delta += _apply_char_op_in_token(work, cur, hit_cat, rng, res, ops, char_index=None)
        else:
            delta += _apply_word_op(work, cur, hit_cat, rng, res, ops)


def _inject_char_units(
    work: list[str],
    cat: ErrorCategory,
    rate: float,
    rng: np.random.Generator,
    res: NoiseResources,
    ops: list[NoiseOp],
) -> None:
    n_original = len(work)
    token_delta = 0
    for pos in range(n_original):
        cur = pos + token_delta
        original_len = len(work[cur])
        char_drift = 0
        for ci in range(original_len):
            if rng.random() >= rate:
                continue
            before_len = len(work[cur])
            removed = _apply_char_op_in_token(
                work, cur, cat, rng, res, ops, char_index=ci + char_drift
            )
            if removed < 0:  # token vanished, remaining chars with it
                token_delta -= 1
                break
            char_drift += len(work[cur]) - before_len


def _apply_word_op(
    work: list[str],
    cur: int,
    cat: ErrorCategory,
    rng: np.random.Generator,
    res: NoiseResources,
    ops: list[NoiseOp],
) -> int:
    """Apply one word-level op at index ``cur``; returns the length delta."""
    token = work[cur]
    if cat.category == REDUNDANCY:
        candidates = res.synonyms.get(token, ())
        inserted = token
        if candidates and rng.random() < 0.5:
            inserted = _choice(rng, candidates)
        work.insert(cur + 1, inserted)
        ops.append(NoiseOp(REDUNDANCY, WORD, cur, token, inserted))
        return 1
    if cat.category == MISSING:
        if len(work) <= 1:
            return 0
        del work[cur]
        ops.append(NoiseOp(MISSING, WORD, cur, token, ""))
        return -1
    if cat.category == SELECTION:
        candidates = res.synonyms.get(token, ())
        if not candidates:
            return 0
        replacement = _choice(rng, candidates)
        work[cur] = replacement
        ops.append(NoiseOp(SELECTION, WORD, cur, token, replacement))
        return 0
    # order: adjacent transposition, skipped at the right edge or when both
    # units are equal (the swap would be a no-op).
    if cur + 1 >= len(work) or work[cur] == work[cur + 1]:
        return 0
    left, right = work[cur], work[cur + 1]
    work[cur], work[cur + 1] = right, left
    ops.append(NoiseOp(ORDER, WORD, cur, left, right))
    return 0


def _apply_char_op_in_token(
    work: list[str],
    cur: int,
    cat: ErrorCategory,
    rng: np.random.Generator,
    res: NoiseResources,
    ops: list[NoiseOp],
    char_index: int | None,
) -> int:
    """Apply one char-level op inside the token at ``cur``.

    ``char_index`` pins the targeted character; None samples it
    uniformly. Returns the token-count delta (-1 when the token
    vanished, else 0).
    """
    token = work[cur]
    if not token:
        return 0
    ci = int(rng.integers(len(token))) if char_index is None else char_index
    if ci >= len(token):
        return 0
    ch = token[ci]

    if cat.category == REDUNDANCY:
        candidates = res.homophones.get(ch, ())
        inserted = ch
        if candidates and rng.random() < 0.5:
            inserted = _choice(rng, candidates)
        new_token = token[: ci + 1] + inserted + token[ci + 1 :]
    elif cat.category == MISSING:
        new_token = token[:ci] + token[ci + 1 :]
        if not new_token and len(work) <= 1:
            return 0
    elif cat.category == SELECTION:
        if cat.selection_subtype == NEAR_SYNONYM:
            candidates = res.synonyms.get(ch, ())
        elif cat.selection_subtype == HOMOPHONE:
            candidates = res.homophones.get(ch, ())
        else:
            candidates = tuple(c for c in res.char_pool if c != ch)
        if not candidates:
            return 0
        new_token = token[:ci] + _choice(rng, candidates) + token[ci + 1 :]
    else:  # order: swap with the next character inside the token
        if ci + 1 >= len(token) or token[ci] == token[ci + 1]:
            return 0
        new_token = token[:ci] + token[ci + 1] + token[ci] + token[ci + 2 :]

    if new_token == token:
        return 0
    ops.append(NoiseOp(cat.category, CHAR, cur, token, new_token))
    if new_token:
        work[cur] = new_token
        return 0
    del work[cur]
    return -1


# ---------------------------------------------------------------------------
# Fivefold replication
# ---------------------------------------------------------------------------

# Copies 1-4 carry one category each; copy 5 mixes all of them.
COPY_CATEGORIES = (REDUNDANCY, MISSING, SELECTION, ORDER, None)


def pair_rng(master_seed: int, copy_id: int, index: int) -> np.random.Generator:
    """Per-(copy, pair) generator; the derivation is part of the format."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(copy_id, index)))


def _copy_category(copy_id: int, rng: np.random.Generator) -> ErrorCategory | None:
    category = COPY_CATEGORIES[copy_id - 1]
    if category is None:
        return None
    granularity = GRANULARITIES[int(rng.integers(2))]
    subtype = None
    if category == SELECTION and granularity == CHAR:
        subtype = SELECTION_SUBTYPES[int(rng.integers(3))]
    return ErrorCategory(category, granularity, subtype)


def augment_fivefold(
    corpus: Sequence[ParallelPair],
    rate: float,
    master_seed: int,
    res: NoiseResources,
) -> tuple[list[ParallelPair], list[dict]]:
    """Produce the 5x noised corpus plus a JSON-ready audit record per pair.

    Output is copy-major (all pairs of copy 1, then copy 2, ...), each
    copy preserving input order, so the result has exactly 5 * len(corpus)
    pairs with unmodified targets.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    out: list[ParallelPair] = []
    audit: list[dict] = []
    for copy_id in range(1, 6):
        for index, pair in enumerate(corpus):
            rng = pair_rng(master_seed, copy_id, index)
            cat = _copy_category(copy_id, rng)
            noised, ops = inject_noise(pair, cat, rate, rng, res)
            out.append(noised)
            audit.append(
                {
                    "origin_index": index,
                    "copy_id": copy_id,
                    "ops": [op.as_dict() for op in ops],
                }
            )
    return out, audit
