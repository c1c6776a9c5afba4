"""Adversarial attack-set construction from a standard test set.

Each selected sentence receives exactly one perturbation at a uniformly
sampled position: the unit (word or character) is replaced by a sampled
candidate when the resources offer one, and deleted otherwise. A
replacement whose candidate contains the original as a substring is
classified as redundancy, any other replacement as selection, and a
deletion as missing. Gold edit offsets are re-projected across the
perturbation so attacked sentences remain scorable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .noiser import CHAR, MISSING, REDUNDANCY, SELECTION, WORD, NoiseResources
from .scorer import EditSpan, GoldEditSet
from .textcore import ParallelPair, make_pair

ATTACK_TYPES = (REDUNDANCY, MISSING, SELECTION)


@dataclass(frozen=True)
class AttackConfig:
    proportion: float = 0.3
    granularity_mix: float = 0.5  # probability of a word-level attack
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.proportion <= 1:
            raise ValueError(f"proportion must be in (0, 1], got {self.proportion}")
        if not 0 <= self.granularity_mix <= 1:
            raise ValueError("granularity_mix must be in [0, 1]")


@dataclass(frozen=True)
class AttackRecord:
    """One applied perturbation, replayable onto the original source.

    ``original``/``replacement`` are unit-level: whole tokens for word
    granularity, single characters for char granularity (``char_index``
    locates the character inside the token at ``position``). A missing
    attack is exactly the case of a non-empty original with an empty
    replacement.
    """

    sentence_index: int
    attack_type: str
    granularity: str
    position: int
    original: str
    replacement: str
    char_index: int | None = None

    def __post_init__(self) -> None:
        if self.attack_type not in ATTACK_TYPES:
            raise ValueError(f"unknown attack type {self.attack_type!r}")
        is_missing = self.attack_type == MISSING
        if is_missing != (bool(self.original) and not self.replacement):
            raise ValueError("missing iff replacement empty and original non-empty")
        if (self.granularity == CHAR) != (self.char_index is not None):
            raise ValueError("char_index required exactly for char granularity")

    def as_dict(self) -> dict:
        d = {
            "sentence_index": self.sentence_index,
            "attack_type": self.attack_type,
            "granularity": self.granularity,
            "position": self.position,
            "original": self.original,
            "replacement": self.replacement,
        }
        if self.char_index is not None:
            d["char_index"] = self.char_index
        return d


def replay_attack(source: Sequence[str], record: AttackRecord) -> list[str]:
    """Re-apply a recorded attack to its original source."""
    work = list(source)
    pos = record.position
    if record.granularity == WORD:
        if work[pos] != record.original:
            raise ValueError(f"record {record} does not match source")
        if record.replacement:
            work[pos : pos + 1] = record.replacement.split(" ")
        else:
            del work[pos]
        return work
    token = work[pos]
    ci = record.char_index
    if token[ci : ci + 1] != record.original:
        raise ValueError(f"record {record} does not match source")
    new_token = token[:ci] + record.replacement + token[ci + 1 :]
    if new_token:
        work[pos] = new_token
    else:
        del work[pos]
    return work


def attack_sentence(
    source: Sequence[str],
    res: NoiseResources,
    granularity: str,
    rng: np.random.Generator,
    sentence_index: int = 0,
) -> tuple[list[str], AttackRecord | None]:
    """Perturb one uniformly sampled position of a sentence.

    Word granularity draws replacement candidates from the synonyms
    table, char granularity from the homophones table. Without
    candidates the unit is deleted; if deleting it would empty the
    sentence, the input is returned unchanged with a null record.
    """
    if not source:
        raise ValueError("source is empty")
    work = list(source)
    pos = int(rng.integers(len(work)))

    if granularity == WORD:
        token = work[pos]
        candidates = res.synonyms.get(token, ())
        if candidates:
            replacement = candidates[int(rng.integers(len(candidates)))]
            attack_type = REDUNDANCY if token in replacement else SELECTION
            record = AttackRecord(sentence_index, attack_type, WORD, pos, token, replacement)
            return replay_attack(source, record), record
        if len(work) == 1:
            return work, None
        record = AttackRecord(sentence_index, MISSING, WORD, pos, token, "")
        return replay_attack(source, record), record

    token = work[pos]
    ci = int(rng.integers(len(token)))
    ch = token[ci]
    candidates = res.homophones.get(ch, ())
    if candidates:
        replacement = candidates[int(rng.integers(len(candidates)))]
        attack_type = REDUNDANCY if ch in replacement else SELECTION
        record = AttackRecord(sentence_index, attack_type, CHAR, pos, ch, replacement, char_index=ci)
        return replay_attack(source, record), record
    if len(token) == 1 and len(work) == 1:
        return work, None
    record = AttackRecord(sentence_index, MISSING, CHAR, pos, ch, "", char_index=ci)
    return replay_attack(source, record), record


def project_gold_edits(
    gold: GoldEditSet, position: int, delta: int, attacked_len: int
) -> GoldEditSet:
    """Shift gold offsets across one attack.

    Offsets strictly after the attack position move by the token-count
    delta; spans never cross below the attack position. Edits that the
    shift degrades to no-ops are dropped, and insertions that collide at
    the same offset merge in source order.
    """
    p = position
    projected: dict[tuple[int, int], list[str]] = {}
    order: list[tuple[int, int]] = []
    for edit in sorted(gold.edits):
        start = edit.start + delta if edit.start > p else edit.start
        end = edit.end + delta if edit.end > p else edit.end
        start = max(0, min(start, attacked_len))
        end = max(start, min(end, attacked_len))
        if start == end and not edit.replacement:
            continue
        key = (start, end)
        if key in projected:
            projected[key].append(edit.replacement)
        else:
            projected[key] = [edit.replacement]
            order.append(key)
    edits = frozenset(
        EditSpan(s, e, " ".join(r for r in projected[(s, e)] if r))
        for (s, e) in order
    )
    return GoldEditSet(edits)


def build_attack_set(
    testset: Sequence[ParallelPair],
    gold_sets: Sequence[GoldEditSet],
    cfg: AttackConfig,
    res: NoiseResources,
) -> tuple[list[ParallelPair], list[GoldEditSet], list[AttackRecord]]:
    """Attack each sentence independently with probability cfg.proportion.

    Unattacked sentences and their gold sets pass through untouched;
    attacked ones carry exactly one perturbation and re-projected gold
    offsets. Determinism: sentence i uses a generator derived from
    (cfg.seed, i), so output is independent of evaluation order.
    """
    if not testset:
        raise ValueError("testset is empty")
    if len(testset) != len(gold_sets):
        raise ValueError("testset / gold_sets length mismatch")
    attacked_pairs: list[ParallelPair] = []
    projected_sets: list[GoldEditSet] = []
    records: list[AttackRecord] = []
    for i, (pair, gold) in enumerate(zip(testset, gold_sets)):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(i,)))
        if rng.random() >= cfg.proportion:
            attacked_pairs.append(pair)
            projected_sets.append(gold)
            continue
        granularity = WORD if rng.random() < cfg.granularity_mix else CHAR
        new_source, record = attack_sentence(pair.source, res, granularity, rng, sentence_index=i)
        attacked_pairs.append(make_pair(new_source, pair.target))
        if record is None:
            projected_sets.append(gold)
            continue
        records.append(record)
        delta = len(new_source) - len(pair.source)
        projected_sets.append(
            project_gold_edits(gold, record.position, delta, len(new_source))
        )
    return attacked_pairs, projected_sets, records
