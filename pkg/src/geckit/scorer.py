"""Edit-based corpus scoring: extract system edits by optimal alignment,
match them against gold edit sets, and report P / R / F0.5.

System edits are derived from a minimal-cost Levenshtein alignment of the
source against the hypothesis (unit costs for insert/delete/substitute),
with maximal runs of non-match operations merged into token-offset spans.
Among all minimal-cost alignments, the scorer selects one maximizing the
number of edits that coincide with gold edits (ties broken toward fewer
proposed edits, then a canonical operation order), so a system is never
penalized for producing a correction the gold annotation phrases
differently but an equally-optimal alignment captures.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

# Alignment ops, also used as canonical preference order for tie-breaking.
_MATCH, _SUB, _DEL, _INS = "M", "S", "D", "I"
_OP_ORDER = {_MATCH: 0, _SUB: 1, _DEL: 2, _INS: 3}

DEFAULT_PATH_CAP = 50_000


class M2FormatError(ValueError):
    """Raised on malformed gold-edit files, with the offending line number."""


@dataclass(frozen=True, order=True)
class EditSpan:
    """A replacement of source tokens [start, end) by ``replacement``.

    ``replacement`` holds space-joined tokens; it is empty for pure
    deletions. Insertions have start == end. A no-op (empty span, empty
    replacement) is forbidden.
    """

    start: int
    end: int
    replacement: str

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"bad span [{self.start}, {self.end})")
        if self.start == self.end and not self.replacement:
            raise ValueError("no-op edit (empty span, empty replacement)")


@dataclass(frozen=True)
class GoldEditSet:
    """Gold edits for one sentence; spans must be pairwise non-overlapping."""

    edits: frozenset[EditSpan] = frozenset()

    def __post_init__(self) -> None:
        spans = sorted(self.edits)
        for a, b in itertools.pairwise(spans):
            # Two insertions at the same offset overlap; an insertion at the
            # boundary of another span does not.
            if b.start < a.end or (a.start == a.end == b.start == b.end):
                raise ValueError(f"overlapping gold edits: {a} / {b}")

    def __len__(self) -> int:
        return len(self.edits)


@dataclass
class ScoreReport:
    """Corpus-level precision/recall/F0.5 plus per-sentence counts."""

    precision: float
    recall: float
    f05: float
    matched: int
    proposed: int
    gold: int
    per_sentence: list[tuple[int, int, int]] = field(default_factory=list)
    capped_sentences: list[int] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "P": self.precision,
            "R": self.recall,
            "F05": self.f05,
            "matched": self.matched,
            "proposed": self.proposed,
            "gold": self.gold,
            "capped_sentences": list(self.capped_sentences),
        }

    def format_table(self) -> str:
        lines = [
            f"Precision : {100 * self.precision:6.2f}",
            f"Recall    : {100 * self.recall:6.2f}",
            f"F0.5      : {100 * self.f05:6.2f}",
            f"matched={self.matched} proposed={self.proposed} gold={self.gold}",
        ]
        if self.capped_sentences:
            lines.append(f"alignment cap hit on sentences: {self.capped_sentences}")
        return "\n".join(lines)


def f_beta(precision: float, recall: float, beta: float = 0.5) -> float:
    """Weighted F-measure; beta < 1 weights precision more heavily.

    Returns 0 when both inputs are 0 (the formula's removable singularity).
    """
    if precision == 0 and recall == 0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * precision * recall / (b2 * precision + recall)


def _cost_to_go(source: Sequence[str], hypothesis: Sequence[str]) -> list[list[int]]:
    """dist[i][j] = minimal cost to align source[i:] with hypothesis[j:]."""
    n, m = len(source), len(hypothesis)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        dist[i][m] = n - i
    for j in range(m - 1, -1, -1):
        dist[n][j] = m - j
    for i in range(n - 1, -1, -1):
        src_tok = source[i]
        row, below = dist[i], dist[i + 1]
        for j in range(m - 1, -1, -1):
            sub = below[j + 1] + (0 if src_tok == hypothesis[j] else 1)
            row[j] = min(below[j] + 1, row[j + 1] + 1, sub)
    return dist


def _ops_to_edits(ops: Sequence[str], source: Sequence[str], hypothesis: Sequence[str]) -> frozenset[EditSpan]:
    """Merge maximal runs of non-match ops into EditSpans."""
    edits = []
    i = j = 0
    k = 0
    n_ops = len(ops)
    while k < n_ops:
        if ops[k] == _MATCH:
            i += 1
            j += 1
            k += 1
            continue
        start_i, start_j = i, j
        while k < n_ops and ops[k] != _MATCH:
            if ops[k] == _SUB:
                i += 1
                j += 1
            elif ops[k] == _DEL:
                i += 1
            else:
                j += 1
            k += 1
        edits.append(EditSpan(start_i, i, " ".join(hypothesis[start_j:j])))
    return frozenset(edits)


def _enumerate_minimal_ops(
    dist: list[list[int]],
    source: Sequence[str],
    hypothesis: Sequence[str],
    cap: int,
) -> tuple[list[tuple[str, ...]], bool]:
    """All operation sequences realizing the minimal alignment cost.

    Paths are produced in canonical order (match > substitute > delete >
    insert at each cell, leftmost decision first). Enumeration stops once
    ``cap`` complete paths exist; the second return value reports whether
    the cap was hit.
    """
    n, m = len(source), len(hypothesis)
    memo: dict[tuple[int, int], list[tuple[str, ...]]] = {}
    capped = False

    def suffixes(i: int, j: int) -> list[tuple[str, ...]]:
        nonlocal capped
        key = (i, j)
        if key in memo:
            return memo[key]
        if i == n and j == m:
            return [()]
        options: list[tuple[str, tuple[str, ...]]] = []
        here = dist[i][j]
        if i < n and j < m:
            step = 0 if source[i] == hypothesis[j] else 1
            if dist[i + 1][j + 1] + step == here:
                options.append((_MATCH if step == 0 else _SUB, (i + 1, j + 1)))
        if i < n and dist[i + 1][j] + 1 == here:
            options.append((_DEL, (i + 1, j)))
        if j < m and dist[i][j + 1] + 1 == here:
            options.append((_INS, (i, j + 1)))
        options.sort(key=lambda o: _OP_ORDER[o[0]])
        paths: list[tuple[str, ...]] = []
        for op, (ni, nj) in options:
            for rest in suffixes(ni, nj):
                paths.append((op,) + rest)
                if len(paths) >= cap:
                    capped = True
                    break
            if capped:
                break
        memo[key] = paths
        return paths

    all_paths = suffixes(0, 0)[:cap]
    return all_paths, capped


def _canonical_ops(
    dist: list[list[int]], source: Sequence[str], hypothesis: Sequence[str]
) -> tuple[str, ...]:
    """Single minimal path under the tie-break match > sub > del > ins."""
    n, m = len(source), len(hypothesis)
    ops = []
    i = j = 0
    while i < n or j < m:
        here = dist[i][j]
        if i < n and j < m:
            step = 0 if source[i] == hypothesis[j] else 1
            if dist[i + 1][j + 1] + step == here:
                ops.append(_MATCH if step == 0 else _SUB)
                i += 1
                j += 1
                continue
        if i < n and dist[i + 1][j] + 1 == here:
            ops.append(_DEL)
            i += 1
            continue
        ops.append(_INS)
        j += 1
    return tuple(ops)


def extract_edits(
    source: Sequence[str],
    hypothesis: Sequence[str],
    gold: GoldEditSet | None = None,
    path_cap: int = DEFAULT_PATH_CAP,
) -> tuple[frozenset[EditSpan], bool]:
    """Extract the system's edit set for one sentence.

    Returns ``(edits, capped)``. Among all minimal-cost alignments the
    edit set maximizing overlap with ``gold`` is chosen; equal-overlap
    candidates prefer fewer edits, then canonical enumeration order. When
    more than ``path_cap`` minimal alignments exist the search is
    abandoned: the canonical alignment (match > substitute > delete >
    insert, leftmost-first) is used instead and ``capped`` is True so the
    sentence can be flagged in reports.
    """
    gold_edits = gold.edits if gold is not None else frozenset()
    dist = _cost_to_go(source, hypothesis)
    paths, capped = _enumerate_minimal_ops(dist, source, hypothesis, path_cap)
    if capped:
        return _ops_to_edits(_canonical_ops(dist, source, hypothesis), source, hypothesis), True

    best: frozenset[EditSpan] | None = None
    best_key: tuple[int, int] | None = None
    for ops in paths:
        edits = _ops_to_edits(ops, source, hypothesis)
        key = (-len(edits & gold_edits), len(edits))
        if best_key is None or key < best_key:
            best, best_key = edits, key
    assert best is not None
    return best, False


def apply_edits(source: Sequence[str], edits: Iterable[EditSpan]) -> list[str]:
    """Apply non-overlapping edits to a source token sequence."""
    out: list[str] = []
    cursor = 0
    for edit in sorted(edits):
        if edit.start < cursor:
            raise ValueError(f"overlapping edit at {edit.start} (cursor {cursor})")
        out.extend(source[cursor : edit.start])
        if edit.replacement:
            out.extend(edit.replacement.split(" "))
        cursor = edit.end
    out.extend(source[cursor:])
    return out


def corpus_score(
    sources: Sequence[Sequence[str]],
    hypotheses: Sequence[Sequence[str]],
    gold_sets: Sequence[GoldEditSet],
    beta: float = 0.5,
    path_cap: int = DEFAULT_PATH_CAP,
) -> ScoreReport:
    """Score a corpus of hypotheses against gold edit sets.

    P = total matches / total proposed, R = total matches / total gold;
    an edit matches a gold edit iff start, end, and replacement are all
    equal. A zero denominator yields 1.0 for that ratio, so a corpus
    needing and receiving no corrections scores perfectly.
    """
    if not (len(sources) == len(hypotheses) == len(gold_sets)):
        raise ValueError(
            f"length mismatch: {len(sources)} sources, {len(hypotheses)} hypotheses, "
            f"{len(gold_sets)} gold sets"
        )
    if not sources:
        raise ValueError("empty corpus")
    matched = proposed = gold_total = 0
    per_sentence = []
    capped_sentences = []
    for idx, (src, hyp, gold) in enumerate(zip(sources, hypotheses, gold_sets)):
        edits, capped = extract_edits(src, hyp, gold, path_cap=path_cap)
        if capped:
            capped_sentences.append(idx)
        m = len(edits & gold.edits)
        per_sentence.append((m, len(edits), len(gold)))
        matched += m
        proposed += len(edits)
        gold_total += len(gold)
    precision = matched / proposed if proposed else 1.0
    recall = matched / gold_total if gold_total else 1.0
    return ScoreReport(
        precision=precision,
        recall=recall,
        f05=f_beta(precision, recall, beta),
        matched=matched,
        proposed=proposed,
        gold=gold_total,
        per_sentence=per_sentence,
        capped_sentences=capped_sentences,
    )


# ---------------------------------------------------------------------------
# Gold-edit file format ("S" source lines, "A" annotation lines)
# ---------------------------------------------------------------------------

_NONE_MARKER = "-NONE-"


def parse_m2(path: str | Path) -> tuple[list[list[str]], list[GoldEditSet]]:
    """Parse a gold file of blank-line-separated blocks.

    Each block holds one ``S`` line (tokenized source) and zero or more
    ``A start end|||type|||correction|||...`` lines. A ``noop`` annotation
    contributes no edits. Malformed lines raise with their line number.
    """
    sources: list[list[str]] = []
    gold_sets: list[GoldEditSet] = []
    cur_source: list[str] | None = None
    cur_edits: list[EditSpan] = []

    def flush() -> None:
        nonlocal cur_source, cur_edits
        if cur_source is not None:
            sources.append(cur_source)
            gold_sets.append(GoldEditSet(frozenset(cur_edits)))
        cur_source, cur_edits = None, []

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                flush()
                continue
            if line.startswith("S "):
                if cur_source is not None:
                    raise M2FormatError(f"{path}:{lineno}: second S line in block")
                cur_source = line[2:].split()
            elif line.startswith("A "):
                if cur_source is None:
                    raise M2FormatError(f"{path}:{lineno}: A line before S line")
                fields = line[2:].split("|||")
                if len(fields) < 3:
                    raise M2FormatError(f"{path}:{lineno}: expected >=3 |||-fields")
                try:
                    start_s, end_s = fields[0].split()
                    start, end = int(start_s), int(end_s)
                except ValueError as exc:
                    raise M2FormatError(f"{path}:{lineno}: bad offsets {fields[0]!r}") from exc
                if fields[1] == "noop" or (start, end) == (-1, -1):
                    continue
                replacement = fields[2]
                if replacement == _NONE_MARKER:
                    replacement = ""
                if not 0 <= start <= end <= len(cur_source):
                    raise M2FormatError(
                        f"{path}:{lineno}: span [{start},{end}) outside source "
                        f"of length {len(cur_source)}"
                    )
                try:
                    cur_edits.append(EditSpan(start, end, replacement))
                except ValueError as exc:
                    raise M2FormatError(f"{path}:{lineno}: {exc}") from exc
            else:
                raise M2FormatError(f"{path}:{lineno}: unrecognized line {line!r}")
    flush()
    return sources, gold_sets


def write_m2(
    sources: Sequence[Sequence[str]],
    gold_sets: Sequence[GoldEditSet],
    path: str | Path,
) -> None:
    """Emit gold edits in the block format read by :func:`parse_m2`."""
    if len(sources) != len(gold_sets):
        raise ValueError("sources / gold_sets length mismatch")
    with open(path, "w", encoding="utf-8") as fh:
        for src, gold in zip(sources, gold_sets):
            fh.write("S " + " ".join(src) + "\n")
            for edit in sorted(gold.edits):
                replacement = edit.replacement or _NONE_MARKER
                fh.write(
                    f"A {edit.start} {edit.end}|||UNK|||{replacement}|||REQUIRED|||{_NONE_MARKER}|||0\n"
                )
            fh.write("\n")
