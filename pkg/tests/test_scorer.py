"""Tests for edit extraction, matching, and P/R/F0.5 computation."""

import numpy as np
import pytest

from oracles import alignment_to_edits, enumerate_alignments, oracle_corpus_score

from geckit.scorer import (
    EditSpan,
    GoldEditSet,
    M2FormatError,
    apply_edits,
    corpus_score,
    extract_edits,
    f_beta,
    parse_m2,
    write_m2,
)


def edits_as_tuples(edits):
    return frozenset((e.start, e.end, e.replacement) for e in edits)


def random_sentence_pair(rng, max_len=8, alphabet=("a", "b", "c", "d")):
    n = int(rng.integers(0, max_len + 1))
    m = int(rng.integers(0, max_len + 1))
    src = [alphabet[int(rng.integers(len(alphabet)))] for _ in range(n)]
    hyp = [alphabet[int(rng.integers(len(alphabet)))] for _ in range(m)]
    return src, hyp


def random_gold(rng, src, hyp, max_edits=3):
    """A plausible random gold set: edits drawn from one random minimal
    alignment of src against a random other hypothesis."""
    other = [hyp[int(rng.integers(len(hyp)))] if hyp else "a" for _ in range(len(hyp))]
    alignments = enumerate_alignments(src, other)
    ops = alignments[int(rng.integers(len(alignments)))]
    candidates = sorted(alignment_to_edits(ops, src, other))
    rng.shuffle(candidates)
    return frozenset(candidates[: int(rng.integers(0, max_edits + 1))])


class TestFBeta:
    @pytest.mark.parametrize(
        "p,r,expected",
        [
            (41.47, 22.62, 35.55),
            (42.97, 23.98, 37.10),
            (42.31, 23.57, 36.51),
            (38.22, 23.72, 34.05),
            (39.43, 22.80, 34.41),
            (44.36, 22.18, 36.97),
        ],
    )
    def test_published_rows(self, p, r, expected):
        assert f_beta(p, r) == pytest.approx(expected, abs=0.01)

    def test_fixed_point(self):
        for x in (0.1, 0.5, 37.10, 99.0):
            assert f_beta(x, x) == pytest.approx(x, abs=1e-12)

    def test_both_zero(self):
        assert f_beta(0.0, 0.0) == 0.0

    def test_precision_weighted_above_f1(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            r = float(rng.uniform(0.01, 0.5))
            p = float(rng.uniform(r + 0.01, 1.0))
            assert f_beta(p, r, 0.5) > f_beta(p, r, 1.0)


class TestExtractEdits:
    def test_identity(self):
        edits, capped = extract_edits(["a", "b"], ["a", "b"])
        assert edits == frozenset() and not capped

    def test_substitution(self):
        edits, _ = extract_edits(["a", "b", "c"], ["a", "x", "c"])
        assert edits_as_tuples(edits) == {(1, 2, "x")}

    def test_deletion(self):
        edits, _ = extract_edits(["a", "b"], ["a"])
        assert edits_as_tuples(edits) == {(1, 2, "")}

    def test_insertion(self):
        edits, _ = extract_edits(["a"], ["x", "a"])
        assert edits_as_tuples(edits) == {(0, 0, "x")}

    def test_both_empty(self):
        edits, _ = extract_edits([], [])
        assert edits == frozenset()

    def test_gold_steers_alignment_choice(self):
        # "a b" -> "b" admits two minimal alignments: delete "a" (edit
        # (0,1,"")) or rewrite both tokens. Gold makes either win.
        src, hyp = ["a", "b"], ["b"]
        gold = GoldEditSet(frozenset({EditSpan(0, 1, "")}))
        edits, _ = extract_edits(src, hyp, gold)
        assert edits_as_tuples(edits) == {(0, 1, "")}

    def test_edit_soundness_random(self):
        rng = np.random.default_rng(42)
        for _ in range(500):
            src, hyp = random_sentence_pair(rng)
            edits, _ = extract_edits(src, hyp)
            assert apply_edits(src, edits) == hyp

    def test_path_cap_flags_sentence(self):
        # 8 deletions out of 16 identical tokens: C(16,8) = 12870 minimal
        # alignments, above a tiny cap.
        src, hyp = ["t"] * 16, ["t"] * 8
        edits, capped = extract_edits(src, hyp, path_cap=10)
        assert capped
        assert apply_edits(src, edits) == hyp


class TestCorpusScore:
    def test_no_edits_anywhere_is_perfect(self):
        report = corpus_score([["a"]], [["a"]], [GoldEditSet()])
        assert (report.precision, report.recall, report.f05) == (1.0, 1.0, 1.0)

    def test_exact_match_is_perfect(self):
        gold = GoldEditSet(frozenset({EditSpan(0, 1, "x")}))
        report = corpus_score([["a", "b"]], [["x", "b"]], [gold])
        assert report.precision == 1.0 and report.recall == 1.0

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            corpus_score([["a"]], [], [])

    def test_monotone_in_matching_gold(self):
        src, hyp = ["a", "b", "c"], ["a", "x", "c"]
        base = corpus_score([src], [hyp], [GoldEditSet()])
        richer = corpus_score([src], [hyp], [GoldEditSet(frozenset({EditSpan(1, 2, "x")}))])
        assert richer.precision >= base.precision
        assert richer.recall >= base.recall
        assert richer.f05 >= base.f05

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(2024)
        sources, hypotheses, gold_tuples, gold_sets = [], [], [], []
        for _ in range(200):
            src, hyp = random_sentence_pair(rng)
            gold = random_gold(rng, src, hyp)
            sources.append(src)
            hypotheses.append(hyp)
            gold_tuples.append(gold)
            gold_sets.append(GoldEditSet(frozenset(EditSpan(*t) for t in gold)))
        report = corpus_score(sources, hypotheses, gold_sets)
        p, r, f = oracle_corpus_score(sources, hypotheses, gold_tuples)
        assert report.capped_sentences == []
        assert report.precision == pytest.approx(p, abs=0)
        assert report.recall == pytest.approx(r, abs=0)
        assert report.f05 == pytest.approx(f, abs=0)


class TestGoldEditSet:
    def test_rejects_overlap(self):
        with pytest.raises(ValueError):
            GoldEditSet(frozenset({EditSpan(0, 2, "x"), EditSpan(1, 3, "y")}))

    def test_rejects_double_insertion_at_same_point(self):
        with pytest.raises(ValueError):
            GoldEditSet(frozenset({EditSpan(1, 1, "x"), EditSpan(1, 1, "y")}))

    def test_rejects_noop_edit(self):
        with pytest.raises(ValueError):
            EditSpan(1, 1, "")


class TestM2Format:
    def test_source_only_block(self, tmp_path):
        path = tmp_path / "g.m2"
        path.write_text("S a b c\n\n", encoding="utf-8")
        sources, gold = parse_m2(path)
        assert sources == [["a", "b", "c"]]
        assert len(gold[0]) == 0

    def test_annotation_line(self, tmp_path):
        path = tmp_path / "g.m2"
        path.write_text("S a b c\nA 1 2|||S|||x|||REQUIRED|||-NONE-|||0\n\n", encoding="utf-8")
        _, gold = parse_m2(path)
        assert gold[0].edits == frozenset({EditSpan(1, 2, "x")})

    def test_noop_annotation(self, tmp_path):
        path = tmp_path / "g.m2"
        path.write_text("S a b\nA -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||0\n\n", encoding="utf-8")
        _, gold = parse_m2(path)
        assert len(gold[0]) == 0

    def test_malformed_line_reports_lineno(self, tmp_path):
        path = tmp_path / "g.m2"
        path.write_text("S a b\nA x y|||S|||z\n", encoding="utf-8")
        with pytest.raises(M2FormatError, match=":2:"):
            parse_m2(path)

    def test_round_trip_random_gold_sets(self, tmp_path):
        rng = np.random.default_rng(9)
        sources, gold_sets = [], []
        for _ in range(100):
            src, hyp = random_sentence_pair(rng, max_len=6)
            if not src:
                src = ["a"]
            gold = random_gold(rng, src, hyp)
            sources.append(src)
            gold_sets.append(GoldEditSet(frozenset(EditSpan(*t) for t in gold)))
        path = tmp_path / "g.m2"
        write_m2(sources, gold_sets, path)
        sources2, gold2 = parse_m2(path)
        write_m2(sources2, gold2, tmp_path / "g2.m2")
        sources3, gold3 = parse_m2(tmp_path / "g2.m2")
        assert sources3 == sources
        assert gold3 == gold_sets
