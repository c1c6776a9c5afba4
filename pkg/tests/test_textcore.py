"""Tests for tokenization, vocabulary, and corpus I/O."""

import string

import numpy as np
import pytest

from geckit import textcore
from geckit.textcore import (
    BOS,
    EOS,
    PAD,
    UNK,
    UNK_ID,
    CorpusFormatError,
    ParallelPair,
    SegmentationLexicon,
    Vocab,
    filter_by_length,
    load_corpus,
    make_pair,
    segment,
    write_corpus,
)


class TestSegment:
    def test_empty_input(self):
        lex = SegmentationLexicon.from_words(["ab"])
        assert segment("", lex) == []

    def test_greedy_longest_match(self):
        lex = SegmentationLexicon.from_words(["ab", "abc"])
        assert segment("abcd", lex) == ["abc", "d"]

    def test_empty_lexicon_falls_back_to_chars(self):
        lex = SegmentationLexicon.from_words([])
        assert segment("xy", lex) == ["x", "y"]

    def test_partition_property(self):
        """Joining the output words restores the input characters."""
        rng = np.random.default_rng(7)
        alphabet = "abcde"
        words = ["ab", "abc", "cde", "ea", "bb"]
        lex = SegmentationLexicon.from_words(words)
        for _ in range(10_000):
            n = int(rng.integers(0, 12))
            s = "".join(alphabet[int(rng.integers(5))] for _ in range(n))
            assert "".join(segment(s, lex)) == s

    def test_rejects_single_char_entries(self):
        with pytest.raises(ValueError):
            SegmentationLexicon.from_words(["a"])

    def test_max_word_len(self):
        lex = SegmentationLexicon.from_words(["ab", "abcde"])
        assert lex.max_word_len == 5


class TestVocab:
    def make_vocab(self):
        corpus = [make_pair(["b", "a", "b"], ["c", "a"])]
        return Vocab.build(corpus)

    def test_specials_fixed_ids(self):
        v = self.make_vocab()
        assert v.tokens[:4] == [PAD, BOS, EOS, UNK]
        assert [v.index[PAD], v.index[BOS], v.index[EOS], v.index[UNK]] == [0, 1, 2, 3]

    def test_frequency_then_lexicographic_order(self):
        v = self.make_vocab()
        # b and a both occur twice -> tie broken lexicographically; c once.
        assert v.tokens[4:] == ["a", "b", "c"]

    def test_encode_empty(self):
        assert self.make_vocab().encode([]) == []

    def test_oov_encodes_to_unk(self):
        v = self.make_vocab()
        assert v.encode(["zzz"]) == [UNK_ID]

    def test_decode_out_of_range_raises(self):
        v = self.make_vocab()
        with pytest.raises(IndexError):
            v.decode([len(v)])

    def test_round_trip_random_sentences(self):
        v = self.make_vocab()
        in_vocab = v.tokens[4:]
        rng = np.random.default_rng(11)
        for _ in range(1000):
            sent = [in_vocab[int(rng.integers(len(in_vocab)))] for _ in range(int(rng.integers(1, 9)))]
            assert v.decode(v.encode(sent)) == sent

    def test_save_load_round_trip(self, tmp_path):
        v = self.make_vocab()
        path = tmp_path / "vocab.txt"
        v.save(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[:4] == [PAD, BOS, EOS, UNK]
        assert Vocab.load(path).tokens == v.tokens

    def test_min_freq_cutoff(self):
        corpus = [make_pair(["a", "a", "b"], ["a"])]
        v = Vocab.build(corpus, min_freq=2)
        assert "a" in v and "b" not in v


class TestFilterByLength:
    def test_boundaries(self):
        pairs = [
            make_pair(["w"] * 19, ["t"]),
            make_pair(["w"] * 20, ["t"]),
            make_pair(["w"] * 80, ["t"]),
            make_pair(["w"] * 81, ["t"]),
        ]
        kept = filter_by_length(pairs)
        assert [len(p.source) for p in kept] == [20, 80]

    def test_mixed_lengths(self):
        pairs = [make_pair(["w"] * n, ["t"]) for n in (10, 20, 50, 81)]
        kept = filter_by_length(pairs)
        assert [len(p.source) for p in kept] == [20, 50]

    def test_idempotent_and_shrinking(self):
        rng = np.random.default_rng(3)
        pairs = [make_pair(["w"] * int(rng.integers(1, 120)), ["t"]) for _ in range(200)]
        once = filter_by_length(pairs)
        assert len(once) <= len(pairs)
        assert filter_by_length(once) == once

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            filter_by_length([], min_len=5, max_len=4)


class TestCorpusIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        letters = string.ascii_lowercase
        pairs = []
        for _ in range(50):
            src = ["".join(rng.choice(list(letters), 3)) for _ in range(int(rng.integers(1, 6)))]
            tgt = ["".join(rng.choice(list(letters), 3)) for _ in range(int(rng.integers(1, 6)))]
            pairs.append(make_pair(src, tgt))
        path = tmp_path / "corpus.tsv"
        write_corpus(pairs, path)
        assert load_corpus(path) == pairs

    def test_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text("a b\tc d\n\n\ne\tf\n", encoding="utf-8")
        assert len(load_corpus(path)) == 2

    def test_missing_tab_raises_with_line_number(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text("a b c\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError, match=":1:"):
            load_corpus(path)

    def test_empty_side_raises(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text("a\t\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError):
            load_corpus(path)

    def test_tokens_reject_tab_newline(self):
        with pytest.raises(ValueError):
            ParallelPair(("a\tb",), ("c",))

    def test_length_filter_defaults_match_module_constants(self):
        assert textcore.DEFAULT_MIN_LEN == 20
        assert textcore.DEFAULT_MAX_LEN == 80
