import logging

import pytest
from hypothesis import given
from hypothesis import strategies as st

from charlev import Lexicon, count_words, default_lexicon, load_lexicon, valid


@pytest.fixture(scope="module")
def lex():
    return Lexicon(["a", "big", "bear", "beer", "grizzly", "burly"])


def write_words(tmp_path, lines):
    path = tmp_path / "words.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


class TestLoadLexicon:
    def test_lowercases_and_counts(self, tmp_path):
        lex = load_lexicon(write_words(tmp_path, ["Bear", "beer"]))
        assert len(lex) == 2 and "bear" in lex and "beer" in lex

    def test_dedupes(self, tmp_path):
        assert len(load_lexicon(write_words(tmp_path, ["a", "a"]))) == 1

    def test_empty_file_warns(self, tmp_path, caplog):
        path = tmp_path / "empty.txt"
        path.write_text("", encoding="utf-8")
        with caplog.at_level(logging.WARNING):
            lex = load_lexicon(str(path))
        assert len(lex) == 0
        assert any("empty" in r.message for r in caplog.records)

    def test_comments_and_nonalpha_dropped(self, tmp_path):
        lex = load_lexicon(write_words(tmp_path, ["# header", "ok", "not-a-word", "x1"]))
        assert lex.words == frozenset({"ok"})

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_lexicon(str(tmp_path / "nope.txt"))


class TestCountWords:
    def test_counts_known_tokens(self, lex):
        assert count_words("A big bear", lex) == 3

    def test_broken_word_drops_out(self, lex):
        assert count_words("gri?zly bear", lex) == 1

    def test_empty(self, lex):
        assert count_words("", lex) == 0

    def test_multiplicity(self, lex):
        assert count_words("bear bear", lex) == 2

    def test_case_invariance(self, lex):
        assert count_words("A BIG BEAR", lex) == count_words("a big bear", lex)

    def test_separators(self, lex):
        assert count_words("big,bear!beer", lex) == 3


class TestValid:
    def test_breaking_a_word_is_valid(self, lex):
        assert valid("a grizzly bear", "a gri?zly bear", lex)

    def test_word_swap_is_invalid(self, lex):
        # "bear" turning into "beer" keeps the count at 3
        assert not valid("a grizzly bear", "a grizzly beer", lex)

    def test_irreflexive(self, lex):
        assert not valid("a big bear", "a big bear", lex)

    @given(st.text(alphabet="aber giz?!", max_size=16))
    def test_irreflexive_property(self, s):
        lex = Lexicon(["a", "bear", "big"])
        assert not valid(s, s, lex)

    def test_monotone_gate(self, lex):
        s, s2 = "a grizzly bear", "a gri?zly bear"
        if valid(s, s2, lex):
            assert count_words(s2, lex) < count_words(s, lex)


class TestBundledList:
    def test_loads_and_has_common_words(self):
        lex = default_lexicon()
        assert len(lex) > 3000
        for w in ("bear", "beer", "a", "big", "grizzly", "burly"):
            assert w in lex
        assert "gri" not in lex and "zly" not in lex
