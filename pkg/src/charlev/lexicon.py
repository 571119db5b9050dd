"""Word-count semantic constraints for character edits.

A perturbation is admissible only if it strictly lowers the number of
dictionary words in the sentence: breaking an existing word is allowed,
creating a new one is not. Words are maximal runs of alphabetic characters,
matched case-insensitively against a word set.
"""

from __future__ import annotations

import logging
from importlib import resources

log = logging.getLogger(__name__)

_BUNDLED_WORDS = "words_en.txt"


class Lexicon:
    """An immutable lowercase word set."""

    def __init__(self, words):
        clean = set()
        for w in words:
            w = w.lower()
            if w and w.isalpha():
                clean.add(w)
        self._words = frozenset(clean)

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: str) -> bool:
        return word in self._words

    @property
    def words(self) -> frozenset[str]:
        return self._words


def load_lexicon(path: str) -> Lexicon:
    """Load a word list: UTF-8, one word per line, '#' lines are comments.

    Entries are lowercased and deduplicated; non-alphabetic entries are
    dropped. An empty result is legal but logged as a warning.
    """
    words = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            words.append(line)
    lex = Lexicon(words)
    if len(lex) == 0:
        log.warning("lexicon %s is empty", path)
    return lex


def default_lexicon() -> Lexicon:
    """The word list bundled with the package."""
    text = resources.files("charlev.data").joinpath(_BUNDLED_WORDS).read_text("utf-8")
    return Lexicon(line.strip() for line in text.splitlines() if not line.startswith("#"))


def tokenize(s: str) -> list[str]:
    """Maximal runs of alphabetic characters, lowercased."""
    tokens = []
    cur = []
    for c in s:
        if c.isalpha():
            cur.append(c)
        elif cur:
            tokens.append("".join(cur).lower())
            cur = []
    if cur:
        tokens.append("".join(cur).lower())
    return tokens


def count_words(s: str, lex: Lexicon) -> int:
    """Number of tokens of s present in the lexicon, with multiplicity."""
    return sum(1 for t in tokenize(s) if t in lex)


def valid(s: str, s_pert: str, lex: Lexicon) -> bool:
    """Accept the perturbation only if it strictly decreases the word count."""
    return count_words(s, lex) > count_words(s_pert, lex)
