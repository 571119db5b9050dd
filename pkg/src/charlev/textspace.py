"""String-edit algebra: alphabets, expansion/contraction, single edits, edit distance.

Sentences are plain Python strings over an alphabet of Unicode scalar values.
A sentence of length m expands to a string of length 2m+1 in which a special
filler character sits at every even index; replacing one character of the
expanded form and contracting again expresses insertion, substitution and
deletion uniformly, so "one edit" always means "one replacement in the
expanded sentence".
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Private-use scalar: guaranteed absent from ordinary text corpora.
DEFAULT_XI = ""


@dataclass(frozen=True)
class Alphabet:
    """An ordered character set plus the reserved filler character xi.

    xi must not be a member of the alphabet itself; it marks the slots of an
    expanded sentence and, when used as a replacement character, performs a
    deletion.
    """

    chars: tuple[str, ...]
    xi: str = DEFAULT_XI
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.chars:
            raise ValueError("alphabet must be nonempty")
        if len(set(self.chars)) != len(self.chars):
            raise ValueError("alphabet characters must be unique")
        for c in self.chars:
            if len(c) != 1:
                raise ValueError(f"alphabet entries must be single characters, got {c!r}")
        if len(self.xi) != 1:
            raise ValueError("xi must be a single character")
        if self.xi in self.chars:
            raise ValueError("xi must not be a member of the alphabet")
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.chars)})

    def __len__(self) -> int:
        return len(self.chars)

    def __contains__(self, c: str) -> bool:
        return c in self._index

    def index(self, c: str) -> int | None:
        """Index of c in the alphabet, or None for unknown characters."""
        return self._index.get(c)

    @classmethod
    def from_text(cls, text: str, xi: str = DEFAULT_XI) -> "Alphabet":
        """Alphabet of the distinct characters of text, in first-seen order."""
        return cls(tuple(dict.fromkeys(text)), xi=xi)


def expand(s: str, xi: str = DEFAULT_XI) -> str:
    """Interleave xi around every character of s; length 2*len(s)+1."""
    return xi + xi.join(s) + xi if s else xi


def contract(e: str, xi: str = DEFAULT_XI) -> str:
    """Remove every occurrence of xi, preserving the other characters."""
    return e.replace(xi, "")


def replace_at(e: str, i: int, c: str) -> str:
    """Replace the character of e at position i with c."""
    if not 0 <= i < len(e):
        raise IndexError(f"position {i} out of range for length {len(e)}")
    return e[:i] + c + e[i + 1 :]


def apply_edit(s: str, pos: int, c: str, xi: str = DEFAULT_XI) -> str:
    """One edit of s: replace slot pos of the expanded sentence with c, contract.

    Even slots insert c (or no-op when c == xi); odd slots substitute the
    underlying character (or delete it when c == xi). The result is always
    within Levenshtein distance 1 of s.
    """
    return contract(replace_at(expand(s, xi), pos, c), xi)


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (insert/delete/substitute), two-row DP."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def enumerate_edits(s: str, a: Alphabet) -> set[str]:
    """Every sentence reachable from s by exactly one edit, deduplicated.

    Covers all slots of the expanded sentence crossed with the full pool
    (alphabet plus xi); s itself is excluded, so every member sits at
    Levenshtein distance exactly 1.
    """
    out: set[str] = set()
    e = expand(s, a.xi)
    pool = a.chars + (a.xi,)
    for pos in range(len(e)):
        for c in pool:
            if c == e[pos]:
                continue
            out.add(contract(replace_at(e, pos, c), a.xi))
    out.discard(s)
    return out


def load_alphabet(path: str) -> Alphabet:
    """Read an alphabet file: first line xi, then one character per line."""
    with open(path, encoding="utf-8") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines:
        raise ValueError(f"{path}: empty alphabet file")
    xi, rest = lines[0], lines[1:]
    return Alphabet(tuple(rest), xi=xi)


def save_alphabet(a: Alphabet, path: str) -> None:
    """Write the alphabet file format read by load_alphabet."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(a.xi + "\n")
        for c in a.chars:
            f.write(c + "\n")
