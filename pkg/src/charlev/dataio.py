"""Dataset ingestion, the on-disk embedding store, and synthetic corpora."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TextRecord:
    text: str
    label: int | None = None


def load_jsonl(path: str) -> list[TextRecord]:
    """Read one JSON object per line with a "text" field and optional "label".

    Blank lines are skipped; any malformed line raises with its line number.
    """
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict) or "text" not in obj:
                raise ValueError(f"{path}:{lineno}: missing \"text\" field")
            text = obj["text"]
            if not isinstance(text, str) or not text.strip():
                raise ValueError(f"{path}:{lineno}: \"text\" must be a nonempty string")
            label = obj.get("label")
            if label is not None and not isinstance(label, int):
                raise ValueError(f"{path}:{lineno}: \"label\" must be an integer")
            records.append(TextRecord(text=text, label=label))
    return records


def write_jsonl(records, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            obj = {"text": r.text}
            if r.label is not None:
                obj["label"] = r.label
            f.write(json.dumps(obj, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class EmbeddingStore:
    dim: int
    count: int
    rows: np.ndarray  # (count, dim) float32

    def __post_init__(self):
        if self.rows.shape != (self.count, self.dim):
            raise ValueError("rows shape does not match header")


def write_store(rows: np.ndarray, path: str) -> None:
    """Header line {"dim","count"} then row-major little-endian float32."""
    rows = np.asarray(rows)
    if rows.ndim != 2:
        raise ValueError("rows must be a 2-d array")
    if not np.all(np.isfinite(rows)):
        raise ValueError("store values must be finite")
    data = np.ascontiguousarray(rows, dtype="<f4")
    header = {"dim": rows.shape[1], "count": rows.shape[0]}
    with open(path, "wb") as f:
        f.write((json.dumps(header) + "\n").encode("utf-8"))
        f.write(data.tobytes())


def read_store(path: str) -> EmbeddingStore:
    with open(path, "rb") as f:
        line = f.readline()
        try:
            header = json.loads(line.decode("utf-8"))
            dim, count = int(header["dim"]), int(header["count"])
        except (ValueError, KeyError, UnicodeDecodeError) as exc:
            raise ValueError(f"{path}: corrupt store header") from exc
        payload = f.read()
    expected = dim * count * 4
    if len(payload) != expected:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    rows = np.frombuffer(payload, dtype="<f4").reshape(count, dim).astype(np.float32)
    if not np.all(np.isfinite(rows)):
        raise ValueError(f"{path}: store contains non-finite values")
    return EmbeddingStore(dim=dim, count=count, rows=rows)


# Topic words are assigned to classes in groups of eight; fillers are shared
# by every class. All entries appear in the bundled lexicon.
WORD_BANK = (
    "bear", "wolf", "fox", "deer", "hawk", "owl", "fish", "crab",
    "rain", "snow", "wind", "storm", "cloud", "frost", "mist", "thunder",
    "bread", "cheese", "apple", "grape", "honey", "salt", "pepper", "corn",
    "ship", "train", "wagon", "bridge", "tower", "castle", "harbor", "road",
    "gold", "silver", "copper", "iron", "stone", "glass", "timber", "clay",
    "violin", "drum", "flute", "harp", "organ", "cello", "trumpet", "bell",
    "river", "lake", "hill", "valley", "cliff", "meadow", "forest", "marsh",
    "king", "queen", "knight", "bishop", "duke", "baron", "prince", "crown",
)

FILLER_WORDS = ("the", "and", "with", "some", "near", "very",
                "quite", "rather", "from", "into", "over", "under")

TOPIC_WORDS_PER_CLASS = 8


def _assign_topics(rng: np.random.Generator, classes: int) -> list[list[str]]:
    if classes * TOPIC_WORDS_PER_CLASS > len(WORD_BANK):
        raise ValueError(f"word bank supports at most "
                         f"{len(WORD_BANK) // TOPIC_WORDS_PER_CLASS} classes")
    perm = rng.permutation(len(WORD_BANK))
    return [[WORD_BANK[perm[c * TOPIC_WORDS_PER_CLASS + j]]
             for j in range(TOPIC_WORDS_PER_CLASS)]
            for c in range(classes)]


def synth_topics(classes: int, seed: int) -> list[list[str]]:
    """The per-class topic words that synth_corpus(classes, ..., seed) uses."""
    return _assign_topics(np.random.default_rng(seed), classes)


def synth_corpus(classes: int, per_class: int, seed: int) -> list[TextRecord]:
    """Labelled sentences of 5-10 class topic words plus 0-3 shared fillers.

    Classes own pairwise-disjoint topic-word sets; records interleave classes
    so any prefix is roughly balanced. Fully determined by the seed.
    """
    if classes < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(seed)
    topics = _assign_topics(rng, classes)
    records = []
    for _ in range(per_class):
        for c in range(classes):
            n_topic = int(rng.integers(5, 11))
            words = [topics[c][int(i)]
                     for i in rng.integers(0, TOPIC_WORDS_PER_CLASS, size=n_topic)]
            n_fill = int(rng.integers(0, 4))
            words += [FILLER_WORDS[int(i)]
                      for i in rng.integers(0, len(FILLER_WORDS), size=n_fill)]
            rng.shuffle(words)
            records.append(TextRecord(text=" ".join(words), label=c))
    return records
