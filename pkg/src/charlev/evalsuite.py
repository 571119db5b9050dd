"""Evaluation harnesses: zero-shot classification, retrieval, inversion.

All tasks reduce sentences to embeddings and compare by cosine similarity;
aggregates use sequential reductions in dataset order so reported numbers do
not depend on parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attacks import (AttackConfig, ClassificationCE, TargetSimilarity,
                      bruteforce_attack, charmer_attack, leaf_attack)
from .encoder import cosine_sim
from .lexicon import Lexicon
from .textspace import Alphabet, enumerate_edits


@dataclass(frozen=True)
class AnchorSet:
    """Labelled reference embeddings for nearest-anchor classification."""

    labels: tuple[str, ...]
    vectors: np.ndarray  # (n_labels, h)

    def __post_init__(self):
        if len(self.labels) != len(self.vectors) or len(self.labels) < 2:
            raise ValueError("need >= 2 anchors with one label each")
        if np.any(np.linalg.norm(self.vectors, axis=1) == 0.0):
            raise ValueError("anchor vectors must be nonzero")

    @classmethod
    def from_texts(cls, enc, label_texts) -> "AnchorSet":
        texts = list(label_texts)
        return cls(tuple(texts), enc.encode_batch(texts))


@dataclass(frozen=True)
class RetrievalGallery:
    """Item embeddings plus the ground-truth item for each query index."""

    item_ids: tuple[str, ...]
    vectors: np.ndarray  # (n_items, h)
    pairing: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.item_ids)) != len(self.item_ids):
            raise ValueError("item ids must be unique")
        if len(self.item_ids) != len(self.vectors):
            raise ValueError("one id per vector required")
        known = set(self.item_ids)
        for q, item in self.pairing.items():
            if item not in known:
                raise ValueError(f"pairing for query {q} names unknown item {item!r}")


def zero_shot_predict(s: str, enc, anchors: AnchorSet) -> int:
    """Index of the anchor with the highest cosine similarity; ties go low."""
    emb = enc.encode(s)
    sims = [cosine_sim(emb, a) for a in anchors.vectors]
    return int(np.argmax(sims))


def clean_accuracy(dataset, enc, anchors: AnchorSet) -> float:
    """Fraction of (sentence, label) pairs predicted correctly."""
    dataset = list(dataset)
    hits = sum(1 for s, y in dataset if zero_shot_predict(s, enc, anchors) == y)
    return hits / len(dataset)


def adversarial_accuracy(dataset, enc, anchors: AnchorSet, attack: str,
                         cfg: AttackConfig, alphabet: Alphabet,
                         lexicon: Lexicon | None = None,
                         logit_scale: float = 100.0) -> float:
    """Fraction of samples still classified correctly after the attack.

    Samples already misclassified count as non-robust and are not attacked.
    The attacker maximizes the cross-entropy of the true label over the
    anchors.
    """
    dataset = list(dataset)
    if not dataset:
        raise ValueError("dataset must be nonempty")
    correct = [(i, s, y) for i, (s, y) in enumerate(dataset)
               if zero_shot_predict(s, enc, anchors) == y]
    if not correct:
        return 0.0

    def objective(y):
        return ClassificationCE(anchors.vectors, y, logit_scale=logit_scale)

    if attack == "leaf":
        results = leaf_attack(enc, [s for _, s, _ in correct],
                              [objective(y) for _, _, y in correct],
                              cfg, alphabet, lexicon)
        attacked = [r.output for r in results]
    elif attack == "charmer":
        lex = lexicon if cfg.constrained else None
        attacked = [charmer_attack(enc, s, objective(y), cfg.k, cfg.charmer_n,
                                   alphabet, lex, test_char=cfg.test_char,
                                   include_deletion=cfg.include_deletion).output
                    for _, s, y in correct]
    elif attack == "bruteforce":
        lex = lexicon if cfg.constrained else None
        attacked = [bruteforce_attack(enc, s, objective(y), cfg.k, alphabet,
                                      lex).output
                    for _, s, y in correct]
    else:
        raise ValueError(f"unknown attack {attack!r}")

    robust = sum(1 for (_, _, y), s_adv in zip(correct, attacked)
                 if zero_shot_predict(s_adv, enc, anchors) == y)
    return robust / len(dataset)


def recall_at_k(queries, enc, gallery: RetrievalGallery, k: int,
                query_embs: np.ndarray | None = None) -> float:
    """Fraction of queries whose paired item ranks in the cosine top-k.

    Ranks use a stable descending sort, so equal similarities resolve by
    gallery order. Precomputed query embeddings may be passed to score
    attacked queries without re-encoding.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    queries = list(queries)
    if query_embs is None:
        query_embs = enc.encode_batch(queries)
    norms = np.linalg.norm(gallery.vectors, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm gallery vector")
    items = gallery.vectors / norms[:, None]
    id_to_row = {item: i for i, item in enumerate(gallery.item_ids)}

    hits = 0
    for qi in range(len(queries)):
        e = query_embs[qi]
        ne = np.linalg.norm(e)
        if ne == 0.0:
            raise ValueError("zero-norm query embedding")
        sims = items @ (e / ne)
        ranked = np.argsort(-sims, kind="stable")
        target_row = id_to_row[gallery.pairing[qi]]
        if target_row in ranked[:k]:
            hits += 1
    return hits / len(queries)


def retrieval_attack(query: str, target_text: str, enc, attack: str,
                     cfg: AttackConfig, alphabet: Alphabet,
                     lexicon: Lexicon | None = None) -> str:
    """Perturb the query to pull its embedding toward an unrelated target text."""
    objective = TargetSimilarity(enc.encode(target_text))
    if attack == "leaf":
        return leaf_attack(enc, [query], [objective], cfg, alphabet, lexicon)[0].output
    if attack == "charmer":
        lex = lexicon if cfg.constrained else None
        return charmer_attack(enc, query, objective, cfg.k, cfg.charmer_n, alphabet,
                              lex, test_char=cfg.test_char,
                              include_deletion=cfg.include_deletion).output
    if attack == "bruteforce":
        lex = lexicon if cfg.constrained else None
        return bruteforce_attack(enc, query, objective, cfg.k, alphabet, lex).output
    raise ValueError(f"unknown attack {attack!r}")


@dataclass
class InversionResult:
    sentence: str
    similarity: float
    traces: list[list[float]]  # accepted-move similarities per restart


def invert_embedding(target: np.ndarray, enc, alphabet: Alphabet, steps: int,
                     restarts: int, seed: int, length_cap: int = 64,
                     sample_size: int | None = None,
                     init: str | None = None) -> InversionResult:
    """Greedy hill climb reconstructing a sentence from its embedding.

    Each restart starts from a random sentence (length uniform in
    [1, length_cap]) and repeatedly moves to the best single edit, but only
    while that strictly improves cosine similarity to the target, so each
    restart's accepted-similarity trace is nondecreasing. sample_size caps the
    edits scored per step (uniform subsample); init pins the first restart's
    starting sentence.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    objective = TargetSimilarity(target)
    best_sentence = ""
    best_sim = -np.inf
    traces = []

    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        if r == 0 and init is not None:
            cur = init
        else:
            length = int(rng.integers(1, length_cap + 1))
            cur = "".join(alphabet.chars[i]
                          for i in rng.integers(0, len(alphabet), size=length))
        cur_sim = float(objective.scores(enc.encode_batch([cur]))[0])
        trace = [cur_sim]

        for _ in range(steps):
            moves = sorted(enumerate_edits(cur, alphabet))
            if sample_size is not None and sample_size < len(moves):
                pick = rng.choice(len(moves), size=sample_size, replace=False)
                moves = [moves[int(i)] for i in np.sort(pick)]
            if not moves:
                break
            sims = objective.scores(enc.encode_batch(moves))
            j = int(np.argmax(sims))
            if sims[j] <= cur_sim:
                break
            cur = moves[j]
            cur_sim = float(sims[j])
            trace.append(cur_sim)

        traces.append(trace)
        if cur_sim > best_sim:
            best_sim = cur_sim
            best_sentence = cur

    return InversionResult(sentence=best_sentence, similarity=float(best_sim),
                           traces=traces)


def _words(s: str) -> list[str]:
    return s.split()


def _char_ngrams(s: str, n: int = 3) -> list[str]:
    return [s[i:i + n] for i in range(len(s) - n + 1)]


def word_recall(reference: str, hypothesis: str) -> float:
    """Share of the reference's unique words that appear in the hypothesis."""
    ref = set(_words(reference))
    if not ref:
        return 1.0
    return len(ref & set(_words(hypothesis))) / len(ref)


def token_recall(reference: str, hypothesis: str) -> float:
    """Share of the reference's unique character 3-grams found in the hypothesis."""
    ref = set(_char_ngrams(reference))
    if not ref:
        return 1.0
    return len(ref & set(_char_ngrams(hypothesis))) / len(ref)


_BLEU_FLOOR = 1e-9


def bleu(reference: str, hypothesis: str, max_n: int = 4) -> float:
    """Single-reference BLEU over whitespace words.

    Geometric mean of clipped n-gram precisions for n = 1..max_n times the
    brevity penalty min(1, e^(1 - r/c)); any zero precision is floored at
    1e-9 rather than zeroing the whole score.
    """
    ref = _words(reference)
    hyp = _words(hypothesis)
    if not hyp:
        return 0.0

    log_sum = 0.0
    for n in range(1, max_n + 1):
        hyp_ngrams = [tuple(hyp[i:i + n]) for i in range(len(hyp) - n + 1)]
        ref_ngrams = [tuple(ref[i:i + n]) for i in range(len(ref) - n + 1)]
        if hyp_ngrams:
            ref_counts: dict[tuple, int] = {}
            for g in ref_ngrams:
                ref_counts[g] = ref_counts.get(g, 0) + 1
            clipped = 0
            hyp_counts: dict[tuple, int] = {}
            for g in hyp_ngrams:
                hyp_counts[g] = hyp_counts.get(g, 0) + 1
            for g, c in hyp_counts.items():
                clipped += min(c, ref_counts.get(g, 0))
            p = clipped / len(hyp_ngrams)
        else:
            p = 0.0
        log_sum += np.log(max(p, _BLEU_FLOOR))

    geo = float(np.exp(log_sum / max_n))
    bp = min(1.0, float(np.exp(1.0 - len(ref) / len(hyp))))
    return geo * bp
