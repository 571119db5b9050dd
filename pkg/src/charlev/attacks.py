"""Character-edit attacks against an embedding encoder.

Three search strategies over the Levenshtein ball of radius k around a
sentence, all driving a shared scoring contract (higher = better for the
attacker):

* leaf_attack      — per distance step, probe a test character at rho random
                     positions, keep the best position, then probe rho random
                     characters there. Exactly two batched encoder calls per
                     step for the whole batch, so cost is independent of
                     sentence length.
* charmer_attack   — probe the test character at every position, keep the
                     top-n positions, then try the full character pool at
                     each of them.
* bruteforce_attack — exact argmax over every sentence within distance k
                     (single-edit enumerations chained k times).

With a lexicon, candidates that do not strictly reduce the sentence's
dictionary-word count revert to their predecessor before scoring.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .encoder import CountingEncoder, count_encoder_calls  # noqa: F401  (re-export)
from .lexicon import Lexicon, valid
from .textspace import Alphabet, apply_edit, enumerate_edits, levenshtein


class BudgetExceededError(RuntimeError):
    """The exhaustive search would score more candidates than allowed."""


def _unit(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("zero-norm reference vector")
    return v / n


def _row_sims(embs: np.ndarray, unit_ref: np.ndarray) -> np.ndarray:
    """Cosine of each row against a unit reference; zero-norm rows get NaN."""
    norms = np.linalg.norm(embs, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(norms > 0.0, (embs @ unit_ref) / norms, np.nan)


def _nan_to_worst(scores: np.ndarray) -> np.ndarray:
    # A candidate with undefined similarity can never win the argmax.
    return np.where(np.isnan(scores), -np.inf, scores)


class EmbedDistance:
    """Squared Euclidean distance to a reference embedding."""

    kind = "embed-dist"

    def __init__(self, ref: np.ndarray):
        self.ref = np.asarray(ref, dtype=np.float64)

    def scores(self, embs: np.ndarray) -> np.ndarray:
        d = embs - self.ref
        return np.einsum("ij,ij->i", d, d)


class NegSelfSimilarity:
    """Negated cosine similarity to a reference embedding."""

    kind = "neg-sim"

    def __init__(self, ref: np.ndarray):
        self._unit_ref = _unit(ref)

    def scores(self, embs: np.ndarray) -> np.ndarray:
        return _nan_to_worst(-_row_sims(embs, self._unit_ref))


class TargetSimilarity:
    """Cosine similarity to a target embedding."""

    kind = "target-sim"

    def __init__(self, target: np.ndarray):
        self._unit_target = _unit(target)

    def scores(self, embs: np.ndarray) -> np.ndarray:
        return _nan_to_worst(_row_sims(embs, self._unit_target))


class ClassificationCE:
    """Cross-entropy of the true class under scaled cosine-similarity logits."""

    kind = "class-ce"

    def __init__(self, anchors: Sequence[np.ndarray], true_label: int,
                 logit_scale: float = 100.0):
        a = np.stack([_unit(v) for v in anchors])
        if len(a) < 2:
            raise ValueError("need at least two anchors")
        if not 0 <= true_label < len(a):
            raise ValueError("true_label out of range")
        self._anchors = a
        self.true_label = true_label
        self.logit_scale = float(logit_scale)

    def scores(self, embs: np.ndarray) -> np.ndarray:
        norms = np.linalg.norm(embs, axis=1)
        safe = np.where(norms > 0.0, norms, 1.0)
        logits = self.logit_scale * (embs @ self._anchors.T) / safe[:, None]
        mx = logits.max(axis=1)
        lse = mx + np.log(np.exp(logits - mx[:, None]).sum(axis=1))
        return np.where(norms > 0.0, lse - logits[:, self.true_label], -np.inf)


@dataclass(frozen=True)
class AttackConfig:
    """Search-budget and threat-model knobs shared by the attacks.

    rho=None means exhaustive: all positions in stage 1, the whole character
    pool in stage 2. include_deletion adds the filler character to the stage-2
    pool, enabling deletions.
    """

    k: int
    rho: int | None = 20
    test_char: str = " "
    constrained: bool = False
    include_deletion: bool = True
    seed: int = 0
    charmer_n: int = 20

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.rho is not None and self.rho < 1:
            raise ValueError("rho must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class AttackResult:
    input: str
    output: str
    distance: int
    steps: list[dict] = field(default_factory=list)
    objective_kind: str = ""
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "input": self.input,
            "output": self.output,
            "distance": self.distance,
            "steps": self.steps,
            "objective_kind": self.objective_kind,
            "seed": self.seed,
        }


def _char_pool(alphabet: Alphabet, include_deletion: bool) -> tuple[str, ...]:
    return alphabet.chars + ((alphabet.xi,) if include_deletion else ())


def _check_test_char(alphabet: Alphabet, test_char: str) -> None:
    if test_char != alphabet.xi and test_char not in alphabet:
        raise ValueError(f"test character {test_char!r} is outside the alphabet")


def _apply_constraint(prev: str, cands: list[str], lex: Lexicon | None) -> list[str]:
    if lex is None:
        return cands
    return [c if valid(prev, c, lex) else prev for c in cands]


def leaf_attack(encoder, batch: Sequence[str], objectives, cfg: AttackConfig,
                alphabet: Alphabet, lexicon: Lexicon | None = None) -> list[AttackResult]:
    """Two-stage randomized attack over a whole batch at once.

    Per distance step and sentence i, a PRNG stream seeded with
    [cfg.seed, i, step] is consumed in order: first the stage-1 position
    sample, then the stage-2 character sample. Samples are uniform without
    replacement; when rho is None or covers the whole range, every index is
    taken in natural order and the stream is not consumed. Candidates that
    fail the constraint revert to the current sentence but are still scored,
    and ties in the argmax go to the lowest candidate index.

    The encoder sees exactly two batched calls per distance step, each
    covering every sentence's candidates.
    """
    batch = list(batch)
    if not isinstance(objectives, (list, tuple)):
        objectives = [objectives] * len(batch)
    if len(objectives) != len(batch):
        raise ValueError("one objective per sentence required")
    if cfg.constrained and lexicon is None:
        raise ValueError("constrained attack requires a lexicon")
    _check_test_char(alphabet, cfg.test_char)
    lex = lexicon if cfg.constrained else None
    pool = _char_pool(alphabet, cfg.include_deletion)

    current = list(batch)
    steps: list[list[dict]] = [[] for _ in batch]

    for step in range(cfg.k):
        rngs = [np.random.default_rng([cfg.seed, i, step]) for i in range(len(batch))]

        all_pos: list[np.ndarray] = []
        cand_lists: list[list[str]] = []
        for i, cur in enumerate(current):
            n_slots = 2 * len(cur) + 1
            if cfg.rho is None or cfg.rho >= n_slots:
                pos = np.arange(n_slots)
            else:
                pos = rngs[i].choice(n_slots, size=cfg.rho, replace=False)
            cands = [apply_edit(cur, int(p), cfg.test_char, alphabet.xi) for p in pos]
            all_pos.append(pos)
            cand_lists.append(_apply_constraint(cur, cands, lex))

        best_pos = _argmax_per_sentence(encoder, cand_lists, objectives, all_pos,
                                        steps, stage=1)

        cand_lists = []
        for i, cur in enumerate(current):
            if cfg.rho is None or cfg.rho >= len(pool):
                idx = np.arange(len(pool))
            else:
                idx = rngs[i].choice(len(pool), size=cfg.rho, replace=False)
            cands = [apply_edit(cur, best_pos[i], pool[int(j)], alphabet.xi) for j in idx]
            cand_lists.append(_apply_constraint(cur, cands, lex))

        flat = [c for cands in cand_lists for c in cands]
        scores = _score_flat(encoder, flat, cand_lists, objectives)
        off = 0
        for i, cands in enumerate(cand_lists):
            sc = scores[off:off + len(cands)]
            j = int(np.argmax(sc))
            accepted = cands[j]
            steps[i].append({
                "stage": 2,
                "candidates_scored": len(cands),
                "best_score": float(sc[j]),
                "accepted": accepted,
                "reverted": accepted == current[i],
            })
            current[i] = accepted
            off += len(cands)

    return [
        AttackResult(input=s, output=out, distance=levenshtein(s, out),
                     steps=st, objective_kind=obj.kind, seed=cfg.seed)
        for s, out, st, obj in zip(batch, current, steps, objectives)
    ]


def _score_flat(encoder, flat: list[str], cand_lists, objectives) -> np.ndarray:
    embs = encoder.encode_batch(flat)
    scores = np.empty(len(flat), dtype=np.float64)
    off = 0
    for cands, obj in zip(cand_lists, objectives):
        scores[off:off + len(cands)] = obj.scores(embs[off:off + len(cands)])
        off += len(cands)
    return scores


def _argmax_per_sentence(encoder, cand_lists, objectives, all_pos, steps, stage):
    flat = [c for cands in cand_lists for c in cands]
    scores = _score_flat(encoder, flat, cand_lists, objectives)
    best = []
    off = 0
    for i, cands in enumerate(cand_lists):
        sc = scores[off:off + len(cands)]
        j = int(np.argmax(sc))
        best.append(int(all_pos[i][j]))
        steps[i].append({
            "stage": stage,
            "candidates_scored": len(cands),
            "best_score": float(sc[j]),
        })
        off += len(cands)
    return best


def charmer_attack(encoder, s: str, objective, k: int, n: int, alphabet: Alphabet,
                   lexicon: Lexicon | None = None, test_char: str = " ",
                   include_deletion: bool = True) -> AttackResult:
    """Exhaustive-position baseline: per step, score the test character at all
    2|s|+1 slots, keep the top-n slots, then try the whole character pool at
    each kept slot. Fully deterministic; passing a lexicon enables the
    constraint at both stages.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_test_char(alphabet, test_char)
    pool = _char_pool(alphabet, include_deletion)
    cur = s
    steps: list[dict] = []

    for _ in range(k):
        n_slots = 2 * len(cur) + 1
        cands1 = _apply_constraint(
            cur, [apply_edit(cur, p, test_char, alphabet.xi) for p in range(n_slots)],
            lexicon)
        sc1 = objective.scores(encoder.encode_batch(cands1))
        keep = np.argsort(-sc1, kind="stable")[:n]
        steps.append({"stage": 1, "candidates_scored": n_slots,
                      "best_score": float(sc1[keep[0]])})

        cands2 = [apply_edit(cur, int(p), c, alphabet.xi) for p in keep for c in pool]
        cands2 = _apply_constraint(cur, cands2, lexicon)
        sc2 = objective.scores(encoder.encode_batch(cands2))
        j = int(np.argmax(sc2))
        accepted = cands2[j]
        steps.append({"stage": 2, "candidates_scored": len(cands2),
                      "best_score": float(sc2[j]), "accepted": accepted,
                      "reverted": accepted == cur})
        cur = accepted

    return AttackResult(input=s, output=cur, distance=levenshtein(s, cur),
                        steps=steps, objective_kind=objective.kind, seed=None)


def bruteforce_attack(encoder, s: str, objective, k: int, alphabet: Alphabet,
                      lexicon: Lexicon | None = None,
                      budget: int = 500_000) -> AttackResult:
    """Exact argmax over every sentence within Levenshtein distance k.

    Candidates are built by chaining single-edit enumerations; with a lexicon,
    each chaining step keeps only edits that are valid against their
    predecessor. Raises BudgetExceededError once the candidate set would
    exceed the budget. Ties prefer the unperturbed sentence, then
    lexicographic order.
    """
    seen = {s}
    frontier = [s]
    for _ in range(k):
        nxt = set()
        for x in frontier:
            edits = enumerate_edits(x, alphabet)
            if lexicon is not None:
                edits = {e for e in edits if valid(x, e, lexicon)}
            nxt |= edits - seen
            if len(seen) + len(nxt) > budget:
                raise BudgetExceededError(
                    f"more than {budget} candidates at distance <= {k}")
        seen |= nxt
        frontier = sorted(nxt)
        if not frontier:
            break

    candidates = [s] + sorted(seen - {s})
    best_idx = 0
    best_score = -np.inf
    chunk = 8192
    for start in range(0, len(candidates), chunk):
        part = candidates[start:start + chunk]
        sc = objective.scores(encoder.encode_batch(part))
        j = int(np.argmax(sc))
        if sc[j] > best_score:
            best_score = float(sc[j])
            best_idx = start + j

    out = candidates[best_idx]
    steps = [{"stage": "exhaustive", "candidates_scored": len(candidates),
              "best_score": best_score, "accepted": out,
              "reverted": out == s}]
    return AttackResult(input=s, output=out, distance=levenshtein(s, out),
                        steps=steps, objective_kind=objective.kind, seed=None)


def random_attack(encoder, batch, objectives, cfg: AttackConfig, alphabet: Alphabet,
                  lexicon: Lexicon | None = None) -> list[AttackResult]:
    """One random position, one random character per step (rho = 1)."""
    cfg1 = AttackConfig(k=cfg.k, rho=1, test_char=cfg.test_char,
                        constrained=cfg.constrained,
                        include_deletion=cfg.include_deletion, seed=cfg.seed,
                        charmer_n=cfg.charmer_n)
    return leaf_attack(encoder, batch, objectives, cfg1, alphabet, lexicon)
