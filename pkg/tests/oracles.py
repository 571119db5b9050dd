"""Independent reference implementations used only to cross-check the library.

These deliberately avoid the library's own code paths: the edit distance is a
memoized recursion rather than the iterative table, and the batched-attack
reference is a straight-line transcription of the two-stage procedure working
one sentence at a time with single encodes.
"""

from functools import lru_cache

import numpy as np

from charlev.textspace import apply_edit


def lev_ref(a: str, b: str) -> int:
    """Memoized recursive edit distance."""

    @lru_cache(maxsize=None)
    def d(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            d(i - 1, j) + 1,
            d(i, j - 1) + 1,
            d(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
        )

    return d(len(a), len(b))


def leaf_reference(encoder, batch, objectives, cfg, alphabet, lexicon=None):
    """Straight-line transcription of the two-stage batched attack.

    Follows the documented PRNG protocol: per sentence i and step t the
    stream default_rng([seed, i, t]) yields first the position sample, then
    the character sample, each uniform without replacement; when rho covers
    the whole range every index is taken in natural order without touching
    the stream. Scores one candidate at a time via encoder.encode.
    """
    from charlev.lexicon import valid

    pool = alphabet.chars + ((alphabet.xi,) if cfg.include_deletion else ())
    outputs = []
    for i, s in enumerate(batch):
        cur = s
        obj = objectives[i]
        for step in range(cfg.k):
            rng = np.random.default_rng([cfg.seed, i, step])

            n_slots = 2 * len(cur) + 1
            if cfg.rho is None or cfg.rho >= n_slots:
                positions = list(range(n_slots))
            else:
                positions = [int(p) for p in
                             rng.choice(n_slots, size=cfg.rho, replace=False)]
            best_j, best_score = 0, -np.inf
            for j, p in enumerate(positions):
                cand = apply_edit(cur, p, cfg.test_char, alphabet.xi)
                if cfg.constrained and not valid(cur, cand, lexicon):
                    cand = cur
                score = float(obj.scores(encoder.encode(cand)[None])[0])
                if score > best_score:
                    best_j, best_score = j, score
            chosen_pos = positions[best_j]

            if cfg.rho is None or cfg.rho >= len(pool):
                char_idx = list(range(len(pool)))
            else:
                char_idx = [int(c) for c in
                            rng.choice(len(pool), size=cfg.rho, replace=False)]
            best_cand, best_score = None, -np.inf
            for c in char_idx:
                cand = apply_edit(cur, chosen_pos, pool[c], alphabet.xi)
                if cfg.constrained and not valid(cur, cand, lexicon):
                    cand = cur
                score = float(obj.scores(encoder.encode(cand)[None])[0])
                if score > best_score:
                    best_cand, best_score = cand, score
            cur = best_cand
        outputs.append(cur)
    return outputs
