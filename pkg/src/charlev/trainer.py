"""Adversarial finetuning of the character encoder.

The training objective pins the trainable encoder's embedding of a
worst-case perturbed sentence to a frozen reference encoder's embedding of
the clean sentence (mean squared distance over the batch). Perturbations come
from the batched two-stage attack run against the current trainable encoder;
the outer minimization is AdamW with linear warmup and cosine decay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attacks import AttackConfig, EmbedDistance, leaf_attack
from .encoder import PARAM_FIELDS, CharEncoder, EncoderParams
from .lexicon import Lexicon
from .textspace import Alphabet

# Stream tags keeping the trainer's RNG uses disjoint from the attack's.
_SHUFFLE_TAG = 101
_ATTACK_TAG = 202


@dataclass(frozen=True)
class TrainConfig:
    """Desk-scale defaults; the full-scale preset lives in the CLI."""

    epochs: int = 10
    batch_size: int = 32
    k: int = 1
    rho: int = 20
    constrained: bool = False
    lr_max: float = 1e-3
    warmup_steps: int = 100
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.lr_max <= 0:
            raise ValueError("lr_max must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be > 0")


@dataclass
class OptimizerState:
    """First/second-moment accumulators mirroring the parameter shapes."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: EncoderParams) -> "OptimizerState":
        return cls(
            m={n: np.zeros(a.shape, dtype=np.float64) for n, a in params.arrays()},
            v={n: np.zeros(a.shape, dtype=np.float64) for n, a in params.arrays()},
        )


def textfare_loss(frozen_enc: CharEncoder, trainable_enc: CharEncoder,
                  clean: list[str], perturbed: list[str]) -> float:
    """Mean squared embedding distance between frozen(clean) and trainable(perturbed)."""
    if len(clean) != len(perturbed):
        raise ValueError("clean and perturbed batches must have equal length")
    ref = frozen_enc.encode_batch(clean)
    emb = trainable_enc.encode_batch(perturbed)
    d = emb - ref
    return float(np.einsum("ij,ij->i", d, d).mean())


def adamw_step(params: EncoderParams, grads: EncoderParams, state: OptimizerState,
               lr: float, cfg: TrainConfig) -> tuple[EncoderParams, OptimizerState]:
    """One decoupled-weight-decay Adam update; returns fresh params and state."""
    t = state.t + 1
    new_fields = {}
    for name in PARAM_FIELDS:
        g = np.asarray(getattr(grads, name), dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient in {name!r} at step {t}")
        p = np.asarray(getattr(params, name), dtype=np.float64)
        m = cfg.beta1 * state.m[name] + (1 - cfg.beta1) * g
        v = cfg.beta2 * state.v[name] + (1 - cfg.beta2) * g * g
        m_hat = m / (1 - cfg.beta1 ** t)
        v_hat = v / (1 - cfg.beta2 ** t)
        p = p - lr * (m_hat / (np.sqrt(v_hat) + cfg.eps) + cfg.weight_decay * p)
        state.m[name] = m
        state.v[name] = v
        new_fields[name] = p.astype(np.float32)
    state.t = t
    return EncoderParams(**new_fields), state


def lr_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear warmup to lr_max, then cosine decay to zero at total_steps."""
    if total_steps <= cfg.warmup_steps:
        raise ValueError("total_steps must exceed warmup_steps")
    if step < cfg.warmup_steps:
        return cfg.lr_max * step / cfg.warmup_steps
    progress = (step - cfg.warmup_steps) / (total_steps - cfg.warmup_steps)
    return cfg.lr_max * 0.5 * (1.0 + math.cos(math.pi * min(progress, 1.0)))


def train(dataset: list[str], cfg: TrainConfig, frozen: EncoderParams,
          init: EncoderParams, alphabet: Alphabet,
          lexicon: Lexicon | None = None,
          workers: int = 1) -> tuple[EncoderParams, list[float]]:
    """Adversarially finetune starting from init; frozen never changes.

    Per batch: attack the current trainable encoder so that each perturbed
    sentence maximizes its squared distance to the frozen clean embedding,
    then descend on the mean of those distances. Returns the final parameters
    and the mean loss per epoch. Fully determined by (dataset, cfg, seeds);
    the last partial batch is kept.
    """
    if not dataset:
        raise ValueError("dataset must be nonempty")
    if cfg.constrained and lexicon is None:
        raise ValueError("constrained training requires a lexicon")

    frozen_enc = CharEncoder(frozen, alphabet, workers=workers)
    params = init.copy()
    state = OptimizerState.zeros_like(params)

    n = len(dataset)
    batches_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.epochs * batches_per_epoch
    trace: list[float] = []
    global_step = 0

    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, _SHUFFLE_TAG, epoch]).permutation(n)
        epoch_loss_sum = 0.0

        for b in range(batches_per_epoch):
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            clean = [dataset[i] for i in idx]
            trainable_enc = CharEncoder(params, alphabet, workers=workers)

            refs = frozen_enc.encode_batch(clean)
            attack_seed = int(np.random.SeedSequence(
                [cfg.seed, _ATTACK_TAG, global_step]).generate_state(1)[0])
            attack_cfg = AttackConfig(k=cfg.k, rho=cfg.rho,
                                      constrained=cfg.constrained,
                                      seed=attack_seed)
            objectives = [EmbedDistance(refs[i]) for i in range(len(clean))]
            results = leaf_attack(trainable_enc, clean, objectives, attack_cfg,
                                  alphabet, lexicon)
            perturbed = [r.output for r in results]

            embs = trainable_enc.encode_batch(perturbed)
            grads = None
            batch_loss = 0.0
            for i, s in enumerate(perturbed):
                diff = embs[i] - refs[i]
                batch_loss += float(diff @ diff)
                g = trainable_enc.backward(s, 2.0 * diff / len(perturbed))
                if grads is None:
                    grads = g
                else:
                    for name in PARAM_FIELDS:
                        getattr(grads, name).__iadd__(getattr(g, name))
            epoch_loss_sum += batch_loss

            lr = lr_at(global_step, total_steps, cfg)
            params, state = adamw_step(params, grads, state, lr, cfg)
            global_step += 1

        trace.append(epoch_loss_sum / n)

    return params, trace
