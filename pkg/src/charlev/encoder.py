"""A small differentiable character-level text encoder.

The encoder pools character unigram embeddings and hashed-bigram embeddings
(mean over each, zero vector when empty), concatenates the two pools and
applies a one-hidden-layer tanh MLP. Parameters live as float32 arrays; all
arithmetic runs in float64, and each sentence is computed independently, so
an embedding is bit-identical regardless of batch composition, worker count
or call path.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .textspace import Alphabet

PARAM_FIELDS = ("e", "b", "w1", "b1", "w2", "b2")

_WORKER_CHUNK = 256


@dataclass
class EncoderParams:
    """Weights in field order: unigram table, bigram table, then the MLP.

    The unigram table has one row per alphabet character plus a final
    reserved row that out-of-alphabet characters map to.
    """

    e: np.ndarray   # (gamma, d_e) character embeddings
    b: np.ndarray   # (m, d_e) hashed-bigram embeddings
    w1: np.ndarray  # (d_h, 2*d_e)
    b1: np.ndarray  # (d_h,)
    w2: np.ndarray  # (h, d_h)
    b2: np.ndarray  # (h,)

    def __post_init__(self):
        gamma, de = self.e.shape
        m, de2 = self.b.shape
        dh, din = self.w1.shape
        h, dh2 = self.w2.shape
        if de2 != de or din != 2 * de or dh2 != dh:
            raise ValueError("inconsistent parameter dimensions")
        if self.b1.shape != (dh,) or self.b2.shape != (h,):
            raise ValueError("inconsistent bias dimensions")

    @property
    def dims(self) -> tuple[int, int, int, int, int]:
        return (self.e.shape[0], self.e.shape[1], self.b.shape[0],
                self.w1.shape[0], self.w2.shape[0])

    @property
    def h(self) -> int:
        return self.w2.shape[0]

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        return [(name, getattr(self, name)) for name in PARAM_FIELDS]

    def copy(self) -> "EncoderParams":
        return EncoderParams(*(getattr(self, n).copy() for n in PARAM_FIELDS))


def init_params(seed: int, dims: tuple[int, int, int, int, int]) -> EncoderParams:
    """Seeded uniform init, bound sqrt(6/(rows+cols)) per matrix; zero biases.

    dims = (gamma, d_e, m, d_h, h) with gamma counting the reserved
    unknown-character row.
    """
    gamma, de, m, dh, h = dims
    if min(dims) < 1:
        raise ValueError("all dims must be >= 1")
    rng = np.random.default_rng(seed)

    def mat(rows, cols):
        a = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-a, a, size=(rows, cols)).astype(np.float32)

    return EncoderParams(
        e=mat(gamma, de),
        b=mat(m, de),
        w1=mat(dh, 2 * de),
        b1=np.zeros(dh, dtype=np.float32),
        w2=mat(h, dh),
        b2=np.zeros(h, dtype=np.float32),
    )


def params_for_alphabet(alphabet: Alphabet, seed: int, d_e: int = 32,
                        m: int = 1024, d_h: int = 64, h: int = 64) -> EncoderParams:
    """Fresh parameters sized for an alphabet (plus the reserved row)."""
    return init_params(seed, (len(alphabet) + 1, d_e, m, d_h, h))


def save_params(params: EncoderParams, path: str) -> None:
    """One JSON header line, then all matrices row-major as little-endian f32."""
    gamma, de, m, dh, h = params.dims
    header = {"gamma": gamma, "de": de, "m": m, "dh": dh, "h": h}
    with open(path, "wb") as f:
        f.write((json.dumps(header) + "\n").encode("utf-8"))
        for _, arr in params.arrays():
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_params(path: str) -> EncoderParams:
    with open(path, "rb") as f:
        line = f.readline()
        try:
            header = json.loads(line.decode("utf-8"))
            gamma, de, m, dh, h = (int(header[k]) for k in ("gamma", "de", "m", "dh", "h"))
        except (ValueError, KeyError, UnicodeDecodeError) as exc:
            raise ValueError(f"{path}: corrupt parameter header") from exc
        payload = f.read()
    shapes = [(gamma, de), (m, de), (dh, 2 * de), (dh,), (h, dh), (h,)]
    expected = sum(int(np.prod(s)) for s in shapes) * 4
    if len(payload) != expected:
        raise ValueError(f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    arrays = []
    off = 0
    for shape in shapes:
        n = int(np.prod(shape))
        arrays.append(np.frombuffer(payload, dtype="<f4", count=n, offset=off)
                      .reshape(shape).astype(np.float32))
        off += n * 4
    return EncoderParams(*arrays)


def cosine_sim(u: np.ndarray, v: np.ndarray) -> float:
    """u.v / (|u||v|); raises on a zero-norm operand."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity undefined for zero-norm vectors")
    return float(np.dot(u, v) / (nu * nv))


def bigram_buckets(s: str, m: int) -> np.ndarray:
    """Hash bucket per adjacent character pair of s, in [0, m).

    The mix packs the two scalar values into one 64-bit word
    ((ord(a) << 21) | ord(b), injective for Unicode scalars) and applies the
    splitmix64 finalizer before reducing mod m.
    """
    if len(s) < 2:
        return np.empty(0, dtype=np.int64)
    codes = np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32).astype(np.uint64)
    z = (codes[:-1] << np.uint64(21)) | codes[1:]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z % np.uint64(m)).astype(np.int64)


class CharEncoder:
    """Embedding oracle over sentences: f(s) in R^h, with exact gradients.

    Parameters are frozen at construction (float64 working copies are taken
    then); build a new instance after updating them.
    """

    def __init__(self, params: EncoderParams, alphabet: Alphabet, workers: int = 1):
        if params.e.shape[0] != len(alphabet) + 1:
            raise ValueError(
                f"parameter table has {params.e.shape[0]} character rows, "
                f"alphabet needs {len(alphabet) + 1}")
        self.params = params
        self.alphabet = alphabet
        self.workers = max(1, workers)
        self._e = np.asarray(params.e, dtype=np.float64)
        self._b = np.asarray(params.b, dtype=np.float64)
        self._w1 = np.asarray(params.w1, dtype=np.float64)
        self._b1 = np.asarray(params.b1, dtype=np.float64)
        self._w2 = np.asarray(params.w2, dtype=np.float64)
        self._b2 = np.asarray(params.b2, dtype=np.float64)
        self._unknown = params.e.shape[0] - 1
        self._rows = {c: i for i, c in enumerate(alphabet.chars)}

    @property
    def h(self) -> int:
        return self._w2.shape[0]

    def _char_rows(self, s: str) -> np.ndarray:
        unk = self._unknown
        get = self._rows.get
        return np.fromiter((get(c, unk) for c in s), dtype=np.int64, count=len(s))

    def _pool(self, s: str) -> np.ndarray:
        de = self._e.shape[1]
        pool = np.zeros(2 * de, dtype=np.float64)
        if s:
            pool[:de] = self._e[self._char_rows(s)].mean(axis=0)
        if len(s) >= 2:
            pool[de:] = self._b[bigram_buckets(s, self._b.shape[0])].mean(axis=0)
        return pool

    def encode(self, s: str) -> np.ndarray:
        pool = self._pool(s)
        z = np.tanh(self._w1 @ pool + self._b1)
        return self._w2 @ z + self._b2

    def encode_batch(self, sentences) -> np.ndarray:
        """Embeddings stacked in input order, (n, h).

        Duplicate sentences are computed once; with workers > 1 the unique
        sentences are split into fixed-size chunks across a thread pool.
        Results are identical for any worker count.
        """
        sentences = list(sentences)
        order: dict[str, int] = {}
        for s in sentences:
            if s not in order:
                order[s] = len(order)
        unique = list(order)
        out = np.empty((len(unique), self.h), dtype=np.float64)
        if self.workers > 1 and len(unique) > _WORKER_CHUNK:
            chunks = [(i, unique[i:i + _WORKER_CHUNK])
                      for i in range(0, len(unique), _WORKER_CHUNK)]
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                for start, embs in pool.map(
                        lambda c: (c[0], [self.encode(s) for s in c[1]]), chunks):
                    out[start:start + len(embs)] = embs
        else:
            for i, s in enumerate(unique):
                out[i] = self.encode(s)
        return out[[order[s] for s in sentences]] if sentences else out.reshape(0, self.h)

    def backward(self, s: str, grad_out: np.ndarray) -> EncoderParams:
        """Gradients of grad_out . f(s) with respect to every parameter."""
        g = np.asarray(grad_out, dtype=np.float64)
        if g.shape != (self.h,):
            raise ValueError(f"grad_out must have shape ({self.h},)")
        pool = self._pool(s)
        z = np.tanh(self._w1 @ pool + self._b1)

        d_b2 = g.copy()
        d_w2 = np.outer(g, z)
        da = (self._w2.T @ g) * (1.0 - z * z)
        d_b1 = da
        d_w1 = np.outer(da, pool)
        d_pool = self._w1.T @ da

        de = self._e.shape[1]
        d_e = np.zeros_like(self._e)
        d_b = np.zeros_like(self._b)
        if s:
            np.add.at(d_e, self._char_rows(s), d_pool[:de] / len(s))
        if len(s) >= 2:
            np.add.at(d_b, bigram_buckets(s, self._b.shape[0]),
                      d_pool[de:] / (len(s) - 1))
        return EncoderParams(e=d_e, b=d_b, w1=d_w1, b1=d_b1, w2=d_w2, b2=d_b2)


class CountingEncoder:
    """Wraps an encoder and counts batched calls and candidates scored.

    call_sizes records the number of sentences in each batched call, in order.
    """

    def __init__(self, inner):
        self.inner = inner
        self.batched_calls = 0
        self.candidates_scored = 0
        self.call_sizes: list[int] = []

    @property
    def h(self) -> int:
        return self.inner.h

    def reset(self) -> None:
        self.batched_calls = 0
        self.candidates_scored = 0
        self.call_sizes = []

    def encode(self, s: str) -> np.ndarray:
        return self.inner.encode(s)

    def encode_batch(self, sentences) -> np.ndarray:
        sentences = list(sentences)
        self.batched_calls += 1
        self.candidates_scored += len(sentences)
        self.call_sizes.append(len(sentences))
        return self.inner.encode_batch(sentences)


def count_encoder_calls(enc: CountingEncoder) -> tuple[int, int]:
    """(batched_calls, candidates_scored) recorded by a counting wrapper."""
    return enc.batched_calls, enc.candidates_scored
