"""Windowed embedding encoders mapping a character sequence to ``T x hidden``.

``h_i = tanh(W_h . concat(emb[x_{i-w}], ..., emb[x_{i+w}]) + b_h)``, with
zero vectors standing in for positions outside the sentence.  The same map
serves two encoders: a trainable toy encoder (small uniform init) and a
fixed-feature encoder (random features, frozen during training).

Batches are handled as one flat token array with per-token sentence
bounds, so windows never cross sentence boundaries.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import LengthError, ShapeError, VocabError

MAX_LEN = 192
INIT_SCALE = 0.05


@dataclass
class EncoderParams:
    embeddings: np.ndarray  # (vocab, d_e)
    W_h: np.ndarray  # (hidden, (2w+1) * d_e)
    b_h: np.ndarray  # (hidden,)
    window: int = 2
    max_len: int = MAX_LEN
    trainable: bool = True

    def __post_init__(self):
        d_e = self.embeddings.shape[1]
        if self.W_h.shape[1] != (2 * self.window + 1) * d_e:
            raise ShapeError(f"W_h has {self.W_h.shape[1]} columns, expected {(2 * self.window + 1) * d_e}")
        if self.b_h.shape != (self.W_h.shape[0],):
            raise ShapeError("b_h must match the hidden size")

    @property
    def vocab_size(self):
        return self.embeddings.shape[0]

    @property
    def hidden(self):
        return self.W_h.shape[0]

    @property
    def d_e(self):
        return self.embeddings.shape[1]

    def blocks(self):
        return {"embeddings": self.embeddings, "W_h": self.W_h, "b_h": self.b_h}

    def copy(self):
        return EncoderParams(self.embeddings.copy(), self.W_h.copy(), self.b_h.copy(),
                             self.window, self.max_len, self.trainable)


def init_toy(vocab_size, d_e=32, hidden=64, window=2, rng=None, max_len=MAX_LEN):
    """Trainable encoder, weights uniform(-0.05, 0.05), zero bias."""
    rng = np.random.default_rng(rng)
    return EncoderParams(
        embeddings=rng.uniform(-INIT_SCALE, INIT_SCALE, (vocab_size, d_e)),
        W_h=rng.uniform(-INIT_SCALE, INIT_SCALE, (hidden, (2 * window + 1) * d_e)),
        b_h=np.zeros(hidden),
        window=window,
        max_len=max_len,
    )


def init_fixed(vocab_size, d_e=32, hidden=64, window=2, rng=None, max_len=MAX_LEN):
    """Frozen random-feature encoder.

    Unit-variance embeddings and a fan-in scaled projection keep the tanh
    units away from both saturation and the linear regime.
    """
    rng = np.random.default_rng(rng)
    fan_in = (2 * window + 1) * d_e
    return EncoderParams(
        embeddings=rng.standard_normal((vocab_size, d_e)),
        W_h=rng.standard_normal((hidden, fan_in)) * (1.5 / np.sqrt(fan_in)),
        b_h=rng.uniform(-0.1, 0.1, hidden),
        window=window,
        max_len=max_len,
        trainable=False,
    )


@dataclass
class Packed:
    """Sentences flattened into one token array."""

    idx: np.ndarray  # (N,) vocab indices
    starts: np.ndarray  # (N,) flat index of each token's sentence start
    ends: np.ndarray  # (N,) flat index one past each token's sentence end
    offsets: np.ndarray = field(repr=False)  # (B+1,) sentence boundaries

    def __len__(self):
        return len(self.offsets) - 1

    @property
    def n_tokens(self):
        return len(self.idx)

    def split(self, flat):
        """Cut a per-token array back into per-sentence pieces."""
        return [flat[self.offsets[b]:self.offsets[b + 1]] for b in range(len(self))]


def pack(sequences) -> Packed:
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    offsets = np.zeros(len(sequences) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    idx = (np.concatenate([np.asarray(s, dtype=np.int64) for s in sequences])
           if len(sequences) else np.zeros(0, dtype=np.int64))
    sent = np.repeat(np.arange(len(sequences)), lengths)
    return Packed(idx, offsets[:-1][sent], offsets[1:][sent], offsets)


def _check(packed: Packed, params: EncoderParams):
    if packed.n_tokens and (packed.idx.min() < 0 or packed.idx.max() >= params.vocab_size):
        bad = packed.idx[(packed.idx < 0) | (packed.idx >= params.vocab_size)][0]
        raise VocabError(f"index {bad} outside vocabulary of size {params.vocab_size}")
    longest = int(np.diff(packed.offsets).max()) if len(packed) else 0
    if longest > params.max_len:
        raise LengthError(f"sentence length {longest} exceeds max_len {params.max_len}")


def encode_packed(packed: Packed, params: EncoderParams):
    """Forward pass over a batch; returns ``(H, windows)`` where windows is the cache."""
    _check(packed, params)
    windows = _kernels.window_gather(params.embeddings, packed.idx, packed.starts, packed.ends, params.window)
    H = np.tanh(windows @ params.W_h.T + params.b_h)
    return H, windows


def encode(x_indices, params: EncoderParams) -> np.ndarray:
    """``T x hidden`` encoding of one sentence."""
    H, _ = encode_packed(pack([np.asarray(x_indices, dtype=np.int64)]), params)
    return H


def encode_backward_packed(packed: Packed, params: EncoderParams, H, windows, upstream):
    if upstream.shape != H.shape:
        raise ShapeError(f"upstream gradient shape {upstream.shape} != encoding shape {H.shape}")
    dZ = upstream * (1.0 - H * H)
    d_windows = dZ @ params.W_h
    return {
        "embeddings": _kernels.window_scatter(d_windows, packed.idx, packed.starts, packed.ends,
                                              params.window, params.vocab_size),
        "W_h": dZ.T @ windows,
        "b_h": dZ.sum(axis=0),
    }


def encode_backward(x_indices, params: EncoderParams, upstream) -> dict:
    """Parameter gradients of ``sum(upstream * encode(x))``."""
    packed = pack([np.asarray(x_indices, dtype=np.int64)])
    H, windows = encode_packed(packed, params)
    return encode_backward_packed(packed, params, H, windows, np.asarray(upstream, dtype=np.float64))
