"""Detection, reasoning and searching heads: linear maps plus softmax.

Label conventions: detection 1 = wrong character, reasoning 1 =
phonological error, 0 = morphological.  Argmax ties resolve to the lower
label.
"""
from dataclasses import dataclass

import numpy as np

from .encoder import INIT_SCALE
from .errors import ShapeError


@dataclass
class HeadParams:
    W_D: np.ndarray  # (2, hidden)
    b_D: np.ndarray  # (2,)
    W_R: np.ndarray  # (2, hidden)
    b_R: np.ndarray  # (2,)
    W_S: np.ndarray  # (vocab, hidden)
    b_S: np.ndarray  # (vocab,)

    @property
    def hidden(self):
        return self.W_S.shape[1]

    @property
    def vocab_size(self):
        return self.W_S.shape[0]

    def blocks(self):
        return {"W_D": self.W_D, "b_D": self.b_D, "W_R": self.W_R, "b_R": self.b_R,
                "W_S": self.W_S, "b_S": self.b_S}

    def copy(self):
        return HeadParams(**{k: v.copy() for k, v in self.blocks().items()})


def init_heads(vocab_size, hidden, rng=None):
    rng = np.random.default_rng(rng)
    u = lambda *shape: rng.uniform(-INIT_SCALE, INIT_SCALE, shape)  # noqa: E731
    return HeadParams(u(2, hidden), np.zeros(2), u(2, hidden), np.zeros(2),
                      u(vocab_size, hidden), np.zeros(vocab_size))


def zero_heads(vocab_size, hidden):
    return HeadParams(np.zeros((2, hidden)), np.zeros(2), np.zeros((2, hidden)), np.zeros(2),
                      np.zeros((vocab_size, hidden)), np.zeros(vocab_size))


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_hidden(H, params):
    if H.ndim != 2 or H.shape[1] != params.hidden:
        raise ShapeError(f"encoding shape {H.shape} incompatible with hidden size {params.hidden}")


def detect(H, params: HeadParams):
    """``(p_d, y_d)``: per-position correct/wrong probabilities and decisions."""
    _check_hidden(H, params)
    p = softmax(H @ params.W_D.T + params.b_D)
    return p, p.argmax(axis=1)


def reason(H, params: HeadParams):
    """``(p_r, y_r)``: per-position morphological/phonological probabilities and decisions."""
    _check_hidden(H, params)
    p = softmax(H @ params.W_R.T + params.b_R)
    return p, p.argmax(axis=1)


def search_probs(H, params: HeadParams):
    _check_hidden(H, params)
    return softmax(H @ params.W_S.T + params.b_S)


@dataclass
class SubtaskOutput:
    p_d: np.ndarray
    y_d: np.ndarray
    p_r: np.ndarray
    y_r: np.ndarray
    p_s: np.ndarray


def forward(H, params: HeadParams) -> SubtaskOutput:
    p_d, y_d = detect(H, params)
    p_r, y_r = reason(H, params)
    return SubtaskOutput(p_d, y_d, p_r, y_r, search_probs(H, params))


def _softmax_backward(p, dp):
    return p * (dp - (dp * p).sum(axis=1, keepdims=True))


def heads_backward_logits(H, params: HeadParams, dz_d=None, dz_r=None, dz_s=None):
    """Gradients given upstream gradients with respect to each head's logits.

    Returns ``(grads, dH)``; a head with no upstream gradient gets zero grads.
    """
    grads = {}
    dH = np.zeros_like(H)
    for name, W, dz in (("D", params.W_D, dz_d), ("R", params.W_R, dz_r), ("S", params.W_S, dz_s)):
        if dz is None:
            grads["W_" + name] = np.zeros_like(W)
            grads["b_" + name] = np.zeros(W.shape[0])
            continue
        if dz.shape != (H.shape[0], W.shape[0]):
            raise ShapeError(f"upstream gradient for head {name} has shape {dz.shape}")
        grads["W_" + name] = dz.T @ H
        grads["b_" + name] = dz.sum(axis=0)
        dH += dz @ W
    return grads, dH


def heads_backward(H, params: HeadParams, d_pd=None, d_pr=None, d_ps=None, out: SubtaskOutput = None):
    """Gradients given upstream gradients with respect to the probability outputs."""
    _check_hidden(H, params)
    if out is None:
        out = forward(H, params)
    for p, d in ((out.p_d, d_pd), (out.p_r, d_pr), (out.p_s, d_ps)):
        if d is not None and d.shape != p.shape:
            raise ShapeError(f"upstream gradient shape {d.shape} != output shape {p.shape}")
    dz = [None if d is None else _softmax_backward(p, d)
          for p, d in ((out.p_d, d_pd), (out.p_r, d_pr), (out.p_s, d_ps))]
    return heads_backward_logits(H, params, *dz)
