"""Hot inner loops, each with a numba and a pure-numpy implementation.

The numba path is used when numba imports cleanly and the environment
variable ``CSC_DECOMP_DISABLE_NUMBA`` is unset (or ``0``).  Both paths
return identical results; the variable only changes speed.

``numpy_impl`` and ``numba_impl`` expose the two paths explicitly for
tests and benchmarks.
"""
import os
from types import SimpleNamespace

import numpy as np

_DISABLE = os.environ.get("CSC_DECOMP_DISABLE_NUMBA", "0") not in ("", "0")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


# ---------------------------------------------------------------------------
# pure numpy
# ---------------------------------------------------------------------------

def _levenshtein_np(a, b):
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    n, m = len(a), len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    prev = np.arange(m + 1, dtype=np.int64)
    ramp = np.arange(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        cost = (b != a[i - 1]).astype(np.int64)
        cand = np.empty(m + 1, dtype=np.int64)
        cand[0] = i
        cand[1:] = np.minimum(prev[1:] + 1, prev[:-1] + cost)
        # insertion chain: row[j] = min_k<=j cand[k] + (j - k)
        prev = np.minimum.accumulate(cand - ramp) + ramp
    return int(prev[m])


def _pairwise_levenshtein_np(flat, offsets):
    n = len(offsets) - 1
    out = np.zeros((n, n), dtype=np.int64)
    seqs = [flat[offsets[i]:offsets[i + 1]] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d = _levenshtein_np(seqs[i], seqs[j])
            out[i, j] = d
            out[j, i] = d
    return out


def _window_gather_np(emb, idx, starts, ends, w):
    n = idx.shape[0]
    d = emb.shape[1]
    out = np.zeros((n, (2 * w + 1) * d), dtype=emb.dtype)
    pos = np.arange(n)
    for k in range(2 * w + 1):
        j = pos + (k - w)
        valid = (j >= starts) & (j < ends)
        out[valid, k * d:(k + 1) * d] = emb[idx[j[valid]]]
    return out


def _window_scatter_np(grad, idx, starts, ends, w, vocab_size):
    n = idx.shape[0]
    d = grad.shape[1] // (2 * w + 1)
    out = np.zeros((vocab_size, d), dtype=grad.dtype)
    pos = np.arange(n)
    # offset-major, then position order; the numba loop accumulates identically
    for k in range(2 * w + 1):
        j = pos + (k - w)
        valid = (j >= starts) & (j < ends)
        np.add.at(out, idx[j[valid]], grad[valid, k * d:(k + 1) * d])
    return out


numpy_impl = SimpleNamespace(
    name="numpy",
    levenshtein=_levenshtein_np,
    pairwise_levenshtein=_pairwise_levenshtein_np,
    window_gather=_window_gather_np,
    window_scatter=_window_scatter_np,
)


# ---------------------------------------------------------------------------
# numba
# ---------------------------------------------------------------------------

def _build_numba():
    njit = numba.njit(cache=True, nogil=True)

    @njit
    def levenshtein(a, b):
        n, m = a.shape[0], b.shape[0]
        if n == 0:
            return m
        if m == 0:
            return n
        prev = np.empty(m + 1, dtype=np.int64)
        cur = np.empty(m + 1, dtype=np.int64)
        for j in range(m + 1):
            prev[j] = j
        for i in range(1, n + 1):
            cur[0] = i
            ai = a[i - 1]
            for j in range(1, m + 1):
                sub = prev[j - 1] + (0 if b[j - 1] == ai else 1)
                dele = prev[j] + 1
                ins = cur[j - 1] + 1
                best = sub if sub < dele else dele
                cur[j] = best if best < ins else ins
            for j in range(m + 1):
                prev[j] = cur[j]
        return prev[m]

    @njit
    def pairwise_levenshtein(flat, offsets):
        n = offsets.shape[0] - 1
        out = np.zeros((n, n), dtype=np.int64)
        for i in range(n):
            a = flat[offsets[i]:offsets[i + 1]]
            for j in range(i + 1, n):
                d = levenshtein(a, flat[offsets[j]:offsets[j + 1]])
                out[i, j] = d
                out[j, i] = d
        return out

    @njit
    def window_gather(emb, idx, starts, ends, w):
        n = idx.shape[0]
        d = emb.shape[1]
        out = np.zeros((n, (2 * w + 1) * d), dtype=emb.dtype)
        for t in range(n):
            for k in range(2 * w + 1):
                j = t + k - w
                if j >= starts[t] and j < ends[t]:
                    row = idx[j]
                    for c in range(d):
                        out[t, k * d + c] = emb[row, c]
        return out

    @njit
    def window_scatter(grad, idx, starts, ends, w, vocab_size):
        n = idx.shape[0]
        d = grad.shape[1] // (2 * w + 1)
        out = np.zeros((vocab_size, d), dtype=grad.dtype)
        for k in range(2 * w + 1):
            for t in range(n):
                j = t + k - w
                if j >= starts[t] and j < ends[t]:
                    row = idx[j]
                    for c in range(d):
                        out[row, c] += grad[t, k * d + c]
        return out

    def levenshtein_py(a, b):
        return int(levenshtein(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)))

    return SimpleNamespace(
        name="numba",
        levenshtein=levenshtein_py,
        pairwise_levenshtein=pairwise_levenshtein,
        window_gather=window_gather,
        window_scatter=window_scatter,
    )


numba_impl = _build_numba() if numba is not None else None

active = numpy_impl if (_DISABLE or numba_impl is None) else numba_impl
BACKEND = active.name


def levenshtein(a, b):
    """Edit distance between two integer sequences (unit costs)."""
    return active.levenshtein(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))


def pairwise_levenshtein(seqs):
    """All-pairs edit distances as a dense symmetric int64 matrix."""
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    offsets = np.zeros(len(seqs) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    flat = np.concatenate([np.asarray(s, dtype=np.int64) for s in seqs]) if seqs else np.zeros(0, np.int64)
    return active.pairwise_levenshtein(flat, offsets)


def window_gather(emb, idx, starts, ends, w):
    return active.window_gather(emb, idx, starts, ends, w)


def window_scatter(grad, idx, starts, ends, w, vocab_size):
    return active.window_scatter(grad, idx, starts, ends, w, vocab_size)
