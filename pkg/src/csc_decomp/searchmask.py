"""Search-matrix construction and probability masking.

A row of the search matrix is the indicator of the source character's
phonological set (detected, phonological), its visual set (detected,
morphological), or all ones (not detected).  Rows are kept symbolically
as ``(kind, source index)`` over the packed confusion index and only
materialised to dense ``T x vocab`` form on demand.
"""
from dataclasses import dataclass

import numpy as np

from .charkb import ConfusionIndex
from .errors import ShapeError

ALL, PHONO, VISUAL = 0, 1, 2
EPS = 1e-12


def row_kinds(y_d, y_r, index: ConfusionIndex = None, x_indices=None, singleton_fallback=False):
    """Kind code per position from detection/reasoning decisions.

    With ``singleton_fallback`` a detected position whose selected set holds
    only the character itself falls back to the all-ones row.
    """
    y_d = np.asarray(y_d)
    y_r = np.asarray(y_r)
    kinds = np.where(y_d == 1, np.where(y_r == 1, PHONO, VISUAL), ALL).astype(np.int8)
    if singleton_fallback:
        x = np.asarray(x_indices, dtype=np.int64)
        lonely = ((kinds == PHONO) & (index.sizes("pc")[x] == 1)) | ((kinds == VISUAL) & (index.sizes("vc")[x] == 1))
        kinds[lonely] = ALL
    return kinds


def mask_vector(x_index: int, y_d: int, y_r: int, index: ConfusionIndex) -> np.ndarray:
    """Length-vocab 0/1 vector selecting the admissible corrections."""
    if y_d == 1:
        return index.row("pc" if y_r == 1 else "vc", x_index).astype(np.uint8)
    return np.ones(len(index.vocab), dtype=np.uint8)


@dataclass(frozen=True)
class SearchMatrix:
    index: ConfusionIndex
    x: np.ndarray
    kinds: np.ndarray

    def __len__(self):
        return len(self.x)

    @property
    def shape(self):
        return (len(self.x), len(self.index.vocab))

    def dense(self) -> np.ndarray:
        vocab_size = len(self.index.vocab)
        out = np.ones((len(self.x), vocab_size), dtype=np.uint8)
        for kind, name in ((PHONO, "pc"), (VISUAL, "vc")):
            rows = np.flatnonzero(self.kinds == kind)
            if rows.size:
                packed = self.index.packed(name)[self.x[rows]]
                out[rows] = np.unpackbits(packed, axis=1, count=vocab_size)
        return out

    def row(self, i: int) -> np.ndarray:
        if self.kinds[i] == ALL:
            return np.ones(len(self.index.vocab), dtype=np.uint8)
        return self.index.row("pc" if self.kinds[i] == PHONO else "vc", int(self.x[i])).astype(np.uint8)

    def allows(self, i: int, cand: int) -> bool:
        k = self.kinds[i]
        if k == ALL:
            return True
        if k == PHONO:
            return self.index.in_pc(int(self.x[i]), int(cand))
        return self.index.in_vc(int(self.x[i]), int(cand))


def build_search_matrix(x_indices, y_d, y_r, index: ConfusionIndex, singleton_fallback=False) -> SearchMatrix:
    x = np.asarray(x_indices, dtype=np.int64)
    if not (len(x) == len(y_d) == len(y_r)):
        raise ShapeError(f"length mismatch: x={len(x)} y_d={len(y_d)} y_r={len(y_r)}")
    kinds = row_kinds(y_d, y_r, index, x, singleton_fallback)
    return SearchMatrix(index, x, kinds)


def all_ones(x_indices, index: ConfusionIndex) -> SearchMatrix:
    x = np.asarray(x_indices, dtype=np.int64)
    return SearchMatrix(index, x, np.zeros(len(x), dtype=np.int8))


def apply_mask(p: np.ndarray, c, renormalize: bool = False, eps: float = EPS) -> np.ndarray:
    """Elementwise product of probabilities and the search matrix.

    ``renormalize`` divides each row by ``max(row sum, eps)``.
    """
    dense = c.dense() if isinstance(c, SearchMatrix) else np.asarray(c)
    if p.shape != dense.shape:
        raise ShapeError(f"probability shape {p.shape} != mask shape {dense.shape}")
    out = p * dense
    if renormalize:
        out = out / np.maximum(out.sum(axis=1, keepdims=True), eps)
    return out
