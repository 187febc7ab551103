"""Transfer of a trained detection-and-reasoning module onto another model.

The D-R module (its own encoder plus detection and reasoning heads)
produces the search matrix; a separate correction model supplies the
vocabulary distribution; the two meet in the masked argmax.  Neither side
is retrained.
"""
from dataclasses import dataclass

import numpy as np

from . import encoder as enc
from . import heads as hd
from .charkb import ConfusionIndex
from .errors import CompatibilityError
from .model import ModelState, Prediction, masked_argmax
from .searchmask import all_ones, build_search_matrix


@dataclass
class DRModule:
    encoder: enc.EncoderParams
    W_D: np.ndarray
    b_D: np.ndarray
    W_R: np.ndarray
    b_R: np.ndarray
    index: ConfusionIndex

    @classmethod
    def from_model(cls, model: ModelState):
        h = model.heads
        return cls(model.encoder, h.W_D, h.b_D, h.W_R, h.b_R, model.index)

    @property
    def vocab(self):
        return self.index.vocab


@dataclass
class CorrectionModel:
    encoder: enc.EncoderParams
    W_S: np.ndarray
    b_S: np.ndarray
    vocab: object

    @classmethod
    def from_model(cls, model: ModelState):
        return cls(model.encoder, model.heads.W_S, model.heads.b_S, model.vocab)


def check_compatible(dr: DRModule, model: CorrectionModel):
    if dr.vocab.digest() != model.vocab.digest():
        raise CompatibilityError(
            f"vocabulary mismatch: D-R module {dr.vocab.digest()[:12]} vs correction model {model.vocab.digest()[:12]}")
    if model.W_S.shape[0] != len(dr.vocab):
        raise CompatibilityError("correction output layer does not span the shared vocabulary")


def _dr_decisions(packed, dr: DRModule):
    H, _ = enc.encode_packed(packed, dr.encoder)
    p_d = hd.softmax(H @ dr.W_D.T + dr.b_D)
    p_r = hd.softmax(H @ dr.W_R.T + dr.b_R)
    return p_d, p_d.argmax(axis=1), p_r, p_r.argmax(axis=1)


def dr_infer(x_indices, dr: DRModule):
    """``(y_d, y_r, C)`` from the D-R module alone."""
    x = np.asarray(x_indices, dtype=np.int64)
    _, y_d, _, y_r = _dr_decisions(enc.pack([x]), dr)
    return y_d, y_r, build_search_matrix(x, y_d, y_r, dr.index)


def _combined_packed(packed, dr, model, oracle_d, oracle_r, use_mask):
    p_d, y_d, p_r, y_r = _dr_decisions(packed, dr)
    if oracle_d is not None:
        y_d = np.asarray(oracle_d, dtype=np.int64)
    if oracle_r is not None:
        y_r = np.asarray(oracle_r, dtype=np.int64)
    H_prime, _ = enc.encode_packed(packed, model.encoder)
    p_prime = hd.softmax(H_prime @ model.W_S.T + model.b_S)
    C = build_search_matrix(packed.idx, y_d, y_r, dr.index) if use_mask else all_ones(packed.idx, dr.index)
    return masked_argmax(p_prime, C), hd.SubtaskOutput(p_d, y_d, p_r, y_r, p_prime), C


def combined_predict(x_indices, dr: DRModule, model: CorrectionModel, oracle_d=None, oracle_r=None,
                     use_mask=True):
    """Correct one sentence with D-R decisions from ``dr`` and distribution from ``model``.

    Returns ``(corrected indices, SubtaskOutput)``; the subtask output holds
    the decisions actually used for the search matrix.
    """
    check_compatible(dr, model)
    x = np.asarray(x_indices, dtype=np.int64)
    for name, lab in (("oracle_d", oracle_d), ("oracle_r", oracle_r)):
        if lab is not None and len(lab) != len(x):
            raise ValueError(f"{name} length {len(lab)} != sentence length {len(x)}")
    pred, sub, _ = _combined_packed(enc.pack([x]), dr, model, oracle_d, oracle_r, use_mask)
    return pred, sub


def transfer_predict(sequences, dr: DRModule, model: CorrectionModel, oracle_d=None, oracle_r=None,
                     use_mask=True, batch_size=256):
    """``combined_predict`` over many sentences, as ``Prediction`` records.

    Batching matches ``model.predict`` so self-transfer is bit-identical.
    """
    check_compatible(dr, model)
    out = []
    for lo in range(0, len(sequences), batch_size):
        packed = enc.pack(sequences[lo:lo + batch_size])
        od = None if oracle_d is None else np.concatenate([np.asarray(g) for g in oracle_d[lo:lo + batch_size]])
        orr = None if oracle_r is None else np.concatenate([np.asarray(g) for g in oracle_r[lo:lo + batch_size]])
        pred, sub, C = _combined_packed(packed, dr, model, od, orr, use_mask)
        for p, d, r, k in zip(packed.split(pred), packed.split(sub.y_d), packed.split(sub.y_r),
                              packed.split(C.kinds)):
            out.append(Prediction(p, d, r, k))
    return out
