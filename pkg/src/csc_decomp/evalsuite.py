"""Sentence-level metrics, per-subtask metrics and the search-matrix audit.

Sentence-level conventions:

* a sentence is a predicted positive when the system flags (``y_d = 1``)
  or changes at least one position;
* the predicted error positions are the union of flagged and changed
  positions;
* detection true positive: an errorful sentence whose predicted error
  positions equal its gold error positions exactly;
* correction true positive: a detection true positive whose output equals
  the target everywhere.

Precision with no predicted positives is 0, unless the corpus also has no
gold positives, in which case P = R = F = 1 (nothing to find, nothing
claimed).
"""
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .charkb import ConfusionIndex
from .errors import ShapeError


@dataclass(frozen=True)
class PRF:
    p: float
    r: float
    f: float

    @classmethod
    def from_counts(cls, tp, predicted, gold):
        if predicted == 0 and gold == 0:
            return cls(1.0, 1.0, 1.0)
        p = tp / predicted if predicted else 0.0
        r = tp / gold if gold else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f)

    def as_dict(self):
        return {"P": self.p, "R": self.r, "F": self.f}


@dataclass
class SentenceOutput:
    """What the metrics need from a system's output for one sentence."""

    pred: str
    y_d: tuple = None  # detection flags; None means "changes only"
    y_r: tuple = None


def _positions(src, out: SentenceOutput):
    changed = {i for i, (a, b) in enumerate(zip(src, out.pred)) if a != b}
    flagged = {i for i, v in enumerate(out.y_d) if v == 1} if out.y_d is not None else set()
    return changed | flagged


def _check(outputs, pairs):
    if len(outputs) != len(pairs):
        raise ShapeError(f"{len(outputs)} outputs for {len(pairs)} sentences")
    for k, (o, pr) in enumerate(zip(outputs, pairs)):
        if len(o.pred) != len(pr.src) or (o.y_d is not None and len(o.y_d) != len(pr.src)):
            raise ShapeError(f"sentence {k}: output length differs from source length {len(pr.src)}")


def sentence_metrics(outputs, pairs, level="correction") -> PRF:
    _check(outputs, pairs)
    if level not in ("detection", "correction"):
        raise ValueError(f"unknown level {level!r}")
    tp = predicted = gold = 0
    for out, pair in zip(outputs, pairs):
        gold_pos = set(pair.error_positions)
        pred_pos = _positions(pair.src, out)
        gold += bool(gold_pos)
        predicted += bool(pred_pos)
        if gold_pos and pred_pos == gold_pos and (level == "detection" or out.pred == pair.tgt):
            tp += 1
    return PRF.from_counts(tp, predicted, gold)


def subtask_metrics(outputs, pairs, labels) -> dict:
    """Sentence-level P/R/F for detection, reasoning and searching.

    Detection compares flags with gold error positions.  Reasoning counts a
    sentence only if detection is exact and every gold error also has the
    right error type.  Searching is the correction-level metric.
    """
    _check(outputs, pairs)
    det_tp = rea_tp = predicted = gold = 0
    for out, lab in zip(outputs, labels):
        y_d = np.asarray(out.y_d)
        gold_any = bool(lab.g_d.any())
        gold += gold_any
        predicted += bool(y_d.any())
        if gold_any and np.array_equal(y_d, lab.g_d):
            det_tp += 1
            err = lab.g_d == 1
            if np.array_equal(np.asarray(out.y_r)[err], lab.g_r[err]):
                rea_tp += 1
    return {
        "detection": PRF.from_counts(det_tp, predicted, gold),
        "reasoning": PRF.from_counts(rea_tp, predicted, gold),
        "searching": sentence_metrics(outputs, pairs, "correction"),
    }


@dataclass
class AuditCounts:
    predicted_phonological: int = 0
    predicted_morphological: int = 0
    not_in_pc: int = 0  # detected phonological, source has no other pc member
    not_in_vc: int = 0
    gold_filtered_out_pc: int = 0  # detected phonological, gold outside pc(source)
    gold_filtered_out_vc: int = 0

    @property
    def detected(self):
        return self.predicted_phonological + self.predicted_morphological


def audit(outputs, pairs, index: ConfusionIndex) -> AuditCounts:
    _check(outputs, pairs)
    vocab = index.vocab
    sizes_pc, sizes_vc = index.sizes("pc"), index.sizes("vc")
    c = AuditCounts()
    for out, pair in zip(outputs, pairs):
        x = vocab.encode(pair.src, strict=False)
        g = vocab.encode(pair.tgt, strict=False)
        for i in np.flatnonzero(np.asarray(out.y_d) == 1):
            if out.y_r[i] == 1:
                c.predicted_phonological += 1
                c.not_in_pc += int(sizes_pc[x[i]] == 1)
                c.gold_filtered_out_pc += int(not index.in_pc(x[i], g[i]))
            else:
                c.predicted_morphological += 1
                c.not_in_vc += int(sizes_vc[x[i]] == 1)
                c.gold_filtered_out_vc += int(not index.in_vc(x[i], g[i]))
    return c


@dataclass
class EvalReport:
    detection: PRF
    correction: PRF
    subtasks: dict
    counts: AuditCounts
    n_sentences: int = 0
    config: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "n_sentences": self.n_sentences,
            "detection": self.detection.as_dict(),
            "correction": self.correction.as_dict(),
            "subtasks": {k: v.as_dict() for k, v in self.subtasks.items()},
            "counts": asdict(self.counts),
            "config": self.config,
        }

    def dumps(self):
        return json.dumps(self.to_json(), ensure_ascii=False, sort_keys=True, indent=1) + "\n"


def evaluate(outputs, pairs, labels, index: ConfusionIndex, config=None) -> EvalReport:
    return EvalReport(
        detection=sentence_metrics(outputs, pairs, "detection"),
        correction=sentence_metrics(outputs, pairs, "correction"),
        subtasks=subtask_metrics(outputs, pairs, labels),
        counts=audit(outputs, pairs, index),
        n_sentences=len(pairs),
        config=dict(config or {}),
    )


def to_outputs(predictions, pairs, vocab):
    """Decode pipeline predictions.

    Out-of-vocabulary source characters pass through, and so does the source
    character wherever the argmax lands on a special symbol.
    """
    specials = set(vocab.specials)
    outs = []
    for p, pair in zip(predictions, pairs):
        chars = [s if s not in vocab or i in specials else vocab.chars[i] for s, i in zip(pair.src, p.pred)]
        outs.append(SentenceOutput("".join(chars), tuple(int(v) for v in p.y_d), tuple(int(v) for v in p.y_r)))
    return outs


def predict_outputs(model, pairs, gold_d=False, gold_r=False, use_mask=True, predictor=None, labels=None):
    """Decoded outputs of ``model`` (or ``predictor(xs, gold_d, gold_r, use_mask)``) on ``pairs``.

    Gold labels are derived only when an oracle flag asks for them, so plain
    prediction tolerates out-of-vocabulary characters.
    """
    from .model import predict
    from .train import derive_labels

    vocab, index = model.vocab, model.index
    if (gold_d or gold_r) and labels is None:
        labels = [derive_labels(p, vocab, index) for p in pairs]
    xs = [vocab.encode(p.src, strict=False) for p in pairs]
    gd = [l.g_d for l in labels] if gold_d else None
    gr = [l.g_r for l in labels] if gold_r else None
    if predictor is None:
        preds = predict(model, xs, gold_d=gd, gold_r=gr, use_mask=use_mask)
    else:
        preds = predictor(xs, gd, gr, use_mask)
    return to_outputs(preds, pairs, vocab)


def evaluate_model(model, pairs, gold_d=False, gold_r=False, use_mask=True, config=None, predictor=None):
    """Score ``model`` on a parallel corpus; returns ``(report, outputs)``."""
    from .train import derive_labels

    labels = [derive_labels(p, model.vocab, model.index) for p in pairs]
    outputs = predict_outputs(model, pairs, gold_d, gold_r, use_mask, predictor, labels)
    cfg = {"use_gold_d": gold_d, "use_gold_r": gold_r, "use_mask": use_mask, **(config or {})}
    return evaluate(outputs, pairs, labels, model.index, cfg), outputs
