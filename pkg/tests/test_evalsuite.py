import json

import numpy as np
import pytest

from csc_decomp.errors import ShapeError
from csc_decomp.evalsuite import (PRF, SentenceOutput, audit, evaluate, sentence_metrics, subtask_metrics,
                                  to_outputs)
from csc_decomp.model import Prediction
from csc_decomp.train import SentencePair, derive_labels
from conftest import DATA
from minicorpus import golden, load_rows


def _mini(sample_index):
    rows, reasons = load_rows()
    pairs = [SentencePair(s, t) for s, t, _, _ in rows]
    outputs = [SentenceOutput(p, tuple(d), tuple(r)) for (_, _, p, d), r in zip(rows, reasons)]
    labels = [derive_labels(pr, sample_index.vocab, sample_index) for pr in pairs]
    return pairs, outputs, labels


def test_golden_file_matches_oracle():
    assert json.loads((DATA / "mini_corpus_golden.json").read_text(encoding="utf-8")) == golden()


def test_mini_corpus_metrics(sample_index):
    frozen = json.loads((DATA / "mini_corpus_golden.json").read_text(encoding="utf-8"))
    pairs, outputs, labels = _mini(sample_index)
    for level in ("detection", "correction"):
        m = sentence_metrics(outputs, pairs, level)
        assert (m.p, m.r, m.f) == (frozen["metrics"][level]["P"], frozen["metrics"][level]["R"],
                                   frozen["metrics"][level]["F"])
    det = sentence_metrics(outputs, pairs, "detection")
    assert det.p == 2 / 4 and det.r == 2 / 5
    counts = audit(outputs, pairs, sample_index)
    assert {k: getattr(counts, k) for k in frozen["audit"]} == frozen["audit"]
    assert counts.detected == counts.predicted_phonological + counts.predicted_morphological
    sub = subtask_metrics(outputs, pairs, labels)
    assert sub["detection"] == det and sub["reasoning"].p == 2 / 4


def test_perfect_and_silent_models(sample_index):
    pairs = [SentencePair("我收不了", "我受不了"), SentencePair("侍", "待")]
    perfect = [SentenceOutput(p.tgt, tuple(int(a != b) for a, b in zip(p.src, p.tgt))) for p in pairs]
    assert sentence_metrics(perfect, pairs) == PRF(1.0, 1.0, 1.0)
    silent = [SentenceOutput(p.src, (0,) * len(p)) for p in pairs]
    assert sentence_metrics(silent, pairs) == PRF(0.0, 0.0, 0.0)


def test_clean_corpus_identity_is_perfect(sample_index):
    pairs = [SentencePair("我受不了", "我受不了")]
    outs = [SentenceOutput("我受不了", (0, 0, 0, 0), (0, 0, 0, 0))]
    assert sentence_metrics(outs, pairs) == PRF(1.0, 1.0, 1.0)
    assert audit(outs, pairs, sample_index).detected == 0


def test_correction_never_exceeds_detection(sample_index):
    rng = np.random.default_rng(0)
    chars = "收受授手首了撩再在"
    for _ in range(30):
        pairs, outs = [], []
        for _ in range(8):
            T = int(rng.integers(1, 5))
            tgt = "".join(rng.choice(list(chars), T))
            src = "".join(c if rng.random() < 0.7 else rng.choice(list(chars)) for c in tgt)
            pred = "".join(c if rng.random() < 0.7 else rng.choice(list(chars)) for c in src)
            pairs.append(SentencePair(src, tgt))
            outs.append(SentenceOutput(pred, tuple(rng.integers(0, 2, T).tolist())))
        assert sentence_metrics(outs, pairs, "correction").f <= sentence_metrics(outs, pairs, "detection").f


def test_shape_errors():
    pairs = [SentencePair("我收", "我受")]
    with pytest.raises(ShapeError):
        sentence_metrics([SentenceOutput("我")], pairs)
    with pytest.raises(ShapeError):
        sentence_metrics([], pairs)


def test_report_json(sample_index):
    pairs, outputs, labels = _mini(sample_index)
    rep = evaluate(outputs, pairs, labels, sample_index, {"seed": 1})
    doc = json.loads(rep.dumps())
    assert doc["detection"]["P"] == 0.5 and doc["counts"]["not_in_vc"] == 2 and doc["config"] == {"seed": 1}
    assert rep.dumps() == rep.dumps()


def test_to_outputs_keeps_unknown_and_special(sample_index):
    v = sample_index.vocab
    pair = SentencePair("我X收", "我X受")
    pred = np.array([v.index_of["我"], v.index_of["受"], v.index_of["[PAD]"]])
    out = to_outputs([Prediction(pred, np.zeros(3, int), np.zeros(3, int), None)], [pair], v)[0]
    assert out.pred == "我X收"
