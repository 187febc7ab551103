import json
import logging

import numpy as np
import pytest

from csc_decomp.charkb import Vocab, build_confusion_index
from csc_decomp.corpus import (CorpusSpec, load_parallel, successor_table, synthesize, synthetic_char_table,
                               write_parallel, write_sidecar)
from csc_decomp.errors import LengthError, ParseError
from csc_decomp.train import SentencePair, derive_labels


def test_parallel_roundtrip(tmp_path):
    pairs = [SentencePair("我收不了", "我受不了"), SentencePair("侍", "待")]
    write_parallel(pairs, tmp_path / "c.txt")
    assert load_parallel(tmp_path / "c.txt") == pairs


def test_parallel_errors(tmp_path, caplog):
    p = tmp_path / "c.txt"
    p.write_text("我收\t我受\n我收不了\n", encoding="utf-8")
    with pytest.raises(ParseError, match=":2:"):
        load_parallel(p)
    p.write_text("我收\t我\n", encoding="utf-8")
    with pytest.raises(LengthError, match=":1:"):
        load_parallel(p)
    p.write_text("\n", encoding="utf-8")
    with caplog.at_level(logging.WARNING):
        assert load_parallel(p) == []
    assert "empty" in caplog.text


def test_phonological_share_monte_carlo():
    # seed 7, 30-character vocabulary, 10,000 corruptions
    table = synthetic_char_table(30, seed=7, overlap=0.0)
    index = build_confusion_index(Vocab.from_chars(r.ch for r in table), table)
    pairs, stats = synthesize(CorpusSpec(3200, min_len=20, max_len=24, error_rate=0.15, seed=7), index)
    assert stats.corrupted >= 10_000
    assert stats.skipped == 0
    assert abs(stats.phonological / stats.corrupted - 0.83) <= 0.02


def test_synthesized_errors_are_coverable(synth_index):
    pairs, stats = synthesize(CorpusSpec(400, seed=3, successors=2), synth_index)
    n_err = 0
    for p in pairs:
        lab = derive_labels(p, synth_index.vocab, synth_index)
        assert lab.uncoverable == ()
        n_err += int(lab.g_d.sum())
    assert n_err == stats.corrupted


def test_synthesize_deterministic_and_bounded(synth_index):
    spec = CorpusSpec(50, min_len=3, max_len=9, seed=11)
    a, sa = synthesize(spec, synth_index)
    b, sb = synthesize(spec, synth_index)
    assert a == b and sa == sb
    assert all(3 <= len(p) <= 9 for p in a)
    assert synthesize(CorpusSpec(50, min_len=3, max_len=9, seed=12), synth_index)[0] != a


def test_error_rate_zero_and_one(synth_index):
    clean, st = synthesize(CorpusSpec(20, error_rate=0.0), synth_index)
    assert all(p.src == p.tgt for p in clean) and st.corrupted == 0
    _, st = synthesize(CorpusSpec(20, error_rate=1.0), synth_index)
    assert st.corrupted + st.skipped == st.positions


def test_successor_chain_is_doubly_stochastic():
    t = successor_table(12, 3, 0)
    assert t.shape == (12, 3)
    np.testing.assert_array_equal(np.bincount(t.ravel(), minlength=12), np.full(12, 3))


def test_chain_targets_follow_successors(synth_index):
    spec = CorpusSpec(30, successors=2, seed=5)
    pairs, _ = synthesize(spec, synth_index)
    vocab = synth_index.vocab
    pos = {c: k for k, c in enumerate(vocab.regular)}
    table = successor_table(len(vocab.regular), 2, spec.chain_seed)
    for p in pairs:
        t = [pos[i] for i in vocab.encode(p.tgt)]
        for a, b in zip(t, t[1:]):
            assert b in table[a]


def test_spec_validation():
    for bad in (dict(error_rate=1.5), dict(min_len=5, max_len=4), dict(max_len=200), dict(successors=-1)):
        with pytest.raises(ValueError):
            CorpusSpec(**bad)


def test_sidecar(tmp_path, synth_index):
    spec = CorpusSpec(5)
    _, st = synthesize(spec, synth_index)
    write_sidecar(spec, st, tmp_path / "s.json", extra={"k": 1})
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["spec"]["n_sentences"] == 5 and doc["stats"]["positions"] == st.positions and doc["k"] == 1


def test_synthetic_table_overlap_extremes():
    for overlap, expect_same in ((1.0, True), (0.0, False)):
        table = synthetic_char_table(45, seed=1, overlap=overlap)
        index = build_confusion_index(Vocab.from_chars(r.ch for r in table), table)
        both = (index.dense("pc") & index.dense("vc")).sum() - len(index.vocab)
        if expect_same:
            assert both > 45
        else:
            assert both < 20
