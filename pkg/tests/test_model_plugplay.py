import io
import json
import zipfile

import numpy as np
import pytest

from csc_decomp import encoder as enc
from csc_decomp import heads as hd
from csc_decomp.charkb import Vocab, build_confusion_index
from csc_decomp.corpus import CorpusSpec, synthesize, synthetic_char_table
from csc_decomp.errors import CompatibilityError, HashMismatchError, ParseError
from csc_decomp.model import init_model, load_checkpoint, predict, save_checkpoint
from csc_decomp.plugplay import CorrectionModel, DRModule, combined_predict, dr_infer, transfer_predict
from csc_decomp.searchmask import build_search_matrix
from csc_decomp.train import TrainConfig, fit, prepare


@pytest.fixture(scope="module")
def trained(synth_index):
    corpus = synthesize(CorpusSpec(300, seed=1, successors=3), synth_index)[0]
    model, _ = fit(corpus, init_model(synth_index, d_e=8, hidden=16, seed=0), TrainConfig(epochs=5))
    test = synthesize(CorpusSpec(60, seed=2, successors=3), synth_index)[0]
    return model, test


def test_checkpoint_roundtrip(trained, tmp_path):
    model, _ = trained
    save_checkpoint(model, tmp_path / "a.ckpt")
    back = load_checkpoint(tmp_path / "a.ckpt", model.vocab, model.index)
    for k, v in model.blocks().items():
        np.testing.assert_array_equal(back.blocks()[k], v)
    assert back.config == model.config and back.epochs_trained == model.epochs_trained
    save_checkpoint(back, tmp_path / "b.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_checkpoint_hash_checks(trained, tmp_path, sample_index):
    model, _ = trained
    path = tmp_path / "a.ckpt"
    save_checkpoint(model, path)
    with pytest.raises(HashMismatchError):
        load_checkpoint(path, sample_index.vocab)
    with pytest.raises(HashMismatchError):
        i, j = np.argwhere(~model.index.dense("pc"))[0]
        load_checkpoint(path, index=model.index.with_pairs([(int(i), int(j))], "pc"))
    # tamper with the stored index
    with zipfile.ZipFile(path) as zf:
        entries = {n: zf.read(n) for n in zf.namelist()}
    meta = json.loads(entries["meta.json"])
    meta["index"]["pc"][3] = [3, 4, 5, 6]
    del meta["index"]["index_hash"]
    entries["meta.json"] = json.dumps(meta).encode()
    with zipfile.ZipFile(path, "w") as zf:
        for n, data in entries.items():
            zf.writestr(n, data)
    with pytest.raises(HashMismatchError):
        load_checkpoint(path)
    (tmp_path / "junk").write_bytes(b"not a zip")
    with pytest.raises(ParseError):
        load_checkpoint(tmp_path / "junk")


def test_predict_matches_composition(trained):
    model, test = trained
    xs, _ = prepare(test, model.vocab, model.index)
    preds = predict(model, xs, batch_size=1)
    for x, p in zip(xs, preds):
        H = enc.encode(x, model.encoder)
        _, y_d = hd.detect(H, model.heads)
        _, y_r = hd.reason(H, model.heads)
        c = build_search_matrix(x, y_d, y_r, model.index).dense()
        want = (hd.search_probs(H, model.heads) * c).argmax(axis=1)
        np.testing.assert_array_equal(p.pred, want)
        np.testing.assert_array_equal(p.y_d, y_d)


def test_detected_argmax_in_confusion_set(trained):
    model, test = trained
    xs, labels = prepare(test, model.vocab, model.index)
    for mode in (dict(), dict(gold_d=[l.g_d for l in labels]),
                 dict(gold_d=[l.g_d for l in labels], gold_r=[l.g_r for l in labels])):
        for x, p in zip(xs, predict(model, xs, **mode)):
            for i in np.flatnonzero(p.y_d == 1):
                member = model.index.in_pc if p.y_r[i] == 1 else model.index.in_vc
                assert member(x[i], p.pred[i])


def test_gold_oracle_flags_are_used(trained):
    model, test = trained
    xs, labels = prepare(test, model.vocab, model.index)
    preds = predict(model, xs, gold_d=[l.g_d for l in labels], gold_r=[l.g_r for l in labels])
    for p, l in zip(preds, labels):
        np.testing.assert_array_equal(p.y_d, l.g_d)
        np.testing.assert_array_equal(p.y_r, l.g_r)


def test_self_transfer_bit_exact(trained):
    model, test = trained
    xs, _ = prepare(test, model.vocab, model.index)
    native = predict(model, xs)
    plugged = transfer_predict(xs, DRModule.from_model(model), CorrectionModel.from_model(model))
    for a, b in zip(native, plugged):
        np.testing.assert_array_equal(a.pred, b.pred)
        np.testing.assert_array_equal(a.kinds, b.kinds)


def test_cross_transfer_soundness(trained, synth_index):
    model, test = trained
    other = init_model(synth_index, d_e=5, hidden=7, window=1, seed=9)
    xs, _ = prepare(test, model.vocab, model.index)
    dr = DRModule.from_model(other)
    for x in xs[:20]:
        pred, sub = combined_predict(x, dr, CorrectionModel.from_model(model))
        y_d, y_r, _ = dr_infer(x, dr)
        np.testing.assert_array_equal(sub.y_d, y_d)
        for i in np.flatnonzero(y_d == 1):
            member = synth_index.in_pc if y_r[i] == 1 else synth_index.in_vc
            assert member(x[i], pred[i])


def test_transfer_rejects_other_vocab(trained, sample_index):
    model, test = trained
    stranger = init_model(sample_index, seed=0)
    with pytest.raises(CompatibilityError):
        combined_predict([2, 3], DRModule.from_model(stranger), CorrectionModel.from_model(model))


def test_predict_deterministic(trained):
    model, test = trained
    xs, _ = prepare(test, model.vocab, model.index)
    a, b = predict(model, xs), predict(model, xs)
    assert all(np.array_equal(p.pred, q.pred) for p, q in zip(a, b))
