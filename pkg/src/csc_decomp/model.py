"""Model state, the native prediction pipeline and checkpoint I/O."""
import io
import json
import zipfile
from dataclasses import dataclass, field

import numpy as np

from . import encoder as enc
from . import heads as hd
from .charkb import ConfusionIndex, Vocab
from .errors import HashMismatchError, ParseError
from .searchmask import ALL, SearchMatrix, row_kinds

CHECKPOINT_FORMAT = "csc-decomp-checkpoint"
CHECKPOINT_VERSION = 1
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass
class ModelState:
    vocab: Vocab
    index: ConfusionIndex
    encoder: enc.EncoderParams
    heads: hd.HeadParams
    seed: int = 0
    epochs_trained: int = 0
    config: dict = field(default_factory=dict)

    def copy(self):
        return ModelState(self.vocab, self.index, self.encoder.copy(), self.heads.copy(),
                          self.seed, self.epochs_trained, dict(self.config))

    def blocks(self):
        """All parameter arrays keyed by block name."""
        return {**self.encoder.blocks(), **self.heads.blocks()}


def init_model(index: ConfusionIndex, encoder="toy", d_e=32, hidden=64, window=2, seed=0,
               max_len=enc.MAX_LEN) -> ModelState:
    rng = np.random.default_rng(seed)
    make = {"toy": enc.init_toy, "fixed": enc.init_fixed}[encoder]
    vocab_size = len(index.vocab)
    params = make(vocab_size, d_e=d_e, hidden=hidden, window=window, rng=rng, max_len=max_len)
    heads = hd.init_heads(vocab_size, hidden, rng)
    config = {"encoder": encoder, "d_e": d_e, "hidden": hidden, "window": window, "max_len": max_len}
    return ModelState(index.vocab, index, params, heads, seed, 0, config)


@dataclass
class Prediction:
    """Per-sentence pipeline output: corrected indices plus subtask decisions."""

    pred: np.ndarray
    y_d: np.ndarray
    y_r: np.ndarray
    kinds: np.ndarray

    @property
    def flags(self):
        return self.y_d


def masked_argmax(p_s, search: SearchMatrix):
    out = p_s.argmax(axis=1)
    rows = np.flatnonzero(search.kinds != ALL)
    if rows.size:
        sub = SearchMatrix(search.index, search.x[rows], search.kinds[rows])
        out[rows] = (p_s[rows] * sub.dense()).argmax(axis=1)
    return out


def predict_packed(model: ModelState, packed: enc.Packed, gold_d=None, gold_r=None, use_mask=True,
                   singleton_fallback=False):
    """Flat-token pipeline: encode, three heads, search matrix, masked argmax."""
    H, _ = enc.encode_packed(packed, model.encoder)
    out = hd.forward(H, model.heads)
    y_d = out.y_d if gold_d is None else np.asarray(gold_d, dtype=np.int64)
    y_r = out.y_r if gold_r is None else np.asarray(gold_r, dtype=np.int64)
    if use_mask:
        kinds = row_kinds(y_d, y_r, model.index, packed.idx, singleton_fallback)
    else:
        kinds = np.zeros(packed.n_tokens, dtype=np.int8)
    pred = masked_argmax(out.p_s, SearchMatrix(model.index, packed.idx, kinds))
    return pred, y_d, y_r, kinds, out


def predict(model: ModelState, sequences, gold_d=None, gold_r=None, use_mask=True,
            singleton_fallback=False, batch_size=256):
    """Run the native pipeline over index sequences.

    ``gold_d``/``gold_r`` (per-sentence label arrays) replace the predicted
    decisions when building the search matrix.
    """
    results = []
    for lo in range(0, len(sequences), batch_size):
        chunk = sequences[lo:lo + batch_size]
        packed = enc.pack(chunk)
        gd = None if gold_d is None else np.concatenate([np.asarray(g) for g in gold_d[lo:lo + batch_size]])
        gr = None if gold_r is None else np.concatenate([np.asarray(g) for g in gold_r[lo:lo + batch_size]])
        pred, y_d, y_r, kinds, _ = predict_packed(model, packed, gd, gr, use_mask, singleton_fallback)
        for p, d, r, k in zip(packed.split(pred), packed.split(y_d), packed.split(y_r), packed.split(kinds)):
            results.append(Prediction(p, d, r, k))
    return results


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def _npy_bytes(a):
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(a), allow_pickle=False)
    return buf.getvalue()


def _write_entry(zf, name, data):
    info = zipfile.ZipInfo(name, date_time=_ZIP_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def save_checkpoint(model: ModelState, path):
    """Write a byte-reproducible zip of metadata plus ``.npy`` parameter blocks."""
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "vocab_hash": model.vocab.digest(),
        "index_hash": model.index.digest(),
        "index": model.index.to_json(),
        "encoder": {"window": model.encoder.window, "max_len": model.encoder.max_len,
                    "trainable": model.encoder.trainable},
        "seed": model.seed,
        "epochs_trained": model.epochs_trained,
        "config": model.config,
    }
    with zipfile.ZipFile(path, "w") as zf:
        _write_entry(zf, "meta.json", json.dumps(meta, ensure_ascii=False, sort_keys=True, indent=1))
        for prefix, blocks in (("encoder", model.encoder.blocks()), ("heads", model.heads.blocks())):
            for name, arr in blocks.items():
                _write_entry(zf, f"{prefix}/{name}.npy", _npy_bytes(arr))


def load_checkpoint(path, vocab: Vocab = None, index: ConfusionIndex = None) -> ModelState:
    """Load and verify a checkpoint; optional ``vocab``/``index`` must match its hashes."""
    try:
        zf = zipfile.ZipFile(path)
    except zipfile.BadZipFile as e:
        raise ParseError(f"{path}: not a checkpoint ({e})") from None
    with zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format") != CHECKPOINT_FORMAT or meta.get("version") != CHECKPOINT_VERSION:
            raise ParseError(f"{path}: unsupported checkpoint format/version")
        arrays = {n[:-4]: np.load(io.BytesIO(zf.read(n)), allow_pickle=False)
                  for n in zf.namelist() if n.endswith(".npy")}
    stored_index = ConfusionIndex.from_json(meta["index"])
    if stored_index.vocab.digest() != meta["vocab_hash"]:
        raise HashMismatchError(f"{path}: vocab hash mismatch")
    if stored_index.digest() != meta["index_hash"]:
        raise HashMismatchError(f"{path}: confusion index hash mismatch")
    if vocab is not None and vocab.digest() != meta["vocab_hash"]:
        raise HashMismatchError(f"{path}: checkpoint vocabulary differs from the supplied one")
    if index is not None and index.digest() != meta["index_hash"]:
        raise HashMismatchError(f"{path}: checkpoint confusion index differs from the supplied one")
    e = meta["encoder"]
    encoder = enc.EncoderParams(arrays["encoder/embeddings"], arrays["encoder/W_h"], arrays["encoder/b_h"],
                                e["window"], e["max_len"], e["trainable"])
    heads = hd.HeadParams(**{k: arrays[f"heads/{k}"] for k in ("W_D", "b_D", "W_R", "b_R", "W_S", "b_S")})
    return ModelState(stored_index.vocab, stored_index, encoder, heads, meta["seed"], meta["epochs_trained"],
                      meta["config"])
