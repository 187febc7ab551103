"""Label derivation, the three subtask losses and multi-task training."""
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import encoder as enc
from . import heads as hd
from .charkb import ConfusionIndex, Vocab
from .errors import LengthError, ShapeError, TrainingDiverged, UncoverableError
from .model import ModelState
from .searchmask import EPS, SearchMatrix, row_kinds

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SentencePair:
    src: str
    tgt: str

    def __post_init__(self):
        if len(self.src) != len(self.tgt):
            raise LengthError(f"source/target lengths differ ({len(self.src)} vs {len(self.tgt)})")
        if not self.src:
            raise LengthError("empty sentence")
        if len(self.src) > enc.MAX_LEN:
            raise LengthError(f"sentence length {len(self.src)} exceeds {enc.MAX_LEN}")

    def __len__(self):
        return len(self.src)

    @property
    def error_positions(self):
        return [i for i, (a, b) in enumerate(zip(self.src, self.tgt)) if a != b]


@dataclass
class LabelSet:
    g_d: np.ndarray  # 1 where the source character is wrong
    g_r: np.ndarray  # 1 phonological, 0 morphological; 0 where g_d == 0
    g: np.ndarray  # gold vocabulary indices
    uncoverable: tuple = ()  # error positions whose gold is in neither confusion set


def derive_labels(pair: SentencePair, vocab: Vocab, index: ConfusionIndex, strict=False) -> LabelSet:
    """Training labels from an aligned pair.

    Phonological wins when the gold character is in both sets.  A gold
    character in neither set is labelled phonological and reported in
    ``uncoverable`` (or raises with ``strict``).
    """
    x = vocab.encode(pair.src)
    g = vocab.encode(pair.tgt)
    g_d = (x != g).astype(np.int64)
    g_r = np.zeros(len(x), dtype=np.int64)
    bad = []
    for i in np.flatnonzero(g_d):
        if index.in_pc(x[i], g[i]):
            g_r[i] = 1
        elif index.in_vc(x[i], g[i]):
            g_r[i] = 0
        else:
            g_r[i] = 1
            bad.append(int(i))
    if bad and strict:
        detail = ", ".join(f"{i}:{pair.src[i]}->{pair.tgt[i]}" for i in bad)
        raise UncoverableError(f"gold outside both confusion sets at {detail}", bad)
    return LabelSet(g_d, g_r, g, tuple(bad))


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def _pick(p, labels):
    return p[np.arange(len(labels)), labels]


def loss_detection(p_d, g_d):
    if len(p_d) != len(g_d):
        raise ShapeError("p_d and g_d differ in length")
    return float(-np.log(np.maximum(_pick(p_d, np.asarray(g_d)), EPS)).sum())


def loss_reasoning(p_r, g_r, gate):
    if not (len(p_r) == len(g_r) == len(gate)):
        raise ShapeError("p_r, g_r and gate differ in length")
    terms = -np.log(np.maximum(_pick(p_r, np.asarray(g_r)), EPS))
    return float((np.asarray(gate) * terms).sum())


def loss_searching(p_masked, g):
    if len(p_masked) != len(g):
        raise ShapeError("p_masked and g differ in length")
    return float(-np.log(np.maximum(_pick(p_masked, np.asarray(g)), EPS)).sum())


@dataclass
class TrainConfig:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    lr: float = 1e-2
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    gate: str = "predicted"  # reasoning-loss gate: "predicted" (y_d) or "gold" (g_d)
    masked_loss: bool = True  # searching loss on masked (True) or raw distribution

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.gate not in ("predicted", "gold"):
            raise ValueError(f"unknown gate mode {self.gate!r}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


def total_loss(l_d, l_r, l_s, config: TrainConfig = TrainConfig()):
    return config.alpha * l_d + config.beta * l_r + config.gamma * l_s


# ---------------------------------------------------------------------------
# batched objective
# ---------------------------------------------------------------------------

@dataclass
class Batch:
    packed: enc.Packed
    g_d: np.ndarray
    g_r: np.ndarray
    g: np.ndarray

    @classmethod
    def from_examples(cls, xs, labels):
        return cls(enc.pack(xs), np.concatenate([l.g_d for l in labels]),
                   np.concatenate([l.g_r for l in labels]), np.concatenate([l.g for l in labels]))


@dataclass
class StepResult:
    l_d: float
    l_r: float
    l_s: float
    loss: float
    grads: dict
    y_d: np.ndarray
    y_r: np.ndarray
    s_pred: np.ndarray
    clamped: int
    extras: dict = field(default_factory=dict)


def _ce_logit_grad(p, labels):
    """``p - onehot(labels)``, zeroed where the label probability hit the floor."""
    dz = p.copy()
    rows = np.arange(len(labels))
    dz[rows, labels] -= 1.0
    dz[p[rows, labels] < EPS] = 0.0
    return dz


def objective(model: ModelState, batch: Batch, config: TrainConfig, kinds=None, gate=None,
              with_grads=True) -> StepResult:
    """Joint loss over a batch, averaged per sentence, and its gradient.

    The search matrix (``kinds``) and reasoning gate are piecewise constant
    in the parameters and enter as constants; they default to the ones
    implied by the current predictions.
    """
    packed = batch.packed
    n_sent = max(len(packed), 1)
    H, windows = enc.encode_packed(packed, model.encoder)
    out = hd.forward(H, model.heads)
    if kinds is None:
        kinds = row_kinds(out.y_d, out.y_r)
    if not config.masked_loss:
        kinds = np.zeros_like(kinds)
    if gate is None:
        gate = out.y_d if config.gate == "predicted" else batch.g_d
    gate = np.asarray(gate, dtype=np.float64)

    C = SearchMatrix(model.index, packed.idx, kinds).dense()
    masked = out.p_s * C
    q = masked / np.maximum(masked.sum(axis=1, keepdims=True), EPS)

    l_d = loss_detection(out.p_d, batch.g_d)
    l_r = loss_reasoning(out.p_r, batch.g_r, gate)
    l_s = loss_searching(q, batch.g)
    rows = np.arange(len(batch.g))
    clamped = int((q[rows, batch.g] < EPS).sum())
    loss = total_loss(l_d, l_r, l_s, config) / n_sent
    res = StepResult(l_d / n_sent, l_r / n_sent, l_s / n_sent, loss, {}, out.y_d, out.y_r,
                     q.argmax(axis=1), clamped)
    if not with_grads:
        return res

    dz_d = _ce_logit_grad(out.p_d, batch.g_d) * (config.alpha / n_sent)
    dz_r = _ce_logit_grad(out.p_r, batch.g_r) * (gate[:, None] * (config.beta / n_sent))
    dz_s = _ce_logit_grad(q, batch.g) * (config.gamma / n_sent)
    head_grads, dH = hd.heads_backward_logits(H, model.heads, dz_d, dz_r, dz_s)
    grads = dict(head_grads)
    if model.encoder.trainable:
        grads.update(enc.encode_backward_packed(packed, model.encoder, H, windows, dH))
    res.grads = grads
    return res


def sgd_step(model: ModelState, grads: dict, config: TrainConfig, velocity: dict):
    blocks = model.blocks()
    for name, g in grads.items():
        v = velocity.get(name)
        if config.momentum:
            v = config.momentum * v - config.lr * g if v is not None else -config.lr * g
            velocity[name] = v
            blocks[name] += v
        else:
            blocks[name] -= config.lr * g


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

def prepare(corpus, vocab: Vocab, index: ConfusionIndex):
    xs, labels = [], []
    for pair in corpus:
        labels.append(derive_labels(pair, vocab, index))
        xs.append(vocab.encode(pair.src))
    return xs, labels


def fit(corpus, model: ModelState, config: TrainConfig = TrainConfig(), log_path=None, on_epoch=None):
    """Train all three subtasks jointly with mini-batch gradient descent.

    Returns ``(trained copy of model, per-epoch records)``.  The input model
    is not modified.  Deterministic for a fixed ``config.seed``.
    """
    if not corpus:
        raise ValueError("empty training corpus")
    model = model.copy()
    xs, labels = prepare(corpus, model.vocab, model.index)
    n_uncoverable = sum(len(l.uncoverable) for l in labels)
    if n_uncoverable:
        log.warning("%d training positions have gold outside both confusion sets", n_uncoverable)
    rng = np.random.default_rng(config.seed)
    velocity = {}
    history = []
    sink = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(len(xs))
            sums = dict(l_d=0.0, l_r=0.0, l_s=0.0, loss=0.0)
            counts = dict(tok=0, det=0, err=0, rea=0, srch=0, clamped=0)
            for lo in range(0, len(order), config.batch_size):
                sel = order[lo:lo + config.batch_size]
                batch = Batch.from_examples([xs[i] for i in sel], [labels[i] for i in sel])
                step = objective(model, batch, config)
                if not np.isfinite(step.loss) or not all(np.isfinite(g).all() for g in step.grads.values()):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch}, batch {lo // config.batch_size}: "
                        f"L_d={step.l_d} L_r={step.l_r} L_s={step.l_s}")
                sgd_step(model, step.grads, config, velocity)
                k = len(sel)
                for name in sums:
                    sums[name] += getattr(step, name) * k
                err = batch.g_d == 1
                counts["tok"] += len(batch.g)
                counts["det"] += int((step.y_d == batch.g_d).sum())
                counts["err"] += int(err.sum())
                counts["rea"] += int((step.y_r[err] == batch.g_r[err]).sum())
                counts["srch"] += int((step.s_pred == batch.g).sum())
                counts["clamped"] += step.clamped
            model.epochs_trained += 1
            record = {"epoch": epoch, **{k: v / len(xs) for k, v in sums.items()},
                      "acc_detection": counts["det"] / counts["tok"],
                      "acc_reasoning": counts["rea"] / counts["err"] if counts["err"] else None,
                      "acc_searching": counts["srch"] / counts["tok"],
                      "gold_masked_out": counts["clamped"]}
            history.append(record)
            log.info("epoch %d loss %.4f (d %.4f r %.4f s %.4f)", epoch, record["loss"], record["l_d"],
                     record["l_r"], record["l_s"])
            if sink:
                sink.write(json.dumps(record, sort_keys=True) + "\n")
            if on_epoch:
                on_epoch(record, model)
    finally:
        if sink:
            sink.close()
    if config.epochs:
        model.config = {**model.config, "train": asdict(config)}
    return model, history
