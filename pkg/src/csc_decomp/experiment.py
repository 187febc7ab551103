"""The scaled-down synthetic experiment: oracle rows, mask ablation, self-transfer."""
import time
from dataclasses import dataclass, field

import numpy as np

from .charkb import Vocab, build_confusion_index
from .corpus import CorpusSpec, synthesize, synthetic_char_table
from .evalsuite import evaluate_model
from .model import init_model, predict
from .plugplay import CorrectionModel, DRModule, transfer_predict
from .train import TrainConfig, fit


@dataclass(frozen=True)
class SyntheticSetup:
    n_chars: int = 60
    group_size: int = 3
    overlap: float = 0.8
    table_seed: int = 0
    successors: int = 3
    chain_seed: int = 12345
    n_train: int = 5000
    n_test: int = 2000
    error_rate: float = 0.15
    phonological_ratio: float = 0.83
    train_seed: int = 1
    test_seed: int = 2
    model_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)

    def index(self):
        table = synthetic_char_table(self.n_chars, self.group_size, self.table_seed, self.overlap)
        return build_confusion_index(Vocab.from_chars(r.ch for r in table), table)

    def corpus(self, index, n, seed):
        spec = CorpusSpec(n, error_rate=self.error_rate, phonological_ratio=self.phonological_ratio,
                          seed=seed, successors=self.successors, chain_seed=self.chain_seed)
        return synthesize(spec, index)[0]


@dataclass
class ExperimentResult:
    setup: SyntheticSetup
    model: object
    history: list
    reports: dict  # mode name -> EvalReport
    self_transfer_identical: bool
    train_seconds: float

    def f1(self, mode, level="correction"):
        return getattr(self.reports[mode], level).f


MODES = {
    "predicted": dict(),
    "gold_d": dict(gold_d=True),
    "gold_dr": dict(gold_d=True, gold_r=True),
    "no_mask": dict(use_mask=False),
}


def run(setup: SyntheticSetup = SyntheticSetup(), on_epoch=None) -> ExperimentResult:
    index = setup.index()
    train_pairs = setup.corpus(index, setup.n_train, setup.train_seed)
    test_pairs = setup.corpus(index, setup.n_test, setup.test_seed)
    model = init_model(index, seed=setup.model_seed)
    t0 = time.perf_counter()
    model, history = fit(train_pairs, model, setup.train, on_epoch=on_epoch)
    elapsed = time.perf_counter() - t0
    reports = {name: evaluate_model(model, test_pairs, config={"mode": name}, **kw)[0]
               for name, kw in MODES.items()}

    xs = [model.vocab.encode(p.src) for p in test_pairs]
    native = predict(model, xs)
    plugged = transfer_predict(xs, DRModule.from_model(model), CorrectionModel.from_model(model))
    identical = all(np.array_equal(a.pred, b.pred) and np.array_equal(a.y_d, b.y_d)
                    and np.array_equal(a.y_r, b.y_r) for a, b in zip(native, plugged))
    return ExperimentResult(setup, model, history, reports, identical and len(native) == len(plugged), elapsed)
