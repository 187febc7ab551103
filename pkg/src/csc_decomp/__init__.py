"""Chinese spelling check decomposed into detection, reasoning and search."""
from ._kernels import BACKEND
from .charkb import (CharRecord, ConfusionIndex, SimilarityPolicy, Vocab, build_confusion_index,
                     load_char_table, load_index, merge_external_sets, save_index)
from .model import ModelState, init_model, load_checkpoint, predict, save_checkpoint
from .train import SentencePair, TrainConfig, derive_labels, fit

__version__ = "0.1.0"
