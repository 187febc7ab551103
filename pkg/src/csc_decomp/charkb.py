"""Character knowledge: pinyin/stroke records, similarity, confusion index."""
import hashlib
import json
import logging
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import CoverageError, DuplicateError, HashMismatchError, ParseError, VocabError

log = logging.getLogger(__name__)

PINYIN_RE = re.compile(r"[a-z]+[1-5]")
STROKE_RE = re.compile(r"[1-5]+")

PAD = "[PAD]"
UNK = "[UNK]"
DEFAULT_SPECIALS = (PAD, UNK)

INDEX_FORMAT = "csc-confusion-index"
INDEX_VERSION = 1


@dataclass(frozen=True)
class CharRecord:
    ch: str
    pinyin: str
    strokes: tuple

    def __post_init__(self):
        if len(self.ch) != 1:
            raise ValueError(f"expected a single character, got {self.ch!r}")
        if not PINYIN_RE.fullmatch(self.pinyin):
            raise ValueError(f"bad pinyin {self.pinyin!r} for {self.ch}")
        if not self.strokes:
            raise ValueError(f"empty stroke sequence for {self.ch}")
        object.__setattr__(self, "strokes", tuple(int(s) for s in self.strokes))

    @property
    def syllable(self):
        """Pinyin with the tone digit removed."""
        return self.pinyin[:-1]


def load_char_table(path) -> list:
    """Read ``char<TAB>pinyin<TAB>strokes`` lines; ``#`` lines are comments."""
    records = []
    seen = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            ch, pinyin, strokes = parts
            if len(ch) != 1 or not PINYIN_RE.fullmatch(pinyin) or not STROKE_RE.fullmatch(strokes):
                raise ParseError(f"{path}:{lineno}: malformed record {line!r}")
            if ch in seen:
                raise DuplicateError(f"{path}:{lineno}: duplicate character {ch!r} (first on line {seen[ch]})")
            seen[ch] = lineno
            records.append(CharRecord(ch, pinyin, tuple(int(c) for c in strokes)))
    return records


def write_char_table(records: Iterable[CharRecord], path):
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(f"{r.ch}\t{r.pinyin}\t{''.join(map(str, r.strokes))}\n")


def sample_table_path() -> Path:
    """Bundled table covering the characters of the worked examples."""
    return Path(str(resources.files("csc_decomp") / "data" / "sample_chars.tsv"))


def sample_confusion_path() -> Path:
    return Path(str(resources.files("csc_decomp") / "data" / "sample_confusion.txt"))


class Vocab:
    """Ordered symbol table; specials occupy the first indices."""

    def __init__(self, chars: Sequence[str], specials: Sequence[str] = ()):
        self.chars = tuple(chars)
        self.index_of = {c: i for i, c in enumerate(self.chars)}
        if len(self.index_of) != len(self.chars):
            dupes = sorted({c for c in self.chars if self.chars.count(c) > 1})
            raise DuplicateError(f"duplicate vocabulary entries: {dupes}")
        missing = [s for s in specials if s not in self.index_of]
        if missing:
            raise VocabError(f"specials not in vocabulary: {missing}")
        self.specials = tuple(self.index_of[s] for s in specials)

    @classmethod
    def from_chars(cls, chars: Iterable[str], specials=DEFAULT_SPECIALS):
        return cls(tuple(specials) + tuple(chars), specials)

    def __len__(self):
        return len(self.chars)

    def __contains__(self, ch):
        return ch in self.index_of

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.chars == other.chars and self.specials == other.specials

    def __hash__(self):
        return hash(self.chars)

    @property
    def unk(self):
        return self.index_of.get(UNK)

    @property
    def regular(self):
        """Indices of non-special entries."""
        sp = set(self.specials)
        return [i for i in range(len(self.chars)) if i not in sp]

    def encode(self, text: Iterable[str], strict: bool = True) -> np.ndarray:
        out = []
        for pos, ch in enumerate(text):
            i = self.index_of.get(ch)
            if i is None:
                if strict or self.unk is None:
                    raise VocabError(f"character {ch!r} at position {pos} is not in the vocabulary")
                i = self.unk
            out.append(i)
        return np.asarray(out, dtype=np.int64)

    def decode(self, indices) -> str:
        return "".join(self.chars[i] for i in indices)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps([list(self.chars), list(self.specials)], ensure_ascii=False).encode("utf-8"))
        return h.hexdigest()


@dataclass(frozen=True)
class SimilarityPolicy:
    pinyin_mode: str = "exact"  # "exact" (tone-insensitive) or "edit"
    pinyin_k: int = 1
    stroke_tau: float = 0.25

    def __post_init__(self):
        if self.pinyin_mode not in ("exact", "edit"):
            raise ValueError(f"unknown pinyin_mode {self.pinyin_mode!r}")
        if self.pinyin_k < 0:
            raise ValueError("pinyin_k must be >= 0")
        if not 0.0 <= self.stroke_tau <= 1.0:
            raise ValueError("stroke_tau must lie in [0, 1]")

    def as_dict(self):
        return {"pinyin_mode": self.pinyin_mode, "pinyin_k": self.pinyin_k, "stroke_tau": self.stroke_tau}


def _letters(s):
    return [ord(c) for c in s]


def pinyin_similar(a: CharRecord, b: CharRecord, policy: SimilarityPolicy = SimilarityPolicy()) -> bool:
    if policy.pinyin_mode == "exact":
        return a.syllable == b.syllable
    return _kernels.levenshtein(_letters(a.syllable), _letters(b.syllable)) <= policy.pinyin_k


def stroke_distance(a: CharRecord, b: CharRecord) -> float:
    """Stroke edit distance normalised by the longer sequence."""
    return _kernels.levenshtein(a.strokes, b.strokes) / max(len(a.strokes), len(b.strokes))


def stroke_similar(a: CharRecord, b: CharRecord, policy: SimilarityPolicy = SimilarityPolicy()) -> bool:
    return stroke_distance(a, b) <= policy.stroke_tau


def _pack(rows: np.ndarray) -> np.ndarray:
    packed = np.packbits(rows.astype(bool), axis=1)
    packed.setflags(write=False)
    return packed


class ConfusionIndex:
    """Per-index phonological (pc) and visual (vc) sets as packed bit rows.

    Immutable.  Every index is a member of its own pc and vc sets.
    """

    def __init__(self, vocab: Vocab, pc_bits: np.ndarray, vc_bits: np.ndarray, policy=None):
        n = len(vocab)
        if pc_bits.shape != (n, n) or vc_bits.shape != (n, n):
            raise ValueError("membership matrices must be vocab x vocab")
        pc = np.array(pc_bits, dtype=bool)
        vc = np.array(vc_bits, dtype=bool)
        np.fill_diagonal(pc, True)
        np.fill_diagonal(vc, True)
        self.vocab = vocab
        self.policy = policy
        self._pc = _pack(pc)
        self._vc = _pack(vc)
        self._sizes = {"pc": pc.sum(axis=1), "vc": vc.sum(axis=1)}

    def __len__(self):
        return len(self.vocab)

    def _rows(self, packed):
        return np.unpackbits(packed, axis=1, count=len(self.vocab)).astype(bool)

    def dense(self, kind: str) -> np.ndarray:
        """Full vocab x vocab boolean membership matrix for ``kind`` in {"pc", "vc"}."""
        return self._rows(self._pc if kind == "pc" else self._vc)

    def packed(self, kind: str) -> np.ndarray:
        return self._pc if kind == "pc" else self._vc

    def row(self, kind: str, i: int) -> np.ndarray:
        packed = self._pc if kind == "pc" else self._vc
        return np.unpackbits(packed[i], count=len(self.vocab)).astype(bool)

    def sizes(self, kind: str) -> np.ndarray:
        """Set cardinality per index (always >= 1)."""
        return self._sizes["pc" if kind in ("pc", "phonological") else "vc"]

    def pc(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.row("pc", i))

    def vc(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.row("vc", i))

    def in_pc(self, src: int, cand: int) -> bool:
        return bool(self._pc[src, cand >> 3] & (0x80 >> (cand & 7)))

    def in_vc(self, src: int, cand: int) -> bool:
        return bool(self._vc[src, cand >> 3] & (0x80 >> (cand & 7)))

    def __eq__(self, other):
        return (
            isinstance(other, ConfusionIndex)
            and self.vocab == other.vocab
            and np.array_equal(self._pc, other._pc)
            and np.array_equal(self._vc, other._vc)
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.vocab.digest().encode())
        h.update(self._pc.tobytes())
        h.update(self._vc.tobytes())
        return h.hexdigest()

    def with_pairs(self, pairs, kind: str) -> "ConfusionIndex":
        pc = self.dense("pc")
        vc = self.dense("vc")
        target = pc if kind in ("pc", "phonological") else vc
        for i, j in pairs:
            target[i, j] = True
        return ConfusionIndex(self.vocab, pc, vc, self.policy)

    def to_json(self) -> dict:
        return {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "vocab": list(self.vocab.chars),
            "specials": [self.vocab.chars[i] for i in self.vocab.specials],
            "vocab_hash": self.vocab.digest(),
            "index_hash": self.digest(),
            "policy": self.policy.as_dict() if self.policy else None,
            "pc": [self.pc(i).tolist() for i in range(len(self.vocab))],
            "vc": [self.vc(i).tolist() for i in range(len(self.vocab))],
        }

    @classmethod
    def from_json(cls, doc: dict, vocab: Vocab = None) -> "ConfusionIndex":
        if doc.get("format") != INDEX_FORMAT:
            raise ParseError(f"not a confusion index document (format={doc.get('format')!r})")
        if doc.get("version") != INDEX_VERSION:
            raise ParseError(f"unsupported confusion index version {doc.get('version')!r}")
        stored = Vocab(doc["vocab"], doc.get("specials", ()))
        if stored.digest() != doc["vocab_hash"]:
            raise HashMismatchError("confusion index vocab hash does not match its vocabulary")
        if vocab is not None and vocab.digest() != doc["vocab_hash"]:
            raise HashMismatchError(
                f"confusion index vocab hash {doc['vocab_hash'][:12]} != expected {vocab.digest()[:12]}"
            )
        n = len(stored)
        pc = np.zeros((n, n), dtype=bool)
        vc = np.zeros((n, n), dtype=bool)
        for i, members in enumerate(doc["pc"]):
            pc[i, members] = True
        for i, members in enumerate(doc["vc"]):
            vc[i, members] = True
        policy = SimilarityPolicy(**doc["policy"]) if doc.get("policy") else None
        index = cls(stored, pc, vc, policy)
        if "index_hash" in doc and index.digest() != doc["index_hash"]:
            raise HashMismatchError("confusion index content hash mismatch")
        return index


def save_index(index: ConfusionIndex, path, provenance=None):
    doc = index.to_json()
    if provenance is not None:
        doc["provenance"] = provenance
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, ensure_ascii=False, sort_keys=True)
        f.write("\n")


def load_index(path, vocab: Vocab = None) -> ConfusionIndex:
    with open(path, encoding="utf-8") as f:
        return ConfusionIndex.from_json(json.load(f), vocab)


def build_confusion_index(vocab: Vocab, table: Sequence[CharRecord],
                          policy: SimilarityPolicy = SimilarityPolicy()) -> ConfusionIndex:
    by_char = {r.ch: r for r in table}
    regular = vocab.regular
    missing = [vocab.chars[i] for i in regular if vocab.chars[i] not in by_char]
    if missing:
        raise CoverageError(f"{len(missing)} vocabulary characters have no record: {''.join(missing[:50])}")
    n = len(vocab)
    recs = [by_char[vocab.chars[i]] for i in regular]
    reg = np.asarray(regular, dtype=np.int64)

    if policy.pinyin_mode == "exact":
        syl = np.array([r.syllable for r in recs], dtype=object)
        pc_sub = syl[:, None] == syl[None, :]
    else:
        dist = _kernels.pairwise_levenshtein([_letters(r.syllable) for r in recs])
        pc_sub = dist <= policy.pinyin_k

    dist = _kernels.pairwise_levenshtein([r.strokes for r in recs])
    lens = np.array([len(r.strokes) for r in recs], dtype=np.int64)
    vc_sub = dist / np.maximum.outer(lens, lens) <= policy.stroke_tau

    pc = np.zeros((n, n), dtype=bool)
    vc = np.zeros((n, n), dtype=bool)
    pc[np.ix_(reg, reg)] = pc_sub
    vc[np.ix_(reg, reg)] = vc_sub
    return ConfusionIndex(vocab, pc, vc, policy)


def read_external_pairs(path):
    """Yield ``(char, candidate)`` from a ``char<TAB>candidates`` file."""
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or len(parts[0]) != 1:
                raise ParseError(f"{path}:{lineno}: expected 'char<TAB>candidates'")
            for cand in parts[1].strip():
                yield parts[0], cand


def merge_external_sets(index: ConfusionIndex, path, kind: str) -> ConfusionIndex:
    """Union ``char<TAB>candidates`` confusion pairs into the phonological or visual side.

    Pairs naming characters outside the vocabulary are skipped and counted.
    """
    if kind not in ("phonological", "visual", "pc", "vc"):
        raise ValueError(f"unknown kind {kind!r}")
    vocab = index.vocab
    pairs = []
    skipped = 0
    for ch, cand in read_external_pairs(path):
        if ch in vocab and cand in vocab:
            pairs.append((vocab.index_of[ch], vocab.index_of[cand]))
        else:
            skipped += 1
    if skipped:
        log.warning("skipped %d confusion pairs with out-of-vocabulary characters from %s", skipped, path)
    return index.with_pairs(pairs, kind)
