"""Parallel-corpus I/O and confusion-driven synthetic error injection."""
import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .charkb import CharRecord, ConfusionIndex
from .errors import LengthError, ParseError
from .train import SentencePair

log = logging.getLogger(__name__)

PHONOLOGICAL_SHARE = 0.83


def load_parallel(path) -> list:
    """Read ``src<TAB>tgt`` lines; blank lines are skipped."""
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 'src<TAB>tgt'")
            try:
                pairs.append(SentencePair(parts[0], parts[1]))
            except LengthError as e:
                raise LengthError(f"{path}:{lineno}: {e}") from None
    if not pairs:
        log.warning("corpus %s is empty", path)
    return pairs


def write_parallel(pairs, path):
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            f.write(f"{p.src}\t{p.tgt}\n")


@dataclass(frozen=True)
class CorpusSpec:
    n_sentences: int = 1000
    min_len: int = 8
    max_len: int = 24
    error_rate: float = 0.15
    phonological_ratio: float = PHONOLOGICAL_SHARE
    seed: int = 0
    # 0: targets i.i.d. uniform.  k > 0: targets follow a fixed random bigram
    # chain in which every character has k equally likely successors; the
    # chain is doubly stochastic so each position is still marginally uniform.
    successors: int = 0
    chain_seed: int = 12345

    def __post_init__(self):
        for name in ("error_rate", "phonological_ratio"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 1 <= self.min_len <= self.max_len <= 192:
            raise ValueError("length range must satisfy 1 <= min_len <= max_len <= 192")
        if self.successors < 0 or self.n_sentences < 0:
            raise ValueError("successors and n_sentences must be nonnegative")


@dataclass
class SynthStats:
    positions: int = 0
    corrupted: int = 0
    phonological: int = 0  # corruptions drawn from the phonological side
    visual: int = 0
    skipped: int = 0  # chosen for corruption but both sets were singletons


def successor_table(n, k, seed):
    """``(n, k)`` array: row i lists the allowed successors of symbol i.

    Built from k random permutations, so every symbol is also the successor
    of exactly k predecessors (counted with multiplicity).
    """
    rng = np.random.default_rng(seed)
    return np.stack([rng.permutation(n) for _ in range(k)], axis=1)


def _sources_for(index: ConfusionIndex, kind):
    """For every gold index, the characters whose ``kind`` set contains it (self excluded)."""
    members = index.dense(kind).T.copy()
    np.fill_diagonal(members, False)
    return [np.flatnonzero(row) for row in members]


def synthesize(spec: CorpusSpec, index: ConfusionIndex):
    """Generate ``(pairs, stats)``.

    A corrupted position picks the phonological side with probability
    ``phonological_ratio`` (the other side if the chosen one is empty) and
    draws the wrong character uniformly among characters whose set on that
    side contains the gold character, so the gold is always recoverable.
    """
    vocab = index.vocab
    regular = np.asarray(vocab.regular, dtype=np.int64)
    rng = np.random.default_rng(spec.seed)
    sources = {"pc": _sources_for(index, "pc"), "vc": _sources_for(index, "vc")}
    chain = successor_table(len(regular), spec.successors, spec.chain_seed) if spec.successors else None
    stats = SynthStats()
    pairs = []
    for _ in range(spec.n_sentences):
        T = int(rng.integers(spec.min_len, spec.max_len + 1))
        if chain is None:
            tgt = regular[rng.integers(0, len(regular), T)]
        else:
            slots = np.empty(T, dtype=np.int64)
            slots[0] = rng.integers(0, len(regular))
            for i in range(1, T):
                slots[i] = chain[slots[i - 1], rng.integers(0, spec.successors)]
            tgt = regular[slots]
        src = tgt.copy()
        hits = rng.random(T) < spec.error_rate
        sides = rng.random(T) < spec.phonological_ratio
        for i in np.flatnonzero(hits):
            first, second = ("pc", "vc") if sides[i] else ("vc", "pc")
            side = first if len(sources[first][tgt[i]]) else second
            cands = sources[side][tgt[i]]
            if not len(cands):
                stats.skipped += 1
                continue
            src[i] = cands[rng.integers(0, len(cands))]
            stats.corrupted += 1
            if side == "pc":
                stats.phonological += 1
            else:
                stats.visual += 1
        stats.positions += T
        pairs.append(SentencePair(vocab.decode(src), vocab.decode(tgt)))
    return pairs, stats


def write_sidecar(spec: CorpusSpec, stats: SynthStats, path, extra=None):
    doc = {"spec": asdict(spec), "stats": asdict(stats), **(extra or {})}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, ensure_ascii=False, sort_keys=True, indent=1)
        f.write("\n")


# ---------------------------------------------------------------------------
# synthetic character tables
# ---------------------------------------------------------------------------

_INITIALS = ["b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j", "q", "x",
             "zh", "ch", "sh", "r", "z", "c", "s", "y", "w"]
_FINALS = ["a", "o", "e", "ai", "ei", "ao", "ou", "an", "en", "ang", "eng", "ong", "i", "u",
           "ia", "ie", "iao", "iu", "ian", "in", "ing", "ua", "uo", "ui", "uan", "un"]


def synthetic_char_table(n_chars=60, group_size=3, seed=0, overlap=0.0, first_codepoint=0x4E00):
    """Deterministic table of ``n_chars`` CJK code points with invented readings.

    Characters come in homophone groups of ``group_size`` (same syllable,
    random tones) and in look-alike groups whose stroke sequences differ by
    one substitution from a shared base.  A fraction ``overlap`` of the
    characters keep their look-alike group equal to their homophone group
    (the phono-semantic compound pattern); the rest are shuffled, so their
    two confusion sets intersect only by chance.
    """
    rng = np.random.default_rng(seed)
    syllables = sorted({i + f for i in _INITIALS for f in _FINALS})
    n_groups = -(-n_chars // group_size)
    chosen = rng.choice(len(syllables), size=n_groups, replace=False)
    sound = [syllables[chosen[k // group_size]] for k in range(n_chars)]
    shape_of = np.arange(n_chars)
    movers = np.flatnonzero(rng.random(n_chars) >= overlap)
    shape_of[movers] = movers[rng.permutation(len(movers))]
    bases = [rng.integers(1, 6, int(rng.integers(8, 13))) for _ in range(n_groups)]
    records = []
    for k in range(n_chars):
        g = shape_of[k] // group_size
        strokes = bases[g].copy()
        pos = int(rng.integers(0, len(strokes)))
        strokes[pos] = 1 + (strokes[pos] + int(rng.integers(0, 4))) % 5
        tone = int(rng.integers(1, 6))
        records.append(CharRecord(chr(first_codepoint + k), f"{sound[k]}{tone}", tuple(int(s) for s in strokes)))
    return records
