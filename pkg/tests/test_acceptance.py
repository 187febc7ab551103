"""Acceptance criteria 1-9.

Each test prints one ``criterion N ... PASS/FAIL`` line (also repeated in the
pytest terminal summary).  Run directly with ``python3 tests/test_acceptance.py``
or through pytest.
"""
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, DATA
from csc_decomp.charkb import Vocab, build_confusion_index
from csc_decomp.corpus import CorpusSpec, synthesize, synthetic_char_table
from csc_decomp.evalsuite import SentenceOutput, audit, sentence_metrics
from csc_decomp.experiment import SyntheticSetup, run
from csc_decomp.model import masked_argmax
from csc_decomp.searchmask import apply_mask, build_search_matrix
from csc_decomp.train import SentencePair, derive_labels
from minicorpus import golden, load_rows
from oracles import gradcheck_instance, masked_probs_oracle, search_row_oracle


def report(n, title, ok, detail):
    line = f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def experiment():
    t0 = time.perf_counter()
    result = run(SyntheticSetup())
    return result, time.perf_counter() - t0


def test_criterion_1_gradients():
    t0 = time.perf_counter()
    worst = {}
    for seed in range(100, 120):
        for name, err in gradcheck_instance(seed).items():
            worst[name] = max(worst.get(name, 0.0), err)
    elapsed = time.perf_counter() - t0
    blocks = {"embeddings", "W_h", "b_h", "W_D", "b_D", "W_R", "b_R", "W_S", "b_S"}
    ok = set(worst) == blocks and max(worst.values()) < 1e-4 and elapsed < 30
    assert report(1, "finite-difference gradients", ok,
                  f"20 instances, max relative error {max(worst.values()):.2e} (< 1e-4) over {len(worst)} blocks, "
                  f"{elapsed:.1f}s (< 30s)")


def test_criterion_2_masking():
    t0 = time.perf_counter()
    table = synthetic_char_table(50, seed=2, overlap=0.5)
    index = build_confusion_index(Vocab.from_chars(r.ch for r in table), table)
    n = len(index.vocab)
    pc = [set(index.pc(i).tolist()) for i in range(n)]
    vc = [set(index.vc(i).tolist()) for i in range(n)]
    rng = np.random.default_rng(2)
    mismatches = outside = detected = 0
    for _ in range(1000):
        T = int(rng.integers(1, 21))
        x = rng.choice(index.vocab.regular, T)
        y_d, y_r = rng.integers(0, 2, T), rng.integers(0, 2, T)
        p = rng.dirichlet(np.ones(n), T)
        c = build_search_matrix(x, y_d, y_r, index)
        want_c = [search_row_oracle(int(x[i]), int(y_d[i]), int(y_r[i]), pc, vc, n) for i in range(T)]
        want_p = np.array(masked_probs_oracle(p.tolist(), want_c))
        mismatches += not (np.array_equal(c.dense(), np.array(want_c)) and np.array_equal(apply_mask(p, c), want_p))
        pred = masked_argmax(p, c)
        for i in np.flatnonzero(y_d == 1):
            detected += 1
            outside += int(pred[i]) not in (pc if y_r[i] == 1 else vc)[x[i]]
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and outside == 0 and elapsed < 10
    assert report(2, "masking soundness", ok,
                  f"1000 draws, {mismatches} oracle mismatches, {outside}/{detected} detected argmaxes outside "
                  f"their set, {elapsed:.1f}s (< 10s)")


def test_criterion_3_oracle_ordering(experiment):
    res, elapsed = experiment
    f_p, f_d, f_dr = res.f1("predicted"), res.f1("gold_d"), res.f1("gold_dr")
    ok = f_dr >= f_d >= f_p and elapsed < 600
    assert report(3, "oracle-label ordering", ok,
                  f"correction F1 gold d+r {f_dr:.4f} >= gold d {f_d:.4f} >= predicted {f_p:.4f}; "
                  f"train+eval {elapsed:.0f}s (< 600s)")


def test_criterion_4_self_transfer(experiment):
    res, _ = experiment
    ok = res.self_transfer_identical
    assert report(4, "plug-and-play self-transfer", ok,
                  f"{res.setup.n_test} held-out sentences, bit-identical: {ok}")


def test_criterion_5_mask_ablation(experiment):
    res, _ = experiment
    with_mask, without = res.f1("predicted"), res.f1("no_mask")
    ok = with_mask >= without
    assert report(5, "mask ablation direction", ok,
                  f"correction F1 masked {with_mask:.4f} vs all-ones {without:.4f}, margin {with_mask - without:+.4f}")


def test_criterion_6_progressive_difficulty(experiment):
    res, _ = experiment
    sub = res.reports["predicted"].subtasks
    d, r, s = sub["detection"].f, sub["reasoning"].f, sub["searching"].f
    ok = s <= d
    assert report(6, "progressive difficulty", ok,
                  f"subtask F1 detection {d:.4f}, reasoning {r:.4f}, searching {s:.4f} (asserted: searching <= "
                  f"detection); full ordering {'holds' if d >= r >= s else 'does not hold'} (logged only); "
                  f"sentence-level detection F1 {res.reports['predicted'].detection.f:.4f}")


def test_criterion_7_golden_files(sample_index):
    import json
    frozen = json.loads((DATA / "mini_corpus_golden.json").read_text(encoding="utf-8"))
    rows, reasons = load_rows()
    pairs = [SentencePair(s, t) for s, t, _, _ in rows]
    outs = [SentenceOutput(p, tuple(d), tuple(r)) for (_, _, p, d), r in zip(rows, reasons)]
    got = {lvl: sentence_metrics(outs, pairs, lvl) for lvl in ("detection", "correction")}
    counts = audit(outs, pairs, sample_index)
    ok = (golden() == frozen
          and all((got[l].p, got[l].r, got[l].f) == (frozen["metrics"][l]["P"], frozen["metrics"][l]["R"],
                                                       frozen["metrics"][l]["F"]) for l in got)
          and {k: getattr(counts, k) for k in frozen["audit"]} == frozen["audit"])
    det = got["detection"]
    assert report(7, "metrics golden files", ok,
                  f"detection P={det.p:.3f} R={det.r:.3f}, audit {frozen['audit']}, oracle agrees: {golden() == frozen}")


def test_criterion_8_labeling_rules(sample_index):
    v = sample_index.vocab
    pc, vc = sample_index.dense("pc"), sample_index.dense("vc")
    # phonological priority over every ordered pair in both sets
    both = [(a, b) for a in v.regular for b in v.regular if a != b and pc[a, b] and vc[a, b]]
    prio = all(derive_labels(SentencePair(v.chars[a], v.chars[b]), v, sample_index).g_r[0] == 1 for a, b in both)
    selfm = all(pc[i, i] and vc[i, i] for i in range(len(v)))
    table = synthetic_char_table(60, seed=8, overlap=0.5)
    index = build_confusion_index(Vocab.from_chars(r.ch for r in table), table)
    pairs, stats = synthesize(CorpusSpec(3200, min_len=20, max_len=24, seed=8, successors=3), index)
    uncoverable = sum(len(derive_labels(p, index.vocab, index).uncoverable) for p in pairs)
    ok = prio and selfm and uncoverable == 0 and stats.corrupted >= 10_000 and len(both) > 0
    assert report(8, "labeling rules", ok,
                  f"priority on {len(both)} dual-set pairs: {prio}; self-membership: {selfm}; "
                  f"{uncoverable} uncoverable among {stats.corrupted} injected errors ({stats.positions} positions)")


def _cli(*args, cwd):
    r = subprocess.run([sys.executable, "-m", "csc_decomp.cli", *map(str, args)], cwd=cwd,
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    return r


def test_criterion_9_determinism(tmp_path):
    _cli("gen-table", "--out", "t.tsv", cwd=tmp_path)
    _cli("build-confusion", "--table", "t.tsv", "--out", "idx.json", cwd=tmp_path)
    _cli("synth", "--confusion", "idx.json", "--out", "tr.txt", "--n-sentences", 500, "--seed", 1, cwd=tmp_path)
    _cli("synth", "--confusion", "idx.json", "--out", "te.txt", "--n-sentences", 200, "--seed", 2, cwd=tmp_path)
    runs = []
    for _ in range(2):
        _cli("train", "--corpus", "tr.txt", "--confusion", "idx.json", "--out", "m.ckpt", "--epochs", 3, cwd=tmp_path)
        _cli("predict", "--checkpoint", "m.ckpt", "--input", "te.txt", "--output", "p.txt", cwd=tmp_path)
        _cli("evaluate", "--checkpoint", "m.ckpt", "--corpus", "te.txt", "--report", "r.json", cwd=tmp_path)
        runs.append({n: (tmp_path / n).read_bytes() for n in ("m.ckpt", "p.txt", "r.json")})
    same = {n: runs[0][n] == runs[1][n] for n in runs[0]}
    ok = all(same.values())
    assert report(9, "determinism", ok, "two consecutive CLI runs, byte-identical: "
                  + ", ".join(f"{n} {s}" for n, s in same.items()))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
