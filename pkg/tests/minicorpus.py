"""The hand-built 6-sentence corpus and its enumeration-oracle results."""
from pathlib import Path

from csc_decomp.charkb import load_char_table, sample_table_path
from oracles import audit_oracle, confusion_sets_bruteforce, metric_oracle

DATA = Path(__file__).resolve().parent / "data"


def load_rows(path=DATA / "mini_corpus.tsv"):
    rows, reasons = [], []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        src, tgt, pred, y_d, y_r = line.split("\t")
        rows.append((src, tgt, pred, [int(c) for c in y_d]))
        reasons.append([int(c) for c in y_r])
    return rows, reasons


def golden():
    rows, reasons = load_rows()
    sets = confusion_sets_bruteforce(load_char_table(sample_table_path()))
    pc = {ch: s[0] for ch, s in sets.items()}
    vc = {ch: s[1] for ch, s in sets.items()}
    return {"metrics": metric_oracle(rows), "audit": audit_oracle(rows, reasons, pc, vc)}
