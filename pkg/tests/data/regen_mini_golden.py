"""Regenerate mini_corpus_golden.json: ``python3 tests/data/regen_mini_golden.py``."""
import json
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

from minicorpus import golden  # noqa: E402

if __name__ == "__main__":
    out = HERE / "mini_corpus_golden.json"
    out.write_text(json.dumps(golden(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out}")
