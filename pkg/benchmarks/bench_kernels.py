"""Compare the numba and pure-numpy kernel paths.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--end-to-end]

Kernel timings call both implementations directly.  ``--end-to-end`` also
times one training epoch in two subprocesses, one per backend, selected by
the CSC_DECOMP_DISABLE_NUMBA environment variable.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from csc_decomp import _kernels

EPOCH_SNIPPET = """
import time
from csc_decomp import BACKEND
from csc_decomp.experiment import SyntheticSetup
from csc_decomp.model import init_model
from csc_decomp.train import TrainConfig, fit
s = SyntheticSetup(n_chars=400)
index = s.index()
pairs = s.corpus(index, 2000, 1)
model = init_model(index)
fit(pairs[:64], model, TrainConfig(epochs=1))  # warm-up, includes JIT compilation
t = time.perf_counter()
fit(pairs, model, TrainConfig(epochs=1))
print(BACKEND, time.perf_counter() - t)
"""


def kernel_cases(rng):
    seqs = [rng.integers(1, 6, int(rng.integers(6, 20))) for _ in range(600)]
    lens = np.array([len(s) for s in seqs])
    flat = np.concatenate(seqs).astype(np.int64)
    offsets = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)

    sent_lens = rng.integers(8, 25, 256)
    n_tok = int(sent_lens.sum())
    idx = rng.integers(0, 3000, n_tok).astype(np.int64)
    starts = np.repeat(np.concatenate([[0], np.cumsum(sent_lens)[:-1]]), sent_lens).astype(np.int64)
    ends = np.repeat(np.cumsum(sent_lens), sent_lens).astype(np.int64)
    emb = rng.standard_normal((3000, 32))
    grad = rng.standard_normal((n_tok, 5 * 32))
    return {
        "pairwise_levenshtein (600 stroke seqs)": lambda impl: impl.pairwise_levenshtein(flat, offsets),
        f"window_gather ({n_tok} tokens, w=2)": lambda impl: impl.window_gather(emb, idx, starts, ends, 2),
        f"window_scatter ({n_tok} tokens, w=2)": lambda impl: impl.window_scatter(grad, idx, starts, ends, 2, 3000),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()
    if _kernels.numba_impl is None:
        sys.exit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(0)
    print(f"{'kernel':45s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}  identical")
    for name, call in kernel_cases(rng).items():
        a, b = call(_kernels.numpy_impl), call(_kernels.numba_impl)  # also warms up the JIT
        t_np = min(timeit.repeat(lambda: call(_kernels.numpy_impl), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: call(_kernels.numba_impl), number=1, repeat=args.repeat))
        print(f"{name:45s} {t_np * 1e3:10.2f} {t_nb * 1e3:10.2f} {t_np / t_nb:8.1f}  {np.array_equal(a, b)}")

    if args.end_to_end:
        print("\none training epoch, 2000 sentences, 400-character vocabulary:")
        for flag in ("1", "0"):
            env = {**os.environ, "CSC_DECOMP_DISABLE_NUMBA": flag}
            out = subprocess.run([sys.executable, "-c", EPOCH_SNIPPET], env=env, capture_output=True, text=True,
                                 check=True).stdout.split()
            print(f"  {out[0]:6s} {float(out[1]):.2f}s")


if __name__ == "__main__":
    main()
