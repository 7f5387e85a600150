"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--rows 5000] [--width 600] [--epochs 3]

Prints per-kernel timings for both backends, then the median seconds per
training epoch of a small run under each backend (each in a fresh process,
since the backend is chosen at import).
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from amga import _kernels_py, kernels

try:
    from amga import _kernels as _compiled
except ImportError:
    _compiled = None

EPOCH_SCRIPT = """
import json, time
import numpy as np
from amga import kernels
from amga.config import ExperimentConfig
from amga.data import LabeledDataset
from amga.engine import train
rng = np.random.default_rng(0)
n = {rows}
data = LabeledDataset(rng.random((n, 784), dtype=np.float32), rng.integers(0, 10, n), 10)
cfg = ExperimentConfig(dataset="synthetic", architecture=(784, {width}, {width}), epochs={epochs},
                       batch_size=n, eval_every=10**6, eval_train=False, normalize_between_layers=False)
recs = train(cfg, data).records
print(json.dumps({{"backend": kernels.BACKEND, "seconds": float(np.median([r.wall_seconds for r in recs]))}}))
"""


def bench_kernels(rows, width, repeat):
    rng = np.random.default_rng(0)
    h = np.maximum(rng.standard_normal((rows, width)), 0).astype(np.float32)
    bounds = kernels.group_bounds(width, min(8, width // 10))
    a, c = rng.standard_normal(rows), rng.random(width)
    bias = rng.standard_normal(width).astype(np.float32)
    cases = {
        "sq_group_means": lambda impl: kernels.sq_group_means(h, bounds, impl=impl),
        "goodness_grad": lambda impl: kernels.goodness_grad(h, a, c, 0.1, impl=impl),
        "bias_relu_": lambda impl: kernels.bias_relu_(h.copy(), bias, impl=impl),
        "normalize_rows": lambda impl: kernels.normalize_rows(h, 1e-8, impl=impl),
    }
    impls = [("python", _kernels_py)] + ([("cython", _compiled)] if _compiled is not None else [])
    print(f"kernels on a {rows}x{width} float32 block (best of {repeat}, ms)")
    print(f"{'kernel':<16}" + "".join(f"{name:>10}" for name, _ in impls) + ("   speedup" if len(impls) == 2 else ""))
    for label, fn in cases.items():
        times = [min(timeit.repeat(lambda: fn(impl), number=1, repeat=repeat)) * 1e3 for _, impl in impls]
        line = f"{label:<16}" + "".join(f"{t:>10.2f}" for t in times)
        if len(times) == 2:
            line += f"{times[0] / times[1]:>9.2f}x"
        print(line)


def bench_epochs(rows, width, epochs):
    print(f"\ntraining epoch, [784, {width}, {width}], {rows} samples, median of {epochs} epochs")
    script = EPOCH_SCRIPT.format(rows=rows, width=width, epochs=epochs)
    for pure in ("1", "0"):
        env = dict(os.environ, AMGA_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True, check=True)
        res = json.loads(out.stdout.strip().splitlines()[-1])
        print(f"{res['backend']:<8} {res['seconds']:.3f} s/epoch")


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--rows", type=int, default=5000)
    parser.add_argument("--width", type=int, default=600)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--epochs", type=int, default=3)
    args = parser.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    bench_kernels(args.rows, args.width, args.repeat)
    bench_epochs(args.rows, args.width, args.epochs)


if __name__ == "__main__":
    main()
