"""Compiled vs pure-Python recurrent kernels.

    python benchmarks/bench_kernels.py [--repeat N]

Times one forward plus BPTT pass over a 48-hour lookback and 18-hour horizon
(the training inner loop) for each backend and prints the speedup.
"""
import argparse
import timeit

import numpy as np

from gwlcast import backend
from gwlcast._pykernels import LSTM, RNN, param_layout

CASES = (
    ("rnn  1x20", RNN, 1, 20),
    ("lstm 2x20", LSTM, 2, 20),
    ("lstm 2x64", LSTM, 2, 64),
)


def _one_pass(kern, kind, layers, hidden, params, past, future, dpreds):
    _, x0, hs, cs, acts = kern.forward(kind, layers, hidden, 3, params, past, future)
    kern.backward(kind, layers, hidden, 3, params, x0, hs, cs, acts, past.shape[0], dpreds)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--lookback", type=int, default=48)
    ap.add_argument("--horizon", type=int, default=18)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    past = rng.random((args.lookback, 3))
    future = rng.random((args.horizon, 2))
    dpreds = rng.standard_normal(args.horizon)
    try:
        compiled = backend.get("compiled")
    except ImportError:
        compiled = None
        print("compiled backend not built; timing the python backend only")
    python = backend.get("python")

    print(f"{'case':<10} {'python ms':>10} {'compiled ms':>12} {'speedup':>8}")
    for label, kind, layers, hidden in CASES:
        params = rng.uniform(-0.3, 0.3, param_layout(kind, layers, hidden, 3)[-1])
        row = []
        for kern in (python, compiled):
            if kern is None:
                row.append(float("nan"))
                continue
            call = lambda: _one_pass(kern, kind, layers, hidden, params, past, future, dpreds)  # noqa: E731
            call()
            row.append(min(timeit.repeat(call, number=1, repeat=args.repeat)) * 1e3)
        print(f"{label:<10} {row[0]:>10.3f} {row[1]:>12.3f} {row[0] / row[1]:>7.1f}x")


if __name__ == "__main__":
    main()
