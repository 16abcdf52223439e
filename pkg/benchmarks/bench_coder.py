"""Compare the compiled and pure-Python entropy coder backends.

Run: python benchmarks/bench_coder.py [--symbols N] [--repeat R]
"""

import argparse
import time

import numpy as np

from lfic import _pycoder

try:
    from lfic import _ccoder
except ImportError:
    _ccoder = None


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(kernels, symbols, alphabet, repeat):
    def enc():
        return kernels.encode_symbols(symbols, np.ones(alphabet, dtype=np.int64))

    t_enc, data = _time(enc, repeat)

    def dec():
        return kernels.decode_symbols(data, symbols.size, np.ones(alphabet, dtype=np.int64))

    t_dec, out = _time(dec, repeat)
    assert np.array_equal(out, symbols)
    return t_enc, t_dec, data


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--symbols", type=int, default=100_000)
    parser.add_argument("--alphabet", type=int, default=15)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    symbols = np.minimum(rng.geometric(0.4, args.symbols) - 1, args.alphabet - 1).astype(np.int64)
    rows = [("python", _pycoder)]
    if _ccoder is not None:
        rows.append(("cython", _ccoder))
    else:
        print("compiled backend not built; showing fallback only")

    results = {}
    print(f"{'backend':8} {'encode s':>10} {'decode s':>10} {'Msym/s enc':>11} {'bytes':>8}")
    for name, kernels in rows:
        t_enc, t_dec, data = bench(kernels, symbols, args.alphabet, args.repeat)
        results[name] = (t_enc, t_dec, data)
        print(f"{name:8} {t_enc:10.4f} {t_dec:10.4f} {args.symbols / t_enc / 1e6:11.2f} {len(data):8d}")
    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        assert py[2] == cy[2], "backends disagree on output bytes"
        print(f"speedup: encode x{py[0] / cy[0]:.1f}, decode x{py[1] / cy[1]:.1f} (identical output)")


if __name__ == "__main__":
    main()
