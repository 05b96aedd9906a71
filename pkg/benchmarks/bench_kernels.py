"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--profile default] [--repeat 5]

Both backends are loaded side by side, fed the same inputs and checked for
identical results before timing.
"""

import argparse
import importlib
import random
import timeit

from decwf import _kernels_py
from decwf.crypto_core import PROFILES


def cases(params, rng):
    p, q, g = params.p, params.q, params.g
    coeffs = [rng.randrange(q) for _ in range(5)]
    comms = [pow(g, c, p) for c in coeffs]
    bases = [pow(g, rng.randrange(1, q), p) for _ in range(5)]
    exps = [rng.randrange(q) for _ in range(5)]
    idx = rng.sample(range(1, min(q, 50)), 5)
    return {
        "powmod": ((g, rng.randrange(q), p), 200),
        "multi_powmod": ((bases, exps, p), 50),
        "poly_eval": ((coeffs, 7, q), 20_000),
        "commit_eval": ((comms, 7, p, q), 50),
        "lagrange_at_zero": ((idx, q), 5_000),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--profile", default="default", choices=sorted(PROFILES))
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    try:
        compiled = importlib.import_module("decwf._kernels")
    except ImportError:
        print("compiled extension not built; only the fallback is available")
        compiled = None
    rng = random.Random(1)
    params = PROFILES[args.profile]
    print(f"profile={args.profile}  ({params.p.bit_length()}-bit p)")
    print(f"{'kernel':<18}{'python us':>12}{'cython us':>12}{'speedup':>9}")
    for name, (call_args, number) in cases(params, rng).items():
        py = getattr(_kernels_py, name)
        t_py = min(timeit.repeat(lambda: py(*call_args), number=number, repeat=args.repeat)) / number
        if compiled is None:
            print(f"{name:<18}{t_py * 1e6:>12.2f}{'-':>12}{'-':>9}")
            continue
        cy = getattr(compiled, name)
        if cy(*call_args) != py(*call_args):
            raise SystemExit(f"{name}: backends disagree")
        t_cy = min(timeit.repeat(lambda: cy(*call_args), number=number, repeat=args.repeat)) / number
        print(f"{name:<18}{t_py * 1e6:>12.2f}{t_cy * 1e6:>12.2f}{t_py / t_cy:>8.2f}x")


if __name__ == "__main__":
    main()
