"""Time the compiled kernels against the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``. Prints the best of several
repeats per kernel and the speed ratio.
"""

import sys
import timeit

import numpy as np

from reicoh import kernels

N_MODEL = 100_000
N_COMB = 2**20

CASES = [
    ("mims", (np.linspace(0.0, 900.0, N_MODEL), np.array([1.0, 421.5, 1.3]))),
    ("gamma_t", (np.geomspace(1e-3, 11.0, N_MODEL), np.array([0.3, 1.2, 0.47, 0.14, 6e-5]))),
    ("gamma_b", (np.linspace(0.0, 10.0, N_MODEL), np.array([0.3, 1.2, 0.43, 0.088]))),
    ("lorentzian", (np.linspace(-20.0, 20.0, N_MODEL), np.array([1.0, 4.34, 2.0, 0.1]))),
    ("double_exp", (np.linspace(0.0, 160.0, N_MODEL), np.array([0.4, 0.6, 3.169, 31.69]))),
]
_freq = np.linspace(-12.0, 12.0, N_COMB, endpoint=False)
CASES += [
    ("comb_square", (_freq, 0.2, 0.05, -30.0, 29.0, 4.0, 0.0)),
    ("comb_gauss", (_freq, 0.2, 0.05, -30.0, 29.0, 4.0, 0.0)),
]


def best_time(func, args, repeat=5):
    number = 3
    return min(timeit.repeat(lambda: func(*args), number=number, repeat=repeat)) / number


def main():
    if kernels.compiled is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation`")
        return 1
    print(f"{'kernel':<12} {'python ms':>10} {'compiled ms':>12} {'speedup':>8}")
    for name, args in CASES:
        t_py = best_time(getattr(kernels.python, name), args)
        t_c = best_time(getattr(kernels.compiled, name), args)
        print(f"{name:<12} {t_py * 1e3:>10.2f} {t_c * 1e3:>12.2f} {t_py / t_c:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
