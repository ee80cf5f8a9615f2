"""Time each hot kernel under numba and under its numpy twin.

    python benchmarks/bench_kernels.py [--repeat N]

Both variants are called directly, so one process compares them regardless
of ``WANDER_LAB_DISABLE_NUMBA``.  The numba timings exclude compilation.
"""

import argparse
import sys
import timeit

import numpy as np

from wander_lab import _kernels as K


def workloads(rng):
    n_maps, max_deg = 256, 4
    counts = rng.integers(1, max_deg + 1, n_maps).astype(np.int64)
    zeros = np.zeros((n_maps, max_deg), dtype=np.complex128)
    for k, c in enumerate(counts):
        zeros[k, :c] = 0.9 * np.sqrt(rng.random(c)) * np.exp(2j * np.pi * rng.random(c))
    coefs = np.exp(2j * np.pi * rng.random(n_maps))
    z = 0.95 * np.sqrt(rng.random(20_000)) * np.exp(2j * np.pi * rng.random(20_000))

    fix_zeros = np.where(np.abs(zeros) > 0.3, zeros, 0.5)
    lams = 0.5 + 0.4 * rng.random(n_maps)
    w0 = 0.2 * z

    pts = 0.9 * np.sqrt(rng.random(3000)) * np.exp(2j * np.pi * rng.random(3000))
    vals = np.round(z, 3)

    def advance(impl):
        w, e = w0.copy(), np.ones_like(w0)
        impl(fix_zeros, counts, coefs, lams, w, e)

    return {
        "blaschke_eval (20k pts)": (
            lambda: K.nb_blaschke_eval(zeros[0], counts[0], coefs[0], z),
            lambda: K.np_blaschke_eval(zeros[0], counts[0], coefs[0], z),
        ),
        "blaschke_deriv (20k pts)": (
            lambda: K.nb_blaschke_deriv(zeros[0], counts[0], coefs[0], z),
            lambda: K.np_blaschke_deriv(zeros[0], counts[0], coefs[0], z),
        ),
        "compose_eval (256 maps x 20k)": (
            lambda: K.nb_compose_eval(zeros, counts, coefs, z),
            lambda: K.np_compose_eval(zeros, counts, coefs, z),
        ),
        "koenigs_advance (256 maps x 20k)": (
            lambda: advance(K.nb_koenigs_advance),
            lambda: advance(K.np_koenigs_advance),
        ),
        "min_hyp_gap (3k pts)": (lambda: K.nb_min_hyp_gap(pts), lambda: K.np_min_hyp_gap(pts)),
        "count_close_pairs (20k)": (
            lambda: K.nb_count_close_pairs(vals, 2e-3),
            lambda: K.np_count_close_pairs(vals, 2e-3),
        ),
    }


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if not K.HAS_NUMBA:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':36s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, (nb, npy) in workloads(rng).items():
        nb()  # compile
        t_nb = best_of(nb, args.repeat)
        t_np = best_of(npy, args.repeat)
        print(f"{name:36s} {1e3 * t_nb:11.2f} {1e3 * t_np:11.2f} {t_np / t_nb:7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
