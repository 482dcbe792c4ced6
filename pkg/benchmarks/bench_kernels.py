"""Compare the numba and numpy coherence kernels.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--spins 8] [--samples 200000] [--repeat 5]

Numba timings exclude the first (compiling) call. With NVPOLAR_DISABLE_NUMBA
set, only the numpy column is reported.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from nvpolar import _kernels


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--spins", type=int, default=8)
    parser.add_argument("--samples", type=int, default=200_000)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    omega = 10.71
    omega_k = omega + rng.uniform(-0.1, 0.1, args.spins)
    a_k = rng.uniform(0.99, 1.0, args.spins)
    p_k = rng.uniform(0.3, 0.95, args.spins)
    t = 2 * np.pi / omega * (np.arange(args.samples) + 0.5)
    values = np.abs(_kernels.coherence_product_numpy(t, omega, omega_k, a_k, p_k))

    cases = {
        "coherence_product": ((t, omega, omega_k, a_k, p_k), "coherence_product"),
        "abs_product_prime": ((t, omega_k, a_k, p_k), "abs_product_prime"),
        "abs_product_doubleprime": ((t, omega_k, a_k, p_k), "abs_product_doubleprime"),
        "running_min_indices": ((values,), "running_min_indices"),
    }
    print(f"backend in use: {_kernels.BACKEND}; N = {args.spins}, samples = {args.samples}, best of {args.repeat}")
    print(f"{'kernel':<26}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, (call_args, base) in cases.items():
        np_fn = getattr(_kernels, f"{base}_numpy")
        nb_fn = getattr(_kernels, f"{base}_numba")
        t_np = min(timeit.repeat(lambda: np_fn(*call_args), number=1, repeat=args.repeat)) * 1e3
        if nb_fn is None:
            print(f"{name:<26}{t_np:>12.2f}{'n/a':>12}{'':>10}")
            continue
        nb_fn(*call_args)
        assert np.allclose(nb_fn(*call_args), np_fn(*call_args), rtol=0, atol=1e-12)
        t_nb = min(timeit.repeat(lambda: nb_fn(*call_args), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<26}{t_np:>12.2f}{t_nb:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
