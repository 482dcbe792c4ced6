"""Hot loops: per-time products of single-spin factors and the running minimum.

Every kernel exists twice, a vectorised numpy version and a numba ``@njit``
loop. The numba path is used unless ``NVPOLAR_DISABLE_NUMBA`` is set to a
truthy value or numba cannot be imported. Both return identical results
up to floating-point reassociation (~1e-15 relative).
"""

from __future__ import annotations

import math
import os

import numpy as np

# ---------------------------------------------------------------- numpy path


def coherence_product_numpy(times, omega, omega_k, a_k, p_k):
    half = 0.5 * omega * times[:, None]
    half_k = 0.5 * times[:, None] * omega_k[None, :]
    s, c = np.sin(half), np.cos(half)
    sk, ck = np.sin(half_k), np.cos(half_k)
    L = (a_k * s * sk + c * ck) + 1j * p_k * (a_k * c * sk - s * ck)
    return np.prod(L, axis=1)


def abs_product_prime_numpy(times, omega_k, a_k, p_k):
    s2 = np.sin(0.5 * times[:, None] * omega_k[None, :]) ** 2
    return np.prod(np.sqrt((a_k**2 - p_k**2) * s2 + p_k**2), axis=1)


def abs_product_doubleprime_numpy(times, omega_k, a_k, p_k):
    c2 = np.cos(0.5 * times[:, None] * omega_k[None, :]) ** 2
    ap2 = (a_k * p_k) ** 2
    return np.prod(np.sqrt((1.0 - ap2) * c2 + ap2), axis=1)


def running_min_indices_numpy(values):
    if values.size == 0:
        return np.empty(0, dtype=np.int64)
    prefix = np.minimum.accumulate(values)
    improved = np.flatnonzero(prefix[1:] < prefix[:-1]) + 1
    return np.concatenate(([0], improved)).astype(np.int64)


# ---------------------------------------------------------------- numba path


def _coherence_product_loop(times, omega, omega_k, a_k, p_k):
    out = np.empty(times.shape[0], dtype=np.complex128)
    for i in range(times.shape[0]):
        half = 0.5 * omega * times[i]
        s = math.sin(half)
        c = math.cos(half)
        re = 1.0
        im = 0.0
        for k in range(omega_k.shape[0]):
            half_k = 0.5 * times[i] * omega_k[k]
            sk = math.sin(half_k)
            ck = math.cos(half_k)
            lr = a_k[k] * s * sk + c * ck
            li = p_k[k] * (a_k[k] * c * sk - s * ck)
            re, im = re * lr - im * li, re * li + im * lr
        out[i] = complex(re, im)
    return out


def _abs_product_prime_loop(times, omega_k, a_k, p_k):
    out = np.empty(times.shape[0])
    for i in range(times.shape[0]):
        acc = 1.0
        for k in range(omega_k.shape[0]):
            s = math.sin(0.5 * times[i] * omega_k[k])
            acc *= math.sqrt((a_k[k] * a_k[k] - p_k[k] * p_k[k]) * s * s + p_k[k] * p_k[k])
        out[i] = acc
    return out


def _abs_product_doubleprime_loop(times, omega_k, a_k, p_k):
    out = np.empty(times.shape[0])
    for i in range(times.shape[0]):
        acc = 1.0
        for k in range(omega_k.shape[0]):
            c = math.cos(0.5 * times[i] * omega_k[k])
            ap2 = (a_k[k] * p_k[k]) ** 2
            acc *= math.sqrt((1.0 - ap2) * c * c + ap2)
        out[i] = acc
    return out


def _running_min_indices_loop(values):
    n = values.shape[0]
    idx = np.empty(n, dtype=np.int64)
    if n == 0:
        return idx
    count = 1
    idx[0] = 0
    best = values[0]
    for i in range(1, n):
        if values[i] < best:
            best = values[i]
            idx[count] = i
            count += 1
    return idx[:count]


def _truthy(value: str | None) -> bool:
    return (value or "").strip().lower() in {"1", "true", "yes", "on"}


try:
    if _truthy(os.environ.get("NVPOLAR_DISABLE_NUMBA")):
        raise ImportError("numba disabled by NVPOLAR_DISABLE_NUMBA")
    import numba

    _jit = numba.njit(cache=True, nogil=True)
    coherence_product_numba = _jit(_coherence_product_loop)
    abs_product_prime_numba = _jit(_abs_product_prime_loop)
    abs_product_doubleprime_numba = _jit(_abs_product_doubleprime_loop)
    running_min_indices_numba = _jit(_running_min_indices_loop)
    BACKEND = "numba"
except ImportError:
    coherence_product_numba = None
    abs_product_prime_numba = None
    abs_product_doubleprime_numba = None
    running_min_indices_numba = None
    BACKEND = "numpy"


def _prep(times, *arrays):
    times = np.ascontiguousarray(times, dtype=np.float64).reshape(-1)
    return (times,) + tuple(np.ascontiguousarray(a, dtype=np.float64).reshape(-1) for a in arrays)


def coherence_product(times, omega, omega_k, a_k, p_k) -> np.ndarray:
    """prod_k L_k(t) for each time; complex array of len(times)."""
    times, omega_k, a_k, p_k = _prep(times, omega_k, a_k, p_k)
    if BACKEND == "numba":
        return coherence_product_numba(times, float(omega), omega_k, a_k, p_k)
    return coherence_product_numpy(times, float(omega), omega_k, a_k, p_k)


def abs_product_prime(times, omega_k, a_k, p_k) -> np.ndarray:
    """prod_k |L_k| using the two-term form valid on the cos(omega t / 2) = 0 grid."""
    times, omega_k, a_k, p_k = _prep(times, omega_k, a_k, p_k)
    if BACKEND == "numba":
        return abs_product_prime_numba(times, omega_k, a_k, p_k)
    return abs_product_prime_numpy(times, omega_k, a_k, p_k)


def abs_product_doubleprime(times, omega_k, a_k, p_k) -> np.ndarray:
    """prod_k |L_k| using the two-term form valid on the sin(omega t / 2) = 0 grid."""
    times, omega_k, a_k, p_k = _prep(times, omega_k, a_k, p_k)
    if BACKEND == "numba":
        return abs_product_doubleprime_numba(times, omega_k, a_k, p_k)
    return abs_product_doubleprime_numpy(times, omega_k, a_k, p_k)


def running_min_indices(values) -> np.ndarray:
    """Indices where the prefix minimum strictly decreases (always includes 0)."""
    values = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
    if BACKEND == "numba":
        return running_min_indices_numba(values)
    return running_min_indices_numpy(values)
