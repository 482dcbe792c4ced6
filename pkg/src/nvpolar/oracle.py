"""Brute-force conditional evolution, independent of the closed forms.

The qubit-bath Hamiltonian is block diagonal in the qubit basis: the bath
evolves with H0 = omega sum I_z when the qubit is in |0> and with
H1 = H0 + sum_k A_k . I_k when it is in |1>. Then

    rho01(t) = 1/2 * phase * Tr[ U0(t) R(0) U1(t)^dag ],   U_b = exp(-i H_b t).

Propagators are built from Hermitian eigendecompositions; for a single
spin the Pauli-rotation closed form is available as a second route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Callable

import numpy as np

from .hyperfine import CouplingRow, DressedSpin, PhysicalConstants, dress, larmor_frequency
from .lattice import EnvironmentRealization

MAX_DENSE_SPINS = 12

I_X = np.array([[0, 1], [1, 0]], dtype=complex) / 2
I_Y = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
I_Z = np.array([[1, 0], [0, -1]], dtype=complex) / 2
SPIN_OPS = (I_X, I_Y, I_Z)


class OracleSizeError(MemoryError):
    pass


@dataclass(frozen=True)
class SpinHamiltonianPair:
    H0: np.ndarray
    H1: np.ndarray

    @classmethod
    def from_row(cls, row: CouplingRow, omega: float) -> SpinHamiltonianPair:
        H0 = omega * I_Z
        H1 = H0 + row.Azx * I_X + row.Azy * I_Y + row.Azz * I_Z
        return cls(H0, H1)


def spin_state(p: float) -> np.ndarray:
    """rho_k(0) = (1 + 2 p I_z) / 2."""
    if abs(p) > 1:
        raise ValueError(f"polarization must lie in [-1, 1], got {p}")
    return 0.5 * (np.eye(2, dtype=complex) + 2.0 * p * I_Z)


def expm_hermitian(H: np.ndarray, t) -> np.ndarray:
    """exp(-i H t) via eigh; ``H`` may be a stack (..., d, d), ``t`` broadcasts over the stack."""
    w, v = np.linalg.eigh(H)
    phases = np.exp(-1j * w * np.asarray(t, dtype=float)[..., None])
    return (v * phases[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


def pauli_rotation(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i t h . I) for a real 3-vector ``h``, closed form."""
    h = np.asarray(h, dtype=float)
    norm = float(np.linalg.norm(h))
    if norm == 0.0:
        return np.eye(2, dtype=complex)
    n = h / norm
    theta = 0.5 * norm * t
    sigma_n = 2.0 * (n[0] * I_X + n[1] * I_Y + n[2] * I_Z)
    return math.cos(theta) * np.eye(2, dtype=complex) - 1j * math.sin(theta) * sigma_n


def conditional_propagators(pair: SpinHamiltonianPair, t: float) -> tuple[np.ndarray, np.ndarray]:
    return expm_hermitian(pair.H0, t), expm_hermitian(pair.H1, t)


def oracle_single_factor(row: CouplingRow, p: float, omega: float, t: float) -> complex:
    U0, U1 = conditional_propagators(SpinHamiltonianPair.from_row(row, omega), t)
    return complex(np.trace(U0 @ spin_state(p) @ U1.conj().T))


def oracle_single_factor_batch(rows: np.ndarray, p: np.ndarray, omega: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Vectorised oracle over M tuples: rows (M, 3), others (M,)."""
    rows = np.asarray(rows, dtype=float)
    omega = np.asarray(omega, dtype=float)
    H0 = omega[:, None, None] * I_Z
    H1 = H0 + rows[:, 0, None, None] * I_X + rows[:, 1, None, None] * I_Y + rows[:, 2, None, None] * I_Z
    U0 = expm_hermitian(H0, t)
    U1 = expm_hermitian(H1, t)
    rho = 0.5 * (np.eye(2) + 2.0 * np.asarray(p, dtype=float)[:, None, None] * I_Z)
    prod = U0 @ rho @ np.swapaxes(U1.conj(), -1, -2)
    return np.trace(prod, axis1=-2, axis2=-1)


def _embed(op: np.ndarray, k: int, n: int) -> np.ndarray:
    eye = np.eye(2, dtype=complex)
    return reduce(np.kron, [op if j == k else eye for j in range(n)])


def bath_hamiltonians(env: EnvironmentRealization, omega: float) -> tuple[np.ndarray, np.ndarray]:
    """H_E and H_E + V on the full 2^N bath space."""
    n = env.n_spins
    dim = 2**n
    H_E = np.zeros((dim, dim), dtype=complex)
    V = np.zeros((dim, dim), dtype=complex)
    for k, spin in enumerate(env.spins):
        Iz = _embed(I_Z, k, n)
        H_E += omega * Iz
        c = spin.coupling
        V += c.Azx * _embed(I_X, k, n) + c.Azy * _embed(I_Y, k, n) + c.Azz * Iz
    return H_E, H_E + V


def full_system_coherence(
    env: EnvironmentRealization,
    t,
    constants: PhysicalConstants | None = None,
    include_free_phase: bool = False,
    B_z: float | None = None,
):
    """rho01(t) from dense 2^N evolution; ``t`` may be an array (one eigh per environment)."""
    if env.n_spins > MAX_DENSE_SPINS:
        raise OracleSizeError(f"dense oracle is capped at N = {MAX_DENSE_SPINS} spins, got {env.n_spins}")
    constants = constants or PhysicalConstants()
    B = env.B_z if B_z is None else B_z
    omega = larmor_frequency(B, constants)
    H0, H1 = bath_hamiltonians(env, omega)
    R = reduce(np.kron, [spin_state(s.p) for s in env.spins])
    w0, v0 = np.linalg.eigh(H0)
    w1, v1 = np.linalg.eigh(H1)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t_arr.shape, dtype=complex)
    for i, ti in enumerate(t_arr):
        U0 = v0 @ (np.exp(-1j * w0 * ti)[:, None] * v0.conj().T)
        U1 = v1 @ (np.exp(-1j * w1 * ti)[:, None] * v1.conj().T)
        out[i] = np.trace(U0 @ R @ U1.conj().T)
    out *= 0.5
    if include_free_phase:
        out *= np.exp(-1j * constants.free_precession_frequency(B) * t_arr)
    return complex(out[0]) if np.ndim(t) == 0 else out


def product_coherence(env: EnvironmentRealization, t: float, omega: float) -> complex:
    """1/2 prod_k of the per-spin 2x2 oracle factors (the factorization target)."""
    return 0.5 * np.prod([oracle_single_factor(s.coupling, s.p, omega, t) for s in env.spins])


# ---------------------------------------------------------------- battery


def _random_rows(rng: np.random.Generator, m: int) -> np.ndarray:
    scale = 10.0 ** rng.uniform(-3, 0.5, size=(m, 1))
    return rng.uniform(-1, 1, size=(m, 3)) * scale


def run_battery(
    n_single: int = 10_000,
    n_envs: int = 24,
    n_times: int = 100,
    seed: int = 20240601,
    closed_form: Callable[[float, DressedSpin, float], complex] | None = None,
    single_tol: float = 1e-10,
    full_tol_per_spin: float = 1e-9,
) -> dict:
    """Cross-check the closed-form factor against the oracles; returns a JSON-able report.

    ``closed_form`` defaults to :func:`nvpolar.coherence.single_spin_factor`;
    it is a parameter so a deliberately perturbed version can be checked to fail.
    """
    from .coherence import single_spin_factor

    closed_form = closed_form or single_spin_factor
    rng = np.random.default_rng(seed)
    checks = {}

    rows = _random_rows(rng, n_single)
    p = rng.uniform(-1, 1, n_single)
    omega = 10.0 ** rng.uniform(-1, 2, n_single)
    t = rng.uniform(0, 200, n_single)
    oracle = oracle_single_factor_batch(rows, p, omega, t)
    closed = np.array([
        closed_form(t[i], dress(CouplingRow(*rows[i]), omega[i], p[i]), omega[i]) for i in range(n_single)
    ])
    dev = float(np.max(np.abs(oracle - closed)))
    checks["single_spin_eigh_vs_closed_form"] = {"n": n_single, "worst": dev, "tolerance": single_tol, "passed": bool(dev < single_tol)}

    worst = 0.0
    for i in range(min(200, n_single)):
        U0 = pauli_rotation([0, 0, omega[i]], t[i])
        U1 = pauli_rotation(rows[i] + [0, 0, omega[i]], t[i])
        alt = np.trace(U0 @ spin_state(p[i]) @ U1.conj().T)
        worst = max(worst, abs(alt - oracle[i]))
    checks["single_spin_pauli_vs_eigh"] = {"n": min(200, n_single), "worst": float(worst), "tolerance": single_tol, "passed": bool(worst < single_tol)}

    unit = 0.0
    for i in range(min(200, n_single)):
        pair = SpinHamiltonianPair.from_row(CouplingRow(*rows[i]), omega[i])
        for U in conditional_propagators(pair, t[i]):
            unit = max(unit, float(np.max(np.abs(U @ U.conj().T - np.eye(2)))))
    checks["unitarity"] = {"worst": unit, "tolerance": 1e-13, "passed": unit < 1e-13}

    from .coherence import coherence
    from .lattice import Spin

    worst_ratio = 0.0
    worst_abs = 0.0
    phase_dev = 0.0
    for _ in range(n_envs):
        n = int(rng.integers(1, 7))
        spins = tuple(Spin(CouplingRow(*r), float(q)) for r, q in zip(_random_rows(rng, n), rng.uniform(-1, 1, n)))
        env = EnvironmentRealization(spins, B_z=float(10 ** rng.uniform(-1.5, 0.7)))
        times = rng.uniform(0, 300, n_times)
        full = full_system_coherence(env, times)
        closed_env = coherence(times, env)
        d = float(np.max(np.abs(full - closed_env)))
        worst_abs = max(worst_abs, d)
        worst_ratio = max(worst_ratio, d / (full_tol_per_spin * n))
        full_phase = full_system_coherence(env, times[:5], include_free_phase=True)
        phase_dev = max(phase_dev, float(np.max(np.abs(np.abs(full_phase) - np.abs(full[:5])))))
    checks["full_bath_factorization"] = {
        "n_envs": n_envs, "times_per_env": n_times, "worst": worst_abs,
        "tolerance": f"{full_tol_per_spin} * N", "passed": bool(worst_ratio < 1.0),
    }
    checks["phase_flag_modulus"] = {"worst": phase_dev, "tolerance": 1e-12, "passed": phase_dev < 1e-12}

    return {
        "passed": all(c["passed"] for c in checks.values()),
        "seed": seed,
        "checks": checks,
        "worst_deviation": max(dev, worst_abs),
    }
