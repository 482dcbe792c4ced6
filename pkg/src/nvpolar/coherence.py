"""Exact pure-dephasing coherence of the NV qubit and its field-locked samplings.

The qubit starts in (|0> + |1>)/sqrt(2), so rho01(0) = 1/2. For a product
initial bath state the coherence factorizes into one complex factor per
nucleus; on the grids where cos(omega t/2) = 0 (``t_prime``) or
sin(omega t/2) = 0 (``t_doubleprime``) each factor collapses to two terms.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import _kernels
from ._io import atomic_write_text, dumps_json, fmt
from .hyperfine import DressedSpin, PhysicalConstants, dressed_arrays, larmor_frequency
from .lattice import EnvironmentRealization

DEFAULT_T_MAX = 1600.0  # us

SERIES_CSV_HEADER = ("t_us", "re_rho01", "im_rho01", "abs_rho01")


class GridKind(str, Enum):
    CONTINUOUS = "continuous"
    T_PRIME = "t_prime"
    T_DOUBLEPRIME = "t_doubleprime"

    @classmethod
    def parse(cls, value) -> GridKind:
        aliases = {"prime": cls.T_PRIME, "doubleprime": cls.T_DOUBLEPRIME}
        if isinstance(value, str) and value in aliases:
            return aliases[value]
        return cls(value)

    @property
    def discrete(self) -> bool:
        return self is not GridKind.CONTINUOUS


@dataclass(frozen=True)
class TimeGrid:
    kind: GridKind
    omega: float
    t_max: float = DEFAULT_T_MAX
    dt: float | None = None
    n_start: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", GridKind.parse(self.kind))
        if not self.omega > 0:
            raise ValueError(f"grid frequency must be positive, got {self.omega}")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.kind is GridKind.CONTINUOUS and not (self.dt and self.dt > 0):
            raise ValueError("a continuous grid needs dt > 0")
        if self.n_start < 0:
            raise ValueError("n_start must be >= 0")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def times(self) -> np.ndarray:
        if self.kind is GridKind.CONTINUOUS:
            n = np.arange(self.n_start, int(math.floor(self.t_max / self.dt + 1e-9)) + 1)
            return n * self.dt
        offset = 0.5 if self.kind is GridKind.T_PRIME else 0.0
        n_stop = int(math.floor(self.t_max / self.period - offset + 1e-12)) + 1
        n = np.arange(self.n_start, max(n_stop, self.n_start))
        t = self.period * (n + offset)
        return t[t <= self.t_max * (1 + 1e-14)]

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "omega": self.omega, "t_max": self.t_max, "dt": self.dt, "n_start": self.n_start}


def build_grid(kind, omega: float, t_max: float = DEFAULT_T_MAX, dt: float | None = None, n_start: int = 0) -> TimeGrid:
    """t_prime: (2pi/omega)(n + 1/2); t_doubleprime: (2pi/omega) n; continuous: n dt."""
    return TimeGrid(GridKind.parse(kind), float(omega), float(t_max), dt, int(n_start))


def single_spin_factor(t, spin: DressedSpin, omega: float):
    """Complex factor L_k(t) of one nucleus; ``t`` may be scalar or array."""
    t = np.asarray(t, dtype=float)
    s, c = np.sin(0.5 * omega * t), np.cos(0.5 * omega * t)
    sk, ck = np.sin(0.5 * spin.omega_k * t), np.cos(0.5 * spin.omega_k * t)
    a, p = spin.a_k, spin.p_k
    L = (a * s * sk + c * ck) + 1j * p * (a * c * sk - s * ck)
    return complex(L) if L.ndim == 0 else L


def abs_factor_prime(spin: DressedSpin, t):
    s2 = np.sin(0.5 * spin.omega_k * np.asarray(t, dtype=float)) ** 2
    out = np.sqrt((spin.a_k**2 - spin.p_k**2) * s2 + spin.p_k**2)
    return float(out) if out.ndim == 0 else out


def abs_factor_doubleprime(spin: DressedSpin, t):
    c2 = np.cos(0.5 * spin.omega_k * np.asarray(t, dtype=float)) ** 2
    ap2 = (spin.a_k * spin.p_k) ** 2
    out = np.sqrt((1.0 - ap2) * c2 + ap2)
    return float(out) if out.ndim == 0 else out


def _field(env: EnvironmentRealization, B_z: float | None) -> float:
    B = env.B_z if B_z is None else B_z
    if B is None:
        raise ValueError("environment has no magnetic field; pass B_z or use env.with_field()")
    return float(B)


def dressed_spins(env: EnvironmentRealization, constants: PhysicalConstants | None = None, B_z: float | None = None) -> list[DressedSpin]:
    constants = constants or PhysicalConstants()
    omega = larmor_frequency(_field(env, B_z), constants)
    omega_k, a_k = dressed_arrays(env.couplings, omega)
    return [DressedSpin(float(w), float(a), float(p)) for w, a, p in zip(omega_k, a_k, env.polarizations)]


def coherence(
    t,
    env: EnvironmentRealization,
    constants: PhysicalConstants | None = None,
    include_free_phase: bool = False,
    B_z: float | None = None,
):
    """rho01(t) = 1/2 * phase * prod_k L_k(t) for scalar or array ``t``."""
    constants = constants or PhysicalConstants()
    B = _field(env, B_z)
    omega = larmor_frequency(B, constants)
    omega_k, a_k = dressed_arrays(env.couplings, omega)
    t_arr = np.asarray(t, dtype=float)
    rho = 0.5 * _kernels.coherence_product(t_arr, omega, omega_k, a_k, env.polarizations)
    if include_free_phase:
        rho = rho * np.exp(-1j * constants.free_precession_frequency(B) * t_arr.reshape(-1))
    return complex(rho[0]) if t_arr.ndim == 0 else rho.reshape(t_arr.shape)


@dataclass(frozen=True)
class CoherenceSeries:
    grid: TimeGrid
    t: np.ndarray
    rho01: np.ndarray
    env_fingerprint: str
    include_free_phase: bool = False
    B_z: float | None = None
    n_spins: int | None = None
    polarizations: tuple[float, ...] = ()
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.rho01)

    @property
    def samples(self) -> list[tuple[float, complex, float]]:
        return [(float(t), complex(r), float(abs(r))) for t, r in zip(self.t, self.rho01)]

    def __len__(self) -> int:
        return len(self.t)

    def metadata(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "B_z": self.B_z,
            "n_spins": self.n_spins,
            "polarizations": list(self.polarizations),
            "env_fingerprint": self.env_fingerprint,
            "include_free_phase": self.include_free_phase,
            "constants": self.constants.to_dict(),
            "n_samples": len(self.t),
            "kernel_backend": _kernels.BACKEND,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SERIES_CSV_HEADER)
        for t, r in zip(self.t, self.rho01):
            w.writerow([fmt(t), fmt(r.real), fmt(r.imag), fmt(abs(r))])
        return buf.getvalue()

    def write(self, stem, extra: dict | None = None) -> tuple[Path, Path]:
        stem = Path(stem)
        meta = self.metadata()
        # backend is informational and must not break byte-identical outputs across flags
        meta.pop("kernel_backend")
        if extra:
            meta.update(extra)
        return (
            atomic_write_text(stem.with_suffix(".csv"), self.to_csv()),
            atomic_write_text(stem.with_suffix(".json"), dumps_json(meta)),
        )

    @classmethod
    def read(cls, stem) -> CoherenceSeries:
        import json

        stem = Path(stem)
        if stem.suffix in (".csv", ".json"):
            stem = stem.with_suffix("")
        meta = json.loads(stem.with_suffix(".json").read_text())
        reader = csv.DictReader(io.StringIO(stem.with_suffix(".csv").read_text()))
        if tuple(reader.fieldnames or ()) != SERIES_CSV_HEADER:
            raise ValueError(f"series CSV header must be {','.join(SERIES_CSV_HEADER)}")
        rows = list(reader)
        t = np.array([float(r["t_us"]) for r in rows])
        rho = np.array([complex(float(r["re_rho01"]), float(r["im_rho01"])) for r in rows])
        g = meta["grid"]
        return cls(
            grid=TimeGrid(GridKind(g["kind"]), g["omega"], g["t_max"], g["dt"], g["n_start"]),
            t=t,
            rho01=rho,
            env_fingerprint=meta["env_fingerprint"],
            include_free_phase=meta["include_free_phase"],
            B_z=meta["B_z"],
            n_spins=meta["n_spins"],
            polarizations=tuple(meta["polarizations"]),
            constants=PhysicalConstants.from_dict(meta["constants"]),
        )


def sample_series(
    env: EnvironmentRealization,
    constants: PhysicalConstants | None,
    grid: TimeGrid,
    include_free_phase: bool = False,
    B_z: float | None = None,
) -> CoherenceSeries:
    """Evaluate rho01 at every grid time."""
    constants = constants or PhysicalConstants()
    B = _field(env, B_z)
    t = grid.times
    rho = coherence(t, env, constants, include_free_phase, B_z=B) if len(t) else np.empty(0, complex)
    return CoherenceSeries(
        grid=grid,
        t=t,
        rho01=np.asarray(rho, dtype=complex),
        env_fingerprint=env.with_field(B).fingerprint(),
        include_free_phase=include_free_phase,
        B_z=B,
        n_spins=env.n_spins,
        polarizations=tuple(float(p) for p in env.polarizations),
        constants=constants,
    )


def series_on_grid(
    env: EnvironmentRealization,
    constants: PhysicalConstants | None,
    kind,
    t_max: float = DEFAULT_T_MAX,
    B_z: float | None = None,
    dt: float | None = None,
    include_free_phase: bool = False,
) -> CoherenceSeries:
    """Build the omega-locked grid for the field and sample on it."""
    constants = constants or PhysicalConstants()
    B = _field(env, B_z)
    grid = build_grid(kind, larmor_frequency(B, constants), t_max, dt)
    return sample_series(env, constants, grid, include_free_phase, B_z=B)


def prime_envelope(t, env: EnvironmentRealization, constants: PhysicalConstants | None = None, B_z: float | None = None) -> np.ndarray:
    """1/2 prod_k of the t_prime two-term modulus, evaluated at arbitrary times.

    This is the smooth curve that the t_prime samples lie on.
    """
    constants = constants or PhysicalConstants()
    omega = larmor_frequency(_field(env, B_z), constants)
    omega_k, a_k = dressed_arrays(env.couplings, omega)
    return 0.5 * _kernels.abs_product_prime(np.asarray(t, dtype=float), omega_k, a_k, env.polarizations)


def doubleprime_envelope(t, env: EnvironmentRealization, constants: PhysicalConstants | None = None, B_z: float | None = None) -> np.ndarray:
    constants = constants or PhysicalConstants()
    omega = larmor_frequency(_field(env, B_z), constants)
    omega_k, a_k = dressed_arrays(env.couplings, omega)
    return 0.5 * _kernels.abs_product_doubleprime(np.asarray(t, dtype=float), omega_k, a_k, env.polarizations)
