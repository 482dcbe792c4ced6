"""Dipolar NV-13C coupling rows and the field-dressed per-spin parameters.

Units throughout: frequencies in rad/us, lengths in nm, fields in T.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

# CODATA electron gyromagnetic ratio and the 13C nuclear value, rad/(s*T)
_GAMMA_E_SI = 1.76085963023e11
_GAMMA_13C_SI = 6.728284e7
_HBAR = 1.054571817e-34
_MU0_OVER_4PI = 1e-7

#: (mu0/4pi) * gamma_e * gamma_n * hbar in rad * nm^3 / us, kept to the 9 digits written to output files
DEFAULT_DIPOLAR_PREFACTOR = float(f"{_MU0_OVER_4PI * _GAMMA_E_SI * _GAMMA_13C_SI * _HBAR * 1e27 / 1e6:.9g}")


class AngularConvention(str, Enum):
    AS_GIVEN = "as_given"
    TIMES_TWO_PI = "times_two_pi"


class DegenerateSpinError(ValueError):
    """omega_k vanishes, so the amplitude a_k is undefined."""


@dataclass(frozen=True)
class PhysicalConstants:
    """Physical inputs for the coupling and dressing formulas.

    ``gamma_n`` and ``gamma_e`` are the gyromagnetic ratios in MHz/T as
    commonly quoted; ``angular_convention`` decides whether they are used
    verbatim as rad/us per tesla or multiplied by 2*pi. ``Delta`` is the
    zero-field splitting in GHz. ``gamma_e`` and ``Delta`` only enter the
    optional free-precession phase of the qubit.
    """

    gamma_n: float = 10.71
    gamma_e: float = 28.08
    Delta: float = 2.87
    dipolar_prefactor: float = DEFAULT_DIPOLAR_PREFACTOR
    angular_convention: AngularConvention = AngularConvention.AS_GIVEN

    def __post_init__(self):
        object.__setattr__(self, "angular_convention", AngularConvention(self.angular_convention))
        for name in ("gamma_n", "gamma_e", "Delta", "dipolar_prefactor"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and strictly positive, got {value!r}")

    @property
    def angular_factor(self) -> float:
        return 2 * math.pi if self.angular_convention is AngularConvention.TIMES_TWO_PI else 1.0

    def free_precession_frequency(self, B_z: float) -> float:
        """(Delta - gamma_e B_z) in rad/us; Delta is converted from GHz."""
        return self.angular_factor * (self.Delta * 1e3 - self.gamma_e * B_z)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["angular_convention"] = self.angular_convention.value
        return d

    @classmethod
    def from_dict(cls, data: dict) -> PhysicalConstants:
        unknown = set(data) - {f.name for f in cls.__dataclass_fields__.values()}
        if unknown:
            raise ValueError(f"unknown constants keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class CouplingRow:
    """Hyperfine components A^{z,x}, A^{z,y}, A^{z,z} (rad/us) and optional distance r (nm)."""

    Azx: float
    Azy: float
    Azz: float
    r: float | None = None

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.Azx, self.Azy, self.Azz)):
            raise ValueError(f"coupling components must be finite: {self}")
        if self.r is not None and not (math.isfinite(self.r) and self.r > 0):
            raise ValueError(f"distance must be positive, got {self.r!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.Azx, self.Azy, self.Azz])

    @property
    def norm(self) -> float:
        return math.sqrt(self.Azx**2 + self.Azy**2 + self.Azz**2)


@dataclass(frozen=True)
class DressedSpin:
    omega_k: float
    a_k: float
    p_k: float = 0.0

    def __post_init__(self):
        if self.omega_k < 0:
            raise ValueError("omega_k must be non-negative")
        if abs(self.a_k) > 1 + 1e-12:
            raise ValueError(f"|a_k| must not exceed 1, got {self.a_k}")
        if abs(self.p_k) > 1:
            raise ValueError(f"|p_k| must not exceed 1, got {self.p_k}")


def coupling_tensor_row(r_vec, constants: PhysicalConstants | None = None) -> CouplingRow:
    """Secular dipolar row A^{z,j} = (C / r^3) (delta_zj - 3 n_z n_j).

    ``r_vec`` is the NV-to-nucleus displacement in the NV frame (nm).
    """
    constants = constants or PhysicalConstants()
    r_vec = np.asarray(r_vec, dtype=float)
    r = float(np.linalg.norm(r_vec))
    if not r > 0:
        raise ValueError("displacement vector must have non-zero length")
    n = r_vec / r
    scale = constants.dipolar_prefactor / r**3
    A = scale * (np.array([0.0, 0.0, 1.0]) - 3.0 * n[2] * n)
    return CouplingRow(float(A[0]), float(A[1]), float(A[2]), r=r)


def larmor_frequency(B_z: float, constants: PhysicalConstants | None = None) -> float:
    """Bath precession frequency gamma_n * B_z in rad/us."""
    constants = constants or PhysicalConstants()
    if not B_z > 0:
        raise ValueError(f"magnetic field must be strictly positive, got {B_z!r}")
    return constants.angular_factor * constants.gamma_n * B_z


def effective_frequency(row: CouplingRow, omega: float) -> float:
    return math.sqrt(row.Azx**2 + row.Azy**2 + (omega + row.Azz) ** 2)


def amplitude(row: CouplingRow, omega: float) -> float:
    omega_k = effective_frequency(row, omega)
    if omega_k == 0.0:
        raise DegenerateSpinError(
            f"omega_k = 0 for {row} at omega = {omega}: the field cancels A^zz and there is "
            "no transverse coupling; a small change of the applied field removes the degeneracy"
        )
    return (omega + row.Azz) / omega_k


def dress(row: CouplingRow, omega: float, p: float = 0.0) -> DressedSpin:
    return DressedSpin(effective_frequency(row, omega), amplitude(row, omega), p)


def dressed_arrays(couplings: np.ndarray, omega: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (omega_k, a_k) for an (N, 3) array of coupling rows."""
    couplings = np.atleast_2d(np.asarray(couplings, dtype=float))
    longitudinal = omega + couplings[:, 2]
    omega_k = np.sqrt(couplings[:, 0] ** 2 + couplings[:, 1] ** 2 + longitudinal**2)
    if np.any(omega_k == 0.0):
        bad = int(np.flatnonzero(omega_k == 0.0)[0])
        raise DegenerateSpinError(
            f"spin {bad}: omega_k = 0 at omega = {omega}; shift the applied field slightly"
        )
    return omega_k, longitudinal / omega_k


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    C_eff: float | None = None
    n: tuple[float, float, float] | None = None
    residual: float = math.inf
    message: str = ""
    extra: dict = field(default_factory=dict)


def table_consistency_check(row: CouplingRow, tolerance: float = 1e-6) -> ConsistencyReport:
    """Fit (C_eff, n) so that the row is a pure dipolar row at distance ``row.r``.

    With x = C_eff / r^3, |A|^2 = x^2 (1 + 3 n_z^2) and A^zz = x (1 - 3 n_z^2)
    combine to 2 x^2 - A^zz x - |A|^2 = 0; the positive root fixes x, then n
    follows from the three component equations (n_z >= 0 by convention, since
    n and -n give the same row).
    """
    if row.r is None:
        raise ValueError("table_consistency_check needs the distance r")
    A2 = row.Azx**2 + row.Azy**2 + row.Azz**2
    x = (row.Azz + math.sqrt(row.Azz**2 + 8.0 * A2)) / 4.0
    if not x > 0:
        return ConsistencyReport(False, message="zero coupling row cannot come from a positive prefactor")
    nz2 = (1.0 - row.Azz / x) / 3.0
    if nz2 < -tolerance or nz2 > 1 + tolerance:
        return ConsistencyReport(False, message=f"n_z^2 = {nz2} outside [0, 1]")
    nz2 = min(max(nz2, 0.0), 1.0)
    transverse = math.hypot(row.Azx, row.Azy)
    # 1 - A^zz/x cancels near the plane and the axis; there
    # n_z^2 (1 - n_z^2) = (|A_perp| / 3x)^2 gives the small root accurately
    small = 0.5 * (1.0 - math.sqrt(max(1.0 - 4.0 * (transverse / (3.0 * x)) ** 2, 0.0)))
    if nz2 < 0.25:
        nz2_, nperp2 = small, 1.0 - small
    elif nz2 > 0.75:
        nz2_, nperp2 = 1.0 - small, small
    else:
        nz2_, nperp2 = nz2, 1.0 - nz2
    nz, n_perp = math.sqrt(nz2_), math.sqrt(nperp2)
    # (A^zx, A^zy) = -3 x n_z (n_x, n_y): direction from the components, length from |n| = 1;
    # dividing by n_z instead is ill-conditioned near the plane
    if transverse > 0:
        nx, ny = -n_perp * row.Azx / transverse, -n_perp * row.Azy / transverse
    else:
        nx, ny = n_perp, 0.0  # unobservable azimuth
    n = np.array([nx, ny, nz])
    rebuilt = x * (np.array([0.0, 0.0, 1.0]) - 3.0 * nz * n)
    residual = max(abs(float(np.linalg.norm(n)) - 1.0), float(np.max(np.abs(rebuilt - row.as_array()))))
    ok = residual <= tolerance
    return ConsistencyReport(
        ok,
        C_eff=x * row.r**3,
        n=(float(nx), float(ny), float(nz)),
        residual=residual,
        message="" if ok else f"residual {residual:.3g} exceeds tolerance {tolerance:.3g}",
    )
