"""Polarization-product bounds from discretely sampled coherence.

On the t_prime grid, and with every |a_k| >= |p_k|, the minimum of
2|rho01| over the sampled times bounds prod |p_k| from above. On the
t_doubleprime grid the same minimum bounds prod |a_k p_k| with no field
condition; dividing by an amplitude-product calibration (the maximum of
2|rho01(t')| for an unpolarized bath at the same field) gives a bound on
prod |p_k| again.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from ._io import atomic_write_text, dumps_json, fmt
from .coherence import DEFAULT_T_MAX, CoherenceSeries, GridKind, series_on_grid
from .hyperfine import PhysicalConstants, dressed_arrays, larmor_frequency
from .lattice import EnvironmentRealization, set_polarizations

HEADLINE_HORIZON = 219.0  # us
DEGENERATE_AMPLITUDE = 1e-3

STAIRCASE_CSV_HEADER = ("t_us", "min_abs", "p_bar_running")


class DegenerateSpinWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PolarizationEstimate:
    staircase: tuple[tuple[float, float], ...]
    product_bound: float
    p_bar: float
    N: int
    grid_kind: GridKind
    B_z: float | None
    horizon: float
    weighted_bound: float | None = None
    calibration: float | None = None
    high_field_assumption: bool = False

    def to_dict(self) -> dict:
        d = {
            "B_z": self.B_z,
            "grid_kind": self.grid_kind.value,
            "horizon_us": self.horizon,
            "N": self.N,
            "product_bound": self.product_bound,
            "p_bar": self.p_bar,
            "staircase": [[t, m] for t, m in self.staircase],
        }
        if self.grid_kind is GridKind.T_DOUBLEPRIME:
            d["weighted_bound"] = self.weighted_bound
            d["calibration"] = self.calibration
            d["high_field_assumption"] = self.high_field_assumption
        return d

    def staircase_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(STAIRCASE_CSV_HEADER)
        scale = 1.0 if self.calibration is None else self.calibration
        for t, m in self.staircase:
            w.writerow([fmt(t), fmt(m), fmt(_nth_root(min(2.0 * m / scale, 1.0), self.N))])
        return buf.getvalue()

    def write(self, stem, extra: dict | None = None) -> tuple[Path, Path]:
        stem = Path(stem)
        payload = self.to_dict()
        if extra:
            payload.update(extra)
        return (
            atomic_write_text(stem.with_suffix(".json"), dumps_json(payload)),
            atomic_write_text(stem.parent / f"{stem.name}_staircase.csv", self.staircase_csv()),
        )


@dataclass(frozen=True)
class AmplitudeCalibration:
    amplitude_product_lower_bound: float
    B_z: float | None
    horizon: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.amplitude_product_lower_bound <= 1.0 + 1e-12:
            raise ValueError("amplitude product bound must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "amplitude_product_lower_bound": self.amplitude_product_lower_bound,
            "B_z": self.B_z,
            "horizon_us": self.horizon,
        }

    @classmethod
    def from_dict(cls, data: dict) -> AmplitudeCalibration:
        return cls(data["amplitude_product_lower_bound"], data.get("B_z"), data["horizon_us"])


def _nth_root(x: float, n: int) -> float:
    return float(x) ** (1.0 / n) if x > 0 else 0.0


def _discrete(series: CoherenceSeries, *allowed: GridKind) -> None:
    kind = series.grid.kind
    if not kind.discrete:
        raise ValueError("estimation is defined on the t_prime / t_doubleprime grids only, got a continuous series")
    if allowed and kind not in allowed:
        raise ValueError(f"expected a {' or '.join(k.value for k in allowed)} series, got {kind.value}")


def _truncate(series: CoherenceSeries, horizon: float | None) -> tuple[np.ndarray, np.ndarray, float]:
    t, absval = series.t, series.abs
    if horizon is None:
        horizon = float(series.grid.t_max)
    else:
        keep = t <= horizon
        t, absval = t[keep], absval[keep]
    if len(t) == 0:
        raise ValueError(f"no samples within horizon {horizon} us")
    return t, absval, float(horizon)


def _n_spins(series: CoherenceSeries, N: int | None) -> int:
    if N is None:
        N = series.n_spins
    elif series.n_spins is not None and N != series.n_spins:
        raise ValueError(f"N = {N} does not match the {series.n_spins} spins of the simulated environment")
    if not N or N < 1:
        raise ValueError("spin count N must be >= 1")
    return int(N)


def running_min(series: CoherenceSeries, horizon: float | None = None) -> tuple[tuple[float, float], ...]:
    """(first time, new minimum) pairs, emitted only at strict improvements."""
    _discrete(series)
    t, absval, _ = _truncate(series, horizon)
    idx = _kernels.running_min_indices(absval)
    return tuple((float(t[i]), float(absval[i])) for i in idx)


def estimate_from_prime(series: CoherenceSeries, N: int | None = None, horizon: float | None = None) -> PolarizationEstimate:
    """2 min |rho01(t')| bounds prod |p_k| from above (given |a_k| >= |p_k|)."""
    _discrete(series, GridKind.T_PRIME)
    N = _n_spins(series, N)
    _, _, horizon = _truncate(series, horizon)
    stairs = running_min(series, horizon)
    bound = 2.0 * stairs[-1][1]
    return PolarizationEstimate(stairs, bound, _nth_root(bound, N), N, GridKind.T_PRIME, series.B_z, horizon)


def calibrate_amplitudes(series: CoherenceSeries, horizon: float | None = None) -> AmplitudeCalibration:
    """2 max |rho01(t')| of an unpolarized run bounds prod |a_k| from below."""
    _discrete(series, GridKind.T_PRIME)
    if any(p != 0.0 for p in series.polarizations):
        raise ValueError("amplitude calibration requires an unpolarized environment (all p_k = 0)")
    _, absval, horizon = _truncate(series, horizon)
    return AmplitudeCalibration(min(2.0 * float(absval.max()), 1.0), series.B_z, horizon)


def estimate_from_doubleprime(
    series: CoherenceSeries,
    N: int | None = None,
    calibration: AmplitudeCalibration | float | None = None,
    horizon: float | None = None,
) -> PolarizationEstimate:
    """Bound prod |p_k| from the t'' minimum, de-weighted by the amplitude calibration.

    ``calibration=None`` assumes prod |a_k| = 1 (high field) and flags it.
    """
    _discrete(series, GridKind.T_DOUBLEPRIME)
    N = _n_spins(series, N)
    _, _, horizon = _truncate(series, horizon)
    assumed = calibration is None
    if assumed:
        c = 1.0
    elif isinstance(calibration, AmplitudeCalibration):
        if calibration.B_z is not None and series.B_z is not None and not math.isclose(calibration.B_z, series.B_z, rel_tol=1e-12):
            raise ValueError(f"calibration taken at {calibration.B_z} T but series at {series.B_z} T")
        c = calibration.amplitude_product_lower_bound
    else:
        c = float(calibration)
    if not c > 0:
        raise ZeroDivisionError("amplitude calibration is zero; the de-weighted bound is undefined")
    stairs = running_min(series, horizon)
    weighted = 2.0 * stairs[-1][1]
    bound = weighted / c
    return PolarizationEstimate(
        stairs, bound, _nth_root(min(bound, 1.0), N), N, GridKind.T_DOUBLEPRIME, series.B_z, horizon,
        weighted_bound=weighted, calibration=c, high_field_assumption=assumed,
    )


def degenerate_spins(env: EnvironmentRealization, constants: PhysicalConstants | None = None, B_z: float | None = None,
                     threshold: float = DEGENERATE_AMPLITUDE) -> list[int]:
    """Indices of spins whose |a_k| is below ``threshold`` (omega nearly cancels A^zz)."""
    constants = constants or PhysicalConstants()
    B = env.B_z if B_z is None else B_z
    _, a_k = dressed_arrays(env.couplings, larmor_frequency(B, constants))
    return [int(i) for i in np.flatnonzero(np.abs(a_k) < threshold)]


def warn_if_degenerate(env, constants=None, B_z=None) -> list[int]:
    bad = degenerate_spins(env, constants, B_z)
    if bad:
        warnings.warn(
            f"spins {bad} have |a_k| < {DEGENERATE_AMPLITUDE} at this field, so the bound is vacuous; "
            "a small change of the applied field rectifies the situation",
            DegenerateSpinWarning,
            stacklevel=2,
        )
    return bad


def estimate(
    env: EnvironmentRealization,
    constants: PhysicalConstants | None = None,
    B_z: float | None = None,
    horizon: float = HEADLINE_HORIZON,
    kind=GridKind.T_PRIME,
    calibration: AmplitudeCalibration | float | None = None,
) -> PolarizationEstimate:
    """Simulate on the omega-locked grid up to ``horizon`` and estimate."""
    constants = constants or PhysicalConstants()
    B = env.B_z if B_z is None else B_z
    warn_if_degenerate(env, constants, B)
    kind = GridKind.parse(kind)
    series = series_on_grid(env, constants, kind, horizon, B_z=B)
    if kind is GridKind.T_PRIME:
        return estimate_from_prime(series, env.n_spins, horizon)
    return estimate_from_doubleprime(series, env.n_spins, calibration, horizon)


def calibrate(env: EnvironmentRealization, constants: PhysicalConstants | None = None, B_z: float | None = None,
              horizon: float = DEFAULT_T_MAX) -> AmplitudeCalibration:
    """Run the unpolarized t' measurement for ``env`` at field ``B_z``."""
    constants = constants or PhysicalConstants()
    B = env.B_z if B_z is None else B_z
    series = series_on_grid(set_polarizations(env, 0.0), constants, GridKind.T_PRIME, horizon, B_z=B)
    return calibrate_amplitudes(series, horizon)


def sweep(
    env: EnvironmentRealization,
    constants: PhysicalConstants | None,
    fields: Sequence[float],
    polarizations=None,
    horizon: float = DEFAULT_T_MAX,
    kind=GridKind.T_PRIME,
    workers: int | None = None,
) -> list[PolarizationEstimate]:
    """One estimate per field value, each on its own omega-locked grid."""
    fields = [float(B) for B in fields]
    if not fields:
        raise ValueError("sweep needs at least one field value")
    constants = constants or PhysicalConstants()
    if polarizations is not None:
        env = set_polarizations(env, polarizations)

    def one(B):
        calibration = calibrate(env, constants, B, horizon) if GridKind.parse(kind) is GridKind.T_DOUBLEPRIME else None
        return estimate(env, constants, B, horizon, kind, calibration)

    if workers and workers > 1 and len(fields) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, fields))
    return [one(B) for B in fields]
