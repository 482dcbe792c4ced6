"""Random 13C bath realizations on the diamond lattice and their serialization."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from ._io import atomic_write_text, dumps_json, fmt
from .hyperfine import CouplingRow, PhysicalConstants, coupling_tensor_row

DIAMOND_LATTICE_CONSTANT = 0.3567  # nm
NATURAL_ABUNDANCE = 0.011

ENV_CSV_HEADER = ("k", "r_nm", "Azx_per_us", "Azy_per_us", "Azz_per_us", "p")

# diamond sites in units of a/4: fcc translations plus the two-atom basis
_FCC_OFFSETS = np.array([[0, 0, 0], [0, 2, 2], [2, 0, 2], [2, 2, 0]])
_BASIS = np.array([[0, 0, 0], [1, 1, 1]])
_VACANCY = (0, 0, 0)
_NITROGEN = (1, 1, 1)


class EmptyEnvironmentError(ValueError):
    """No spinful nucleus was drawn, or an environment would end up empty."""


class SelectionRule(str, Enum):
    STRONGEST_COUPLING = "strongest_coupling"
    NEAREST = "nearest"


@dataclass(frozen=True)
class LatticeConfig:
    seed: int = 0
    supercell_radius: float = 2.5
    abundance: float = NATURAL_ABUNDANCE
    max_spins: int = 8
    selection_rule: SelectionRule = SelectionRule.STRONGEST_COUPLING
    exclusion_radius: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "selection_rule", SelectionRule(self.selection_rule))
        if not 0.0 <= self.abundance <= 1.0:
            raise ValueError(f"abundance must lie in [0, 1], got {self.abundance}")
        if not self.supercell_radius > 0:
            raise ValueError("supercell_radius must be positive")
        if int(self.max_spins) != self.max_spins or self.max_spins < 1:
            raise ValueError("max_spins must be an integer >= 1")
        if self.exclusion_radius < 0:
            raise ValueError("exclusion_radius must be non-negative")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "supercell_radius": self.supercell_radius,
            "abundance": self.abundance,
            "max_spins": self.max_spins,
            "selection_rule": self.selection_rule.value,
            "exclusion_radius": self.exclusion_radius,
        }

    @classmethod
    def from_dict(cls, data: dict) -> LatticeConfig:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown lattice keys: {sorted(unknown)}")
        return cls(**data)


def nv_frame_rotation() -> np.ndarray:
    """Rows are the NV-frame axes expressed in crystal coordinates.

    z is [111]; x is crystal [100] projected onto the plane normal to z;
    y completes the right-handed triad.
    """
    z = np.ones(3) / math.sqrt(3.0)
    x = np.array([1.0, 0.0, 0.0]) - z[0] * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.vstack([x, y, z])


def crystal_to_nv_frame(r_crystal) -> np.ndarray:
    return np.asarray(r_crystal, dtype=float) @ nv_frame_rotation().T


def candidate_sites(supercell_radius: float, lattice_constant: float = DIAMOND_LATTICE_CONSTANT) -> np.ndarray:
    """Carbon sites within the radius, crystal frame, nm, in a fixed order.

    The vacancy (origin) and the nitrogen site at a/4 [111] are excluded.
    """
    quarter = lattice_constant / 4.0
    m = int(math.ceil(supercell_radius / lattice_constant)) + 1
    cells = np.arange(-m, m + 1)
    grid = np.stack(np.meshgrid(cells, cells, cells, indexing="ij"), axis=-1).reshape(-1, 3) * 4
    q = (grid[:, None, None, :] + _FCC_OFFSETS[None, :, None, :] + _BASIS[None, None, :, :]).reshape(-1, 3)
    q = np.unique(q, axis=0)  # lexicographic order makes the draw order seed-stable
    keep = np.linalg.norm(q * quarter, axis=1) <= supercell_radius
    q = q[keep]
    occupied = np.all(q == _VACANCY, axis=1) | np.all(q == _NITROGEN, axis=1)
    return q[~occupied] * quarter


def generate_sites(config: LatticeConfig) -> np.ndarray:
    """Draw spinful sites; returns an (M, 3) array of NV-frame displacements in nm."""
    crystal = candidate_sites(config.supercell_radius)
    rng = np.random.default_rng(config.seed)
    spinful = rng.random(len(crystal)) < config.abundance
    sites = crystal_to_nv_frame(crystal[spinful])
    if config.exclusion_radius > 0:
        sites = sites[np.linalg.norm(sites, axis=1) >= config.exclusion_radius]
    if len(sites) == 0:
        raise EmptyEnvironmentError(
            f"no spinful 13C site drawn (seed={config.seed}, abundance={config.abundance}, "
            f"radius={config.supercell_radius} nm)"
        )
    return sites


@dataclass(frozen=True)
class Spin:
    coupling: CouplingRow
    p: float = 0.0
    position: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class EnvironmentRealization:
    spins: tuple[Spin, ...]
    B_z: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "spins", tuple(self.spins))
        if not self.spins:
            raise EmptyEnvironmentError("an environment needs at least one spin")
        for k, s in enumerate(self.spins):
            if not abs(s.p) <= 1.0:
                raise ValueError(f"polarization of spin {k} out of [-1, 1]: {s.p}")
        if self.B_z is not None and not self.B_z > 0:
            raise ValueError(f"B_z must be positive, got {self.B_z}")

    def __len__(self) -> int:
        return len(self.spins)

    @property
    def n_spins(self) -> int:
        return len(self.spins)

    @property
    def couplings(self) -> np.ndarray:
        return np.array([s.coupling.as_array() for s in self.spins])

    @property
    def polarizations(self) -> np.ndarray:
        return np.array([s.p for s in self.spins], dtype=float)

    def with_field(self, B_z: float) -> EnvironmentRealization:
        return replace(self, B_z=float(B_z))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ENV_CSV_HEADER)
        for k, s in enumerate(self.spins, start=1):
            c = s.coupling
            w.writerow([k, "" if c.r is None else fmt(c.r), fmt(c.Azx), fmt(c.Azy), fmt(c.Azz), fmt(s.p)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        rows = []
        for k, s in enumerate(self.spins, start=1):
            c = s.coupling
            rows.append({
                "k": k, "r_nm": c.r, "Azx_per_us": c.Azx, "Azy_per_us": c.Azy,
                "Azz_per_us": c.Azz, "p": s.p,
            })
        return {"B_z": self.B_z, "spins": rows}

    def fingerprint(self) -> str:
        """sha256 over the canonical CSV plus the field."""
        payload = self.to_csv() + f"B_z={'' if self.B_z is None else fmt(self.B_z)}\n"
        return hashlib.sha256(payload.encode()).hexdigest()

    @classmethod
    def from_rows(cls, rows: Sequence[dict], B_z: float | None = None) -> EnvironmentRealization:
        spins = []
        for row in rows:
            r = row.get("r_nm")
            r = None if r in (None, "") else float(r)
            coupling = CouplingRow(float(row["Azx_per_us"]), float(row["Azy_per_us"]), float(row["Azz_per_us"]), r=r)
            spins.append(Spin(coupling, float(row.get("p", 0.0) or 0.0)))
        return cls(tuple(spins), B_z=B_z)

    @classmethod
    def from_csv(cls, text: str, B_z: float | None = None) -> EnvironmentRealization:
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != ENV_CSV_HEADER:
            raise ValueError(f"environment CSV header must be {','.join(ENV_CSV_HEADER)}, got {reader.fieldnames}")
        return cls.from_rows(list(reader), B_z=B_z)

    @classmethod
    def from_dict(cls, data: dict) -> EnvironmentRealization:
        return cls.from_rows(data["spins"], B_z=data.get("B_z"))


def set_polarizations(env: EnvironmentRealization, p) -> EnvironmentRealization:
    """Assign one polarization per spin, or a uniform value to all."""
    values = np.atleast_1d(np.asarray(p, dtype=float))
    if values.size == 1 and np.ndim(p) == 0:
        values = np.full(env.n_spins, float(values[0]))
    if values.size != env.n_spins:
        raise ValueError(f"got {values.size} polarizations for {env.n_spins} spins")
    for k, v in enumerate(values):
        if not (math.isfinite(v) and abs(v) <= 1.0):
            raise ValueError(f"polarization at index {k} must lie in [-1, 1], got {v}")
    spins = tuple(replace(s, p=float(v)) for s, v in zip(env.spins, values))
    return replace(env, spins=spins)


def select_environment(
    sites: np.ndarray,
    constants: PhysicalConstants | None = None,
    config: LatticeConfig | None = None,
) -> EnvironmentRealization:
    """Rank sites by coupling strength (or distance) and keep at most ``max_spins``."""
    constants = constants or PhysicalConstants()
    config = config or LatticeConfig()
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    if sites.size == 0:
        raise EmptyEnvironmentError("cannot select an environment from zero sites")
    rows = [coupling_tensor_row(r, constants) for r in sites]
    if config.selection_rule is SelectionRule.NEAREST:
        key = np.linalg.norm(sites, axis=1)
    else:
        key = -np.array([row.norm for row in rows])
    order = np.argsort(key, kind="stable")[: config.max_spins]
    spins = tuple(Spin(rows[i], 0.0, tuple(float(v) for v in sites[i])) for i in order)
    return EnvironmentRealization(spins)


def generate_environment(config: LatticeConfig, constants: PhysicalConstants | None = None) -> EnvironmentRealization:
    return select_environment(generate_sites(config), constants, config)


def write_environment(env: EnvironmentRealization, stem, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and the ``<stem>.json`` mirror."""
    stem = Path(stem)
    csv_path = atomic_write_text(stem.with_suffix(".csv"), env.to_csv())
    payload = env.to_dict()
    if extra:
        payload.update(extra)
    json_path = atomic_write_text(stem.with_suffix(".json"), dumps_json(payload))
    return csv_path, json_path


def read_environment(path, B_z: float | None = None) -> EnvironmentRealization:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        env = EnvironmentRealization.from_dict(json.loads(text))
        return env if B_z is None else env.with_field(B_z)
    return EnvironmentRealization.from_csv(text, B_z=B_z)
