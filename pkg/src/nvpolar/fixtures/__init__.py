"""Bundled coupling tables (6-decimal values, polarization column zeroed)."""

from __future__ import annotations

import hashlib
from importlib import resources

from ..lattice import EnvironmentRealization

CHECKSUMS = {
    "table1": "dd1da0f8f3ed7664460e4ac8a047c712c095ae94dfb5862b6f2c57fb77713c8c",
    "table2": "d61f10cea7a2d66daf2367d613737a08a6eddfe8fabcdae0b13643314ff40569",
    "table3": "f164e0b9d72bf3ed19fcc806b2bee926fdce28798cbc5aa9455cbbe0f75a1a99",
    "table4": "1b9462c1a45392a59061660de1ae75b7111177cbe18edd5c1db3d3cd139673a2",
}

NAMES = tuple(CHECKSUMS)


class FixtureIntegrityError(RuntimeError):
    pass


def fixture_text(name: str) -> str:
    if name not in CHECKSUMS:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(NAMES)}")
    return resources.files(__name__).joinpath(f"{name}.csv").read_text()


def verify(name: str | None = None) -> None:
    for key in [name] if name else NAMES:
        digest = hashlib.sha256(fixture_text(key).encode()).hexdigest()
        if digest != CHECKSUMS[key]:
            raise FixtureIntegrityError(f"{key}.csv checksum mismatch: {digest}")


def load(name: str, B_z: float | None = None) -> EnvironmentRealization:
    return EnvironmentRealization.from_csv(fixture_text(name), B_z=B_z)
