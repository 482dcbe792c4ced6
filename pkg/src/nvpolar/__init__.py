"""Discrete-time NV-center coherence and nuclear polarization-product bounds."""

from ._kernels import BACKEND
from .coherence import (
    CoherenceSeries,
    GridKind,
    TimeGrid,
    abs_factor_doubleprime,
    abs_factor_prime,
    build_grid,
    coherence,
    dressed_spins,
    sample_series,
    series_on_grid,
    single_spin_factor,
)
from .estimator import (
    AmplitudeCalibration,
    PolarizationEstimate,
    calibrate_amplitudes,
    estimate,
    estimate_from_doubleprime,
    estimate_from_prime,
    running_min,
    sweep,
)
from .hyperfine import (
    CouplingRow,
    DressedSpin,
    PhysicalConstants,
    amplitude,
    coupling_tensor_row,
    effective_frequency,
    larmor_frequency,
    table_consistency_check,
)
from .lattice import (
    EmptyEnvironmentError,
    EnvironmentRealization,
    LatticeConfig,
    generate_sites,
    select_environment,
    set_polarizations,
)

__version__ = "0.1.0"
