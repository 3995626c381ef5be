"""Classical field energy and Aharonov-Bohm phase around flux-bearing sources."""

from .core import (
    CGS,
    NATURAL,
    CylinderRegion,
    Frame,
    OrientedSurface,
    PhysicalConstants,
    TorusRegion,
    UnitScale,
    surface_sample,
)
from .electron import ElectronState, Trajectory, electron_b_field, electron_e_field, electron_flux_through_loop, flyby
from .energy import (
    BackReaction,
    EnergyLedger,
    PoyntingReport,
    Scenario,
    back_reaction,
    cancellation_sweep,
    energy_ledger,
    flux_independence_check,
    poynting_rate,
)
from .phase import BeamPath, PhaseResult, fringe_pattern, gauge_shift, path_phase, relative_phase
from .quadrature import IntegralResult, QuadratureSpec, ScalingFit, power_law_fit, surface_flux_integral, volume_integral
from .sources import (
    RotorSource,
    SolenoidSource,
    WhiskerSource,
    a0_potential,
    b0_field,
    flux,
    self_inductance,
)

__version__ = "1.0.0"
