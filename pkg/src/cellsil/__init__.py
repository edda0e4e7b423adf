"""Sharp-interface cell motility: velocity nonlinearity, traveling waves, curve dynamics."""
from .errors import CellSILError
from .geometry import DiscreteCurve
from .nonlinearity import BvpPhi, TablePhi, ToyPhi, estimate_beta_crit, make_phi
from .potential import PotentialWell, StandingWaveProfile, compute_c0, solve_standing_wave
from .simulator import Regime, SimConfig, classify_regime, init_state, run, step
from .travelwave import (
    TravelingWaveProfile,
    closure_functional_I2,
    find_traveling_waves,
    integral_criterion_I,
)

__version__ = "0.1.0"

__all__ = [
    "BvpPhi", "CellSILError", "DiscreteCurve", "PotentialWell", "Regime", "SimConfig",
    "StandingWaveProfile", "TablePhi", "ToyPhi", "TravelingWaveProfile", "classify_regime",
    "closure_functional_I2", "compute_c0", "estimate_beta_crit", "find_traveling_waves",
    "init_state", "integral_criterion_I", "make_phi", "run", "solve_standing_wave", "step",
    "__version__",
]
