"""Forward models and truth generators for the benchmark systems."""

from .ks import KSConfig, SpectralWorkspace, ks_step
from .lorenz96 import Lorenz96Config, lorenz96_rhs, lorenz96_step
from .navier_stokes import NSConfig, gp_initial_condition, ns_step
from .truth import (
    ObservationProtocol,
    SystemDriver,
    TruthBundle,
    ks_driver,
    lorenz96_driver,
    make_truth_and_obs,
    ns_driver,
)

__all__ = [
    "KSConfig",
    "Lorenz96Config",
    "NSConfig",
    "ObservationProtocol",
    "SpectralWorkspace",
    "SystemDriver",
    "TruthBundle",
    "gp_initial_condition",
    "ks_driver",
    "ks_step",
    "lorenz96_driver",
    "lorenz96_rhs",
    "lorenz96_step",
    "make_truth_and_obs",
    "ns_driver",
    "ns_step",
]
