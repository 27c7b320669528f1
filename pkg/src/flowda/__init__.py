"""flowda: training-free ensemble data assimilation with flow-matching filters."""

from .core import (
    ArctanObservation,
    Ensemble,
    LinearObservation,
    RngStream,
    TransitionModel,
    energy_and_grad,
    observe,
    propagate,
)
from .filters import BPF, EnFF, EnKFPO, EnSF, FilterConfig, run_filter
from .flow import CoupledPairSet, F2PFlow, OTFlow, integrate_flow, marginal_vf
from .guidance import LocalizedGuidance, MCGuidance, guided_vf

__all__ = [
    "ArctanObservation",
    "BPF",
    "CoupledPairSet",
    "EnFF",
    "EnKFPO",
    "EnSF",
    "Ensemble",
    "F2PFlow",
    "FilterConfig",
    "LinearObservation",
    "LocalizedGuidance",
    "MCGuidance",
    "OTFlow",
    "RngStream",
    "TransitionModel",
    "energy_and_grad",
    "guided_vf",
    "integrate_flow",
    "marginal_vf",
    "observe",
    "propagate",
    "run_filter",
]

__version__ = "0.1.0"
