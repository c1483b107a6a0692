"""Interior-conic analysis and controller synthesis for polytopic LPV systems."""

from . import conic, errors, heatx, lmi, lpvsys, matcore, sdp, sim, synthesis
from .conic import ConicSector, certify_cone
from .lpvsys import GeneralizedVertex, PolytopicModel
from .sdp import SolverOptions

__version__ = "0.1.0"

__all__ = [
    "conic",
    "errors",
    "heatx",
    "lmi",
    "lpvsys",
    "matcore",
    "sdp",
    "sim",
    "synthesis",
    "ConicSector",
    "certify_cone",
    "GeneralizedVertex",
    "PolytopicModel",
    "SolverOptions",
]
