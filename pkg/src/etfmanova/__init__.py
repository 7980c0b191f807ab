"""Random sub-frame spectra of equiangular tight frames.

Frame constructions, sub-frame selection and spectra, the Marchenko-Pastur
and MANOVA limit laws, exact and asymptotic moment theory, coding-theoretic
measures and an experiment harness.
"""

from .frames import Frame, build, diagnostics, load_frame, save_frame
from .limits import LimitLaw
from .moments import MomentContext
from .numerics import RngStream
from .spectra import Esd
from .subsets import SelectionMask, SelectionModel

__all__ = [
    "Esd",
    "Frame",
    "LimitLaw",
    "MomentContext",
    "RngStream",
    "SelectionMask",
    "SelectionModel",
    "build",
    "diagnostics",
    "load_frame",
    "save_frame",
]
__version__ = "0.1.0"
