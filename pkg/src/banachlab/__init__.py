"""banachlab: a numerical laboratory for renorming geometry on [0,1].

Builds the weighted-ℓ² aggregation norm over leveled neighborhood bases,
turns its rotundity and diameter-2 phenomena into executable certificates,
and ships a deterministic CLI for every experiment.
"""

from .core_model import Enclosure, Interval, Measure, PLFunction
from .d_norm import DNormContext, d_norm, dirac_dual_norm, dual_norm, sup_norm_bounds
from .neighborhood_base import EpsilonSchedule, NeighborhoodBase, build_leveled

__version__ = "0.1.0"

__all__ = [
    "Enclosure",
    "Interval",
    "Measure",
    "PLFunction",
    "DNormContext",
    "d_norm",
    "dirac_dual_norm",
    "dual_norm",
    "sup_norm_bounds",
    "EpsilonSchedule",
    "NeighborhoodBase",
    "build_leveled",
    "__version__",
]
