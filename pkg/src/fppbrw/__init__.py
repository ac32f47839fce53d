"""First-passage percolation on branching-random-walk fields.

Field samplers, exact geodesics, path coarsening, regularized total
variation, the inductive crossing construction and a Monte Carlo harness.
"""

from .field import FieldKind, GaussianSource, sample_field
from .geodesic import WeightGrid, crossing_distance
from .rtv import rtv_dp
from .construct import ConstructParams, run_induction

__all__ = ["FieldKind", "GaussianSource", "sample_field", "WeightGrid", "crossing_distance", "rtv_dp",
           "ConstructParams", "run_induction"]
__version__ = "0.1.0"
