"""Intertwined isospectral Schrodinger potentials in n dimensions.

Construction of (V0, V1) pairs linked by a first-order operator built from
the Euclidean generators, integrability checks, separating coordinates,
finite-difference verification and Darboux hierarchies.
"""

from .euclid import IntertwinerParams, ParamsError, make_params, params_3d, vector_field_L
from .fields import ScalarField, SingularPointError
from .expr import parse, evaluate, differentiate
from .potentials import (
    PotentialPair, build_1d_pair, build_2d_pair, build_3d_pair, build_constant_shift,
    build_general_pair, build_translational, free_motion_partners_2d,
    free_motion_partners_3d, solve_riccati_2d,
)

__all__ = [
    "IntertwinerParams", "ParamsError", "make_params", "params_3d", "vector_field_L",
    "ScalarField", "SingularPointError", "parse", "evaluate", "differentiate",
    "PotentialPair", "build_1d_pair", "build_2d_pair", "build_3d_pair",
    "build_constant_shift", "build_general_pair", "build_translational",
    "free_motion_partners_2d", "free_motion_partners_3d", "solve_riccati_2d",
]

__version__ = "0.1.0"
