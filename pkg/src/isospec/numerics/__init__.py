"""Grids, finite-difference operators, eigensolver and residual verifiers."""

from .eigen import Grid1D, Spectrum, solve_1d_eigen
from .spectra import partner_spectrum_check, separated_2d_solve
from .stencil import (GaussianBump, convergence_study, intertwining_residual, ladder_check,
                      symmetry_residual)

__all__ = ["Grid1D", "Spectrum", "solve_1d_eigen", "partner_spectrum_check",
           "separated_2d_solve", "GaussianBump", "convergence_study",
           "intertwining_residual", "ladder_check", "symmetry_residual"]
