"""Gaussian moment dynamics of a damped harmonic oscillator.

The dynamics is generated by a seven-element algebra of bilinear
superoperators (three unitary, four dissipative).  Gaussian first and second
moments transform in closed form under every generator, and quadratic
master equations reduce to three scalar rate equations in the interaction
picture.  A truncated Fock-space density-matrix propagator serves as a
brute-force cross-check.

Modules
-------
moments      Gaussian moments and the single-generator maps
generators   coefficient sets, coupling matrix and its eigensystem
evolution    rate equations, interaction picture and trajectories
master       KL, CL and HPZ presets with closed forms and long-time limits
fock         truncated Fock-space superoperators and density matrices
validation   checks of the closed forms against independent routes
cli          command-line front end
"""

from .evolution import GCoefficients, IntegrationError, Trajectory, evolve
from .fock import TruncationConfig, TruncationError, TruncationLeakError
from .generators import (DissipativeCoefficients, RegimeError, UnitaryCoefficients,
                         build_coupling_matrix, eigensystem, eta_bar)
from .master import (EquationKind, MasterEquationSpec, delta_longtime, evolve_preset,
                     g_closed, positivity_check, preset_coefficients)
from .moments import (GaussianMoments, Generator, apply_generator, check_physical,
                      generalized_uncertainty)

__version__ = "0.1.0"

__all__ = [
    "GaussianMoments",
    "Generator",
    "apply_generator",
    "check_physical",
    "generalized_uncertainty",
    "UnitaryCoefficients",
    "DissipativeCoefficients",
    "RegimeError",
    "build_coupling_matrix",
    "eigensystem",
    "eta_bar",
    "GCoefficients",
    "IntegrationError",
    "Trajectory",
    "evolve",
    "EquationKind",
    "MasterEquationSpec",
    "preset_coefficients",
    "g_closed",
    "delta_longtime",
    "positivity_check",
    "evolve_preset",
    "TruncationConfig",
    "TruncationError",
    "TruncationLeakError",
]
