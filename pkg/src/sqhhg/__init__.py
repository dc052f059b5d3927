"""Quantum state of high harmonics driven by squeezed light.

Modules
-------
phase_space
    Gaussian pump quasi-probabilities, samplers and quadrature moments.
trajectories
    Classical three-step trajectories and the cutoff law.
sfa_response
    Strong-field dipole, spectral dipole and the response ``chi_q(alpha)``.
harmonic_map
    Jacobian pushforward of pump distributions and positive-P Monte Carlo.
squeezing
    Linearized quadrature variance and phase-sensitivity coefficients.
cli
    Configuration-driven command line front end.
"""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
