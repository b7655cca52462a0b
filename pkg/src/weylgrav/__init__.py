"""Actively controlled mechanical lattice emulating a tilted Weyl cone.

The library builds the spring and feedback-gain network, computes its band
structure, integrates classical and tight-binding quantum dynamics, and runs
two curved-spacetime experiments: lensing past a funnel tilt and tunneling
through a tanh horizon.
"""

__version__ = "0.1.0"

from .lattice import LatticeSpec, FieldState, LatticeModel, build_lattice, bloch_matrices  # noqa: E402
from .potentials import PotentialField, funnel, tanh_interface, uniform_field, zero_field  # noqa: E402
from .spectra import BlochPencil, quadratic_eigensolve, cone_params, crossing_frequency  # noqa: E402

__all__ = [
    "__version__",
    "LatticeSpec",
    "FieldState",
    "LatticeModel",
    "build_lattice",
    "bloch_matrices",
    "PotentialField",
    "funnel",
    "tanh_interface",
    "uniform_field",
    "zero_field",
    "BlochPencil",
    "quadratic_eigensolve",
    "cone_params",
    "crossing_frequency",
]
