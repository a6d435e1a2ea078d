"""Caustic-arc quantization for two-dimensional integrable Hamiltonians."""
from .kernels import BACKEND
from .model import (BARBANIS, HamiltonianModel, equipotential_point, gradient, hessian,
                    load_model, potential, separable_spectrum)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BARBANIS", "HamiltonianModel", "equipotential_point", "gradient",
    "hessian", "load_model", "potential", "separable_spectrum",
]
