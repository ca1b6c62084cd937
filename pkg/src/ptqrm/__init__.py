"""Numerical lab for the PT-symmetric quantum Rabi model.

Exact Fock-truncated spectra, the adiabatic-approximation solution,
exceptional- and Juddian-point searches, non-Hermitian dynamics and a
three-level master-equation cross-check.
"""

__version__ = "0.1.0"

from .errors import DimensionError, IntegrationError, PTQRMError, SearchError, SolverError
from .model import ModelParams, Representation, build_hamiltonian, build_parity

__all__ = [
    "__version__", "ModelParams", "Representation", "build_hamiltonian", "build_parity",
    "PTQRMError", "DimensionError", "SolverError", "SearchError", "IntegrationError",
]
