"""Rovibrational quantum-selected configuration interaction on a classical simulator.

Modules
-------
molecule    model file loading, validation and derived frame quantities
operators   ladder, angular-momentum and asymmetric-top kernels
watson      Watson Hamiltonian in the direct-product basis
pauli       binary qubit encoding and Pauli decomposition
trotter     Trotterized statevector evolution and sampling
qsci        basis selection, subspace solves and reference combination
baselines   perturbation theory, greedy and random bases
cli         command-line entry point
"""

__version__ = "0.1.0"

from .molecule import DerivedFrame, MoleculeModel, derive_frame, load_model
from .watson import RovibBasis, RovibBasisState, TermGroup, WatsonHamiltonian

__all__ = [
    "DerivedFrame",
    "MoleculeModel",
    "RovibBasis",
    "RovibBasisState",
    "TermGroup",
    "WatsonHamiltonian",
    "derive_frame",
    "load_model",
]
