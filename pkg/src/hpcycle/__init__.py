"""Phase cycling for inversion-pulse dynamical decoupling.

Builds two-step (TPC), complete (CPC) and Hadamard (HPC) phase-cycling
schemes, verifies which coherence-transfer pathway classes they cancel,
simulates noisy decoupling sequences on a single qubit or a detuned
ensemble, and analyses the outcome (apparent T2, scaling exponents,
effective state fidelity).
"""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
