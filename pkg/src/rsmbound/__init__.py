"""Risk-sensitive moment bounds for open quantum harmonic oscillators.

Computes guaranteed upper bounds on the exponential quadratic moment
E exp(X^T Pi X / 2) of a linear quantum stochastic system whose Hamiltonian
carries scalar nonlinear perturbation channels, and cross-checks every step
of the calculus against a brute-force truncated-Fock-space oracle.
"""

from .dynamics import (CharacteristicTrajectory, DynamicsError,
                       exponent_terms, gronwall_bound,
                       integrate_characteristic, small_pi_expansion, tau,
                       write_trajectory_csv)
from .model import (ConditionReport, ConfigError, DerivedMatrices,
                    Perturbation, SystemSpec, derive_structure,
                    ito_decompose, load_system, validate_conditions)
from .spectral import (DriftCorrection, SpectralError, SpectralFactorization,
                       apply_K, apply_K_inv_adjoint, apply_K_inverse,
                       drift_correction, gamma_matrix, k_lambda,
                       spectral_factorize)
from .verification import CheckResult, VerificationError, run_suite

__version__ = "0.1.0"

__all__ = [
    "CharacteristicTrajectory", "CheckResult", "ConditionReport",
    "ConfigError", "DerivedMatrices", "DriftCorrection", "DynamicsError",
    "Perturbation", "SpectralError", "SpectralFactorization", "SystemSpec",
    "VerificationError", "apply_K", "apply_K_inv_adjoint", "apply_K_inverse",
    "derive_structure", "drift_correction", "exponent_terms", "gamma_matrix",
    "gronwall_bound", "integrate_characteristic", "ito_decompose",
    "k_lambda", "load_system", "run_suite", "small_pi_expansion",
    "spectral_factorize", "tau", "validate_conditions",
    "write_trajectory_csv",
]
