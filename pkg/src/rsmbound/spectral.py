"""Spectral operator calculus on the Theta*Pi eigenbasis.

Everything here revolves around the one-parameter matrix group

    K(lam) = exp(i * lam * Theta @ Pi)

whose spectrum is real-exponential because Theta*Pi is similar to the real
skew-symmetric matrix sqrt(Pi) Theta sqrt(Pi).  The averaging operator

    K_op(P) = int_{-1/2}^{1/2} K(lam) P K(lam)^T dlam

and its inverse/adjoint have closed Hadamard-product forms in that
eigenbasis, which is the production path; direct quadrature of the defining
integrals is kept around as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import gauss_legendre

GAMMA_HERMITICITY_TOL = 1e-6


class SpectralError(ValueError):
    """Inputs outside the admissible cone (Pi not PD, Theta singular...)."""


def _sinhc_half(x):
    """2*sinh(x/2)/x, the integral of exp(x*lam) over [-1/2, 1/2].

    Entrywise on arrays; removable singularity at 0 handled by the even
    Taylor series 1 + x^2/24 + x^4/1920 below |x| = 1e-8.
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    out = 2.0 * np.sinh(safe / 2.0) / safe
    series = 1.0 + x**2 / 24.0 + x**4 / 1920.0
    return np.where(small, series, out)


@dataclass(frozen=True)
class SpectralFactorization:
    """Eigen-data of Theta*Pi.

    The exponents a_j are real, sorted descending, and come in +/- pairs;
    the eigenvalue of Theta*Pi attached to a_j is -i*a_j, so that
    K(lam) = psi @ diag(exp(a_j*lam)) @ psi_inv.
    """

    theta: np.ndarray
    pi: np.ndarray
    psi: np.ndarray
    psi_inv: np.ndarray
    exponents: np.ndarray
    s_matrix: np.ndarray
    s_recip: np.ndarray

    @property
    def n(self):
        return self.exponents.shape[0]


def pair_integral_matrix(exponents):
    """S with s_jk = int_{-1/2}^{1/2} exp((a_j + a_k) lam) dlam; all entries > 0."""
    a = np.asarray(exponents, dtype=float)
    return _sinhc_half(a[:, None] + a[None, :])


def spectral_factorize(theta, pi):
    """Factorize Theta*Pi through the stable symmetrized route.

    Eigendecomposes sqrt(Pi) Theta sqrt(Pi) (real skew-symmetric, hence
    normal) and maps the eigenvectors back through Pi^{-1/2}.
    """
    theta = np.asarray(theta, dtype=float)
    pi = np.asarray(pi, dtype=float)
    n = theta.shape[0]
    if pi.shape != (n, n):
        raise SpectralError(f"pi has shape {pi.shape}, expected {(n, n)}")
    pi = 0.5 * (pi + pi.T)

    w, q = np.linalg.eigh(pi)
    if w.min() <= 0.0:
        raise SpectralError(f"pi not positive definite (min eigenvalue {w.min():.3e})")
    sq = (q * np.sqrt(w)) @ q.T
    isq = (q / np.sqrt(w)) @ q.T

    skew = sq @ theta @ sq
    skew = 0.5 * (skew - skew.T)
    # i*skew is Hermitian; its eigenvalues are the exponents a_j and
    # skew u_j = -i a_j u_j, hence (Theta Pi)(isq u_j) = -i a_j (isq u_j).
    evals, u = np.linalg.eigh(1j * skew)
    if np.min(np.abs(evals)) <= 1e-12 * max(np.max(np.abs(evals)), 1.0):
        raise SpectralError("theta singular: Theta*Pi has (near-)zero eigenvalue")

    order = np.argsort(-evals, kind="stable")
    a = evals[order]
    psi = isq @ u[:, order]
    psi_inv = u[:, order].conj().T @ sq

    s = pair_integral_matrix(a)
    for arr in (psi, psi_inv, a, s):
        arr.setflags(write=False)
    return SpectralFactorization(theta=theta, pi=pi, psi=psi, psi_inv=psi_inv,
                                 exponents=a, s_matrix=s, s_recip=1.0 / s)


def k_lambda(fact, lam):
    """The matrix exponential K(lam) = exp(i*lam*Theta*Pi)."""
    return (fact.psi * np.exp(fact.exponents * lam)) @ fact.psi_inv


def s_matrix(fact):
    """Pairwise exponential-average matrix S of the factorization."""
    return fact.s_matrix


def apply_K(fact, p):
    """K_op(P) = int K(lam) P K(lam)^T dlam via the Hadamard representation."""
    p = np.asarray(p, dtype=complex)
    return fact.psi @ (fact.s_matrix * (fact.psi_inv @ p @ fact.psi_inv.T)) @ fact.psi.T


def apply_K_inverse(fact, p):
    """Inverse of apply_K; same sandwich with the entrywise reciprocal of S."""
    p = np.asarray(p, dtype=complex)
    return fact.psi @ (fact.s_recip * (fact.psi_inv @ p @ fact.psi_inv.T)) @ fact.psi.T


def apply_K_inv_adjoint(fact, p):
    """Adjoint of apply_K_inverse in the Frobenius inner product <P,Q> = tr(P* Q)."""
    p = np.asarray(p, dtype=complex)
    psi_c = fact.psi.conj()
    inner = fact.psi.conj().T @ p @ psi_c
    return fact.psi_inv.conj().T @ (fact.s_recip * inner) @ fact.psi_inv.conj()


def apply_K_quadrature(fact, p, nodes=64):
    """Direct quadrature of int K(lam) P K(lam)^T dlam (cross-check path)."""
    p = np.asarray(p, dtype=complex)
    x, w = gauss_legendre(-0.5, 0.5, nodes)
    out = np.zeros_like(p, dtype=complex)
    for lam, wi in zip(x, w):
        k = k_lambda(fact, lam)
        out += wi * (k @ p @ k.T)
    return out


def apply_K_kernel(fact):
    """Scalar kernel W[a,b,j,l] with K_op(P)_ab = sum_jl W[a,b,j,l] P_jl.

    Used to push the averaging operator through matrices whose entries are
    themselves operators (entrywise application).
    """
    return np.einsum("ac,cd,cj,dl,bd->abjl", fact.psi, fact.s_matrix,
                     fact.psi_inv, fact.psi_inv, fact.psi)


def gamma_matrix(fact, b_matrix, omega, m_matrix):
    """Ito-correction matrix Gamma in closed form on the eigenbasis.

    Gamma = i * int K(lam)^T Q0 (K(lam) - K(-1/2)) dlam with
    Q0 = Pi B Omega M.  The K^T..K part is a Hadamard sandwich; the
    rank-one-in-lambda part uses the scalar integrals int d_j(lam) dlam.
    """
    b_matrix = np.asarray(b_matrix, dtype=float)
    m_matrix = np.asarray(m_matrix, dtype=float)
    omega = np.asarray(omega, dtype=complex)
    n = fact.n
    if b_matrix.shape[0] != n or m_matrix.shape[1] != n:
        raise SpectralError("b/m dimensions inconsistent with the factorization")
    q0 = fact.pi @ b_matrix @ omega @ m_matrix
    first = fact.psi_inv.T @ (fact.s_matrix * (fact.psi.T @ q0 @ fact.psi)) @ fact.psi_inv
    d_int = _sinhc_half(fact.exponents)
    int_kt = fact.psi_inv.T @ (d_int[:, None] * fact.psi.T)
    second = int_kt @ q0 @ k_lambda(fact, -0.5)
    return 1j * (first - second)


def gamma_matrix_quadrature(fact, b_matrix, omega, m_matrix, nodes=64):
    """Gamma by direct Gauss-Legendre quadrature (cross-check path)."""
    q0 = fact.pi @ np.asarray(b_matrix, dtype=float) @ np.asarray(omega, dtype=complex) \
        @ np.asarray(m_matrix, dtype=float)
    k_half = k_lambda(fact, -0.5)
    x, w = gauss_legendre(-0.5, 0.5, nodes)
    out = np.zeros((fact.n, fact.n), dtype=complex)
    for lam, wi in zip(x, w):
        k = k_lambda(fact, lam)
        out += wi * (k.T @ q0 @ (k - k_half))
    return 1j * out


def hermiticity_residual(a):
    nrm = np.linalg.norm(a)
    if nrm == 0.0:
        return 0.0
    return float(np.linalg.norm(a - a.conj().T) / nrm)


@dataclass(frozen=True)
class DriftCorrection:
    """Gamma together with Y = Re and U = Im of the adjoint-inverse image of its conjugate."""

    gamma: np.ndarray
    y_matrix: np.ndarray
    u_matrix: np.ndarray
    gamma_hermiticity: float
    y_symmetry: float
    u_antisymmetry: float


def drift_correction(fact, gamma):
    """Y and U entering the characteristic ODE and the moment growth exponent.

    Gamma Hermiticity is measured, never forced; a residual above the
    tolerance signals a fault in the upstream computation.
    """
    gamma = np.asarray(gamma, dtype=complex)
    herm = hermiticity_residual(gamma)
    if herm > GAMMA_HERMITICITY_TOL:
        raise SpectralError(f"gamma Hermiticity residual {herm:.3e} exceeds "
                            f"{GAMMA_HERMITICITY_TOL:.0e}; upstream computation fault")
    img = apply_K_inv_adjoint(fact, gamma.conj())
    y = img.real.copy()
    u = img.imag.copy()
    y_res = float(np.linalg.norm(y - y.T) / max(np.linalg.norm(y), 1e-300))
    u_res = float(np.linalg.norm(u + u.T) / max(np.linalg.norm(u), 1e-300))
    y = 0.5 * (y + y.T)
    u = 0.5 * (u - u.T)
    if np.linalg.norm(gamma) == 0.0:
        y_res = u_res = 0.0
    return DriftCorrection(gamma=gamma, y_matrix=y, u_matrix=u,
                           gamma_hermiticity=herm, y_symmetry=y_res,
                           u_antisymmetry=u_res)
