"""Brute-force verification engine on a truncated Fock space.

Represents the system variables as finite matrices built from per-mode
ladder operators, evolves density matrices under the predual master
equation, and evaluates every object of the exponential-moment calculus
(rate process, N matrix, perturbation operator matrices) by direct operator
arithmetic and quadrature.  Truncation error lives at the top Fock levels,
so all verification statements are restricted to a low-energy projector
where the commutation relations are exact.

Predual master equation (derived once from the Heisenberg generator by
duality under tr(rho * .), with coupling vector h = M X and Ito matrix
Omega = (omega_jk)):

    drho/dt = -i[H, rho]
              + sum_jk omega_jk (h_k rho h_j - (rho h_j h_k + h_j h_k rho)/2)

Correctness is enforced by the mean/covariance checks in the test suite
rather than trusted derivation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from . import spectral
from .dynamics import tau as tau_scalar
from .quadrature import gauss_legendre

LOW_ENERGY_FRACTION = 0.6
EXP_ARG_LIMIT = 700.0  # beyond this exp() overflows in double precision


class OracleError(ValueError):
    """Truncated-space construction or evaluation failure."""


def _hermitize(a):
    return 0.5 * (a + a.conj().T)


def hermiticity_residual(a):
    nrm = np.linalg.norm(a)
    if nrm == 0.0:
        return 0.0
    return float(np.linalg.norm(a - a.conj().T) / nrm)


@dataclass(frozen=True)
class TruncatedSpace:
    """Finite-dimensional representation of the system variables."""

    n_modes: int
    cutoff: int
    dim: int
    x_ops: np.ndarray          # (n, dim, dim), Hermitian
    theta: np.ndarray
    ccr_defect: float          # CCR residual on the sub-edge projector
    occupations: np.ndarray    # (dim, n_modes) per-basis-state mode levels

    @property
    def n(self):
        return 2 * self.n_modes


def _skew_congruence_factor(theta):
    """Real L with L Theta_std L^T = theta, Theta_std = blkdiag([[0,1],[-1,0]])."""
    n = theta.shape[0]
    t_quasi, z = sla.schur(theta, output="real")
    # normalize each 2x2 block to [[0, b], [-b, 0]] with b > 0
    for k in range(0, n, 2):
        b = t_quasi[k, k + 1]
        if abs(b) < 1e-12:
            raise OracleError("theta singular: cannot build CCR representation")
        if b < 0:
            z[:, [k, k + 1]] = z[:, [k + 1, k]]
            t_quasi[k, k + 1] = -b
    scale = np.repeat(np.sqrt([t_quasi[k, k + 1] for k in range(0, n, 2)]), 2)
    return z * scale


def build_space(n_modes, cutoff, theta):
    """Build ladder-operator representations of X with [X, X^T] = i*theta.

    Canonical pairs q = (a + a^dag)/sqrt(2), p = i(a^dag - a)/sqrt(2) per
    mode are mapped through the congruence taking the standard CCR matrix
    to theta.  Truncation breaks the CCR only at the top level of each
    mode; the recorded defect is measured below that edge.
    """
    if cutoff < 2:
        raise OracleError("cutoff must be at least 2")
    n = 2 * n_modes
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n, n):
        raise OracleError(f"theta has shape {theta.shape}, expected {(n, n)}")
    if n % 2 != 0 or np.linalg.norm(theta + theta.T) > 1e-12 * max(np.linalg.norm(theta), 1.0):
        raise OracleError("theta must be even-dimensional and antisymmetric")

    a = np.diag(np.sqrt(np.arange(1, cutoff)), k=1)
    q1 = (a + a.T) / np.sqrt(2.0)
    p1 = 1j * (a.T - a) / np.sqrt(2.0)
    dim = cutoff**n_modes

    std_ops = np.zeros((n, dim, dim), dtype=complex)
    for mode in range(n_modes):
        left = np.eye(cutoff**mode)
        right = np.eye(cutoff ** (n_modes - mode - 1))
        std_ops[2 * mode] = np.kron(np.kron(left, q1), right)
        std_ops[2 * mode + 1] = np.kron(np.kron(left, p1), right)

    lmat = _skew_congruence_factor(theta)
    x_ops = np.einsum("ij,jab->iab", lmat, std_ops)

    occ = np.zeros((dim, n_modes), dtype=int)
    for idx in range(dim):
        rem = idx
        for mode in reversed(range(n_modes)):
            occ[idx, mode] = rem % cutoff
            rem //= cutoff

    # projector excluding the top Fock level of every mode
    keep = np.all(occ <= cutoff - 2, axis=1)
    defect = 0.0
    eye = np.eye(dim)
    for j in range(n):
        for k in range(j + 1, n):
            comm = x_ops[j] @ x_ops[k] - x_ops[k] @ x_ops[j] - 1j * theta[j, k] * eye
            defect = max(defect, float(np.linalg.norm(comm[np.ix_(keep, keep)])))

    x_ops.setflags(write=False)
    occ.setflags(write=False)
    return TruncatedSpace(n_modes=n_modes, cutoff=cutoff, dim=dim, x_ops=x_ops,
                          theta=theta, ccr_defect=defect, occupations=occ)


def low_energy_mask(space, fraction=LOW_ENERGY_FRACTION):
    """Basis states with every mode below the given fraction of the cutoff."""
    level = max(int(np.floor(fraction * space.cutoff)), 1)
    return np.all(space.occupations < level, axis=1)


def restrict(op, mask):
    return op[np.ix_(mask, mask)]


def vacuum_state(space):
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def fock_state(space, levels):
    """Pure product number state |levels[0], levels[1], ...>."""
    levels = np.atleast_1d(levels)
    idx = 0
    for mode in range(space.n_modes):
        idx = idx * space.cutoff + int(levels[mode])
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    rho[idx, idx] = 1.0
    return rho


def state_diagnostics(rho):
    """(hermiticity residual, trace deviation, most-negative eigenvalue)."""
    herm = hermiticity_residual(rho)
    tr_dev = abs(float(np.trace(rho).real) - 1.0)
    min_eig = float(np.linalg.eigvalsh(_hermitize(rho)).min())
    return herm, tr_dev, min_eig


def quadratic_form(space, pi):
    """The operator X^T Pi X / 2 as a Hermitian matrix."""
    pi = np.asarray(pi, dtype=float)
    op = 0.5 * np.einsum("jk,jab,kbc->ac", pi, space.x_ops, space.x_ops)
    return _hermitize(op)


def linear_combination(space, coeffs):
    """The operator sum_j coeffs[j] X_j (complex coefficients allowed)."""
    return np.einsum("j,jab->ab", np.asarray(coeffs, dtype=complex), space.x_ops)


def build_hamiltonian(space, r_matrix, c_matrix=None, perturbations=()):
    """H = X^T R X / 2 + sum_k phi_k(c_k^T X), Hermitian by construction."""
    h = quadratic_form(space, r_matrix)
    if c_matrix is None:
        c_matrix = np.zeros((space.n, 0))
    c_matrix = np.asarray(c_matrix, dtype=float)
    for k, pert in enumerate(perturbations):
        y_op = _hermitize(linear_combination(space, c_matrix[:, k]))
        evals, u = np.linalg.eigh(y_op)
        h = h + (u * pert.phi(evals)) @ u.conj().T
    return _hermitize(h)


def evolve_state(space, spec, derived, rho0, t_grid, rtol=1e-9, atol=1e-11):
    """Integrate the predual master equation; returns a density matrix per grid point."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0.0):
        raise OracleError("t_grid must increase from 0")
    herm, tr_dev, min_eig = state_diagnostics(rho0)
    if herm > 1e-10 or tr_dev > 1e-10 or min_eig < -1e-10:
        raise OracleError("rho0 is not a valid density matrix")

    h_op = build_hamiltonian(space, spec.r_matrix, spec.c_matrix, spec.perturbations)
    omega = spec.omega
    m_count = spec.n_fields
    coup = [linear_combination(space, spec.m_matrix[j]) for j in range(m_count)]
    k0 = 0.5 * sum(omega[j, k] * coup[j] @ coup[k]
                   for j in range(m_count) for k in range(m_count))

    dim = space.dim

    def rhs(_t, y):
        rho = y.reshape(dim, dim)
        out = -1j * (h_op @ rho - rho @ h_op)
        out -= k0 @ rho + rho @ k0
        for j in range(m_count):
            for k in range(m_count):
                if omega[j, k] != 0.0:
                    out += omega[j, k] * (coup[k] @ rho @ coup[j])
        return out.ravel()

    sol = solve_ivp(rhs, (0.0, float(t_grid[-1])), np.asarray(rho0, dtype=complex).ravel(),
                    t_eval=t_grid, rtol=rtol, atol=atol, method="DOP853")
    if not sol.success:
        raise OracleError(f"master equation integration failed: {sol.message}")
    return [sol.y[:, i].reshape(dim, dim) for i in range(t_grid.size)]


def rsm(space, rho, pi):
    """Risk-sensitive moment tr(rho * exp(X^T Pi X / 2))."""
    xi_op = quadratic_form(space, pi)
    evals, u = np.linalg.eigh(xi_op)
    if evals.max() > EXP_ARG_LIMIT:
        raise OracleError("RSM numerically divergent at this truncation")
    weights = np.einsum("ai,ab,bi->i", u.conj(), rho, u)
    val = complex(np.sum(weights * np.exp(evals)))
    if abs(val.imag) > 1e-8 * max(abs(val.real), 1.0):
        raise OracleError(f"RSM has spurious imaginary part {val.imag:.3e}")
    return float(val.real)


class ExponentialConjugation:
    """Applies eta -> exp(-lam*xi) eta exp(lam*xi) through the eigenbasis of xi.

    Works in the eigenbasis with the difference matrix exp(lam*(w_k - w_j)),
    which avoids overflow as long as lam times the spectral spread of xi
    stays within range.
    """

    def __init__(self, xi_op):
        self.evals, self.u = np.linalg.eigh(_hermitize(xi_op))
        self.spread = float(self.evals.max() - self.evals.min())

    def apply(self, lam, eta):
        if abs(lam) * self.spread > EXP_ARG_LIMIT:
            raise OracleError("conjugation parameter too large for this operator")
        inner = self.u.conj().T @ eta @ self.u
        scaled = inner * np.exp(lam * (self.evals[None, :] - self.evals[:, None]))
        return self.u @ scaled @ self.u.conj().T

    def exp_half(self):
        """exp(xi/2) as a matrix."""
        if 0.5 * abs(self.evals).max() > EXP_ARG_LIMIT:
            raise OracleError("exp(xi/2) overflows at this truncation")
        return (self.u * np.exp(0.5 * self.evals)) @ self.u.conj().T


def superop_E(xi_op, lam, eta):
    """One-off similarity transform exp(-lam*xi) eta exp(lam*xi)."""
    return ExponentialConjugation(xi_op).apply(lam, eta)


def xi_drift_dispersion(space, spec, derived, pi):
    """Drift f, dispersion vector g and scalar tau for xi = X^T Pi X / 2.

    f = tau*I + X^T(A^T Pi + Pi A)X/2 + sum_jk (Pi Theta C)_jk {X_j, Z_k}/2
    with Z_k = phi_k'(c_k^T X), and g_j = (B^T Pi X)_j.
    """
    pi = np.asarray(pi, dtype=float)
    tau_const = tau_scalar(derived.b_matrix, derived.v_matrix, pi)
    apm = derived.a_matrix.T @ pi + pi @ derived.a_matrix
    f = tau_const * np.eye(space.dim, dtype=complex)
    f = f + 0.5 * np.einsum("jk,jab,kbc->ac", 0.5 * (apm + apm.T), space.x_ops, space.x_ops)

    if spec.perturbations:
        ptc = pi @ spec.theta @ spec.c_matrix
        for k, pert in enumerate(spec.perturbations):
            y_op = _hermitize(linear_combination(space, spec.c_matrix[:, k]))
            evals, u = np.linalg.eigh(y_op)
            z_op = (u * pert.dphi(evals)) @ u.conj().T
            for j in range(space.n):
                if ptc[j, k] != 0.0:
                    f = f + 0.5 * ptc[j, k] * (space.x_ops[j] @ z_op + z_op @ space.x_ops[j])
    f = _hermitize(f)

    btp = derived.b_matrix.T @ pi
    g = [_hermitize(linear_combination(space, btp[j])) for j in range(spec.n_fields)]
    return f, g, tau_const


@dataclass(frozen=True)
class RateProcessResult:
    """Rate process alpha and noise coefficient vector beta with self-adjointness data."""

    alpha: np.ndarray
    beta: list
    alpha_residual: float
    beta_residual: float
    outer_nodes: int
    inner_nodes: int


def rate_process(space, xi_op, f, g, omega, outer_nodes=32, inner_nodes=32):
    """alpha and beta by nested Gauss-Legendre quadrature.

    alpha = int_{-1/2}^{1/2} (E_lam(f)
            + E_lam(g)^T Omega int_{-1/2}^{lam} E_mu(g) dmu) dlam,
    beta  = int_{-1/2}^{1/2} E_lam(g) dlam.
    """
    if outer_nodes < 16 or inner_nodes < 16:
        raise OracleError("need at least 16 quadrature nodes")
    omega = np.asarray(omega, dtype=complex)
    conj = ExponentialConjugation(xi_op)
    m_count = len(g)
    dim = space.dim
    xl, wl = gauss_legendre(-0.5, 0.5, outer_nodes)
    alpha = np.zeros((dim, dim), dtype=complex)
    beta = [np.zeros((dim, dim), dtype=complex) for _ in range(m_count)]
    for lam, w in zip(xl, wl):
        alpha += w * conj.apply(lam, f)
        e_g = [conj.apply(lam, gj) for gj in g]
        for j in range(m_count):
            beta[j] += w * e_g[j]
        xm, wm = gauss_legendre(-0.5, lam, inner_nodes)
        inner = [np.zeros((dim, dim), dtype=complex) for _ in range(m_count)]
        for mu, wmu in zip(xm, wm):
            for k in range(m_count):
                inner[k] += wmu * conj.apply(mu, g[k])
        for j in range(m_count):
            for k in range(m_count):
                if omega[j, k] != 0.0:
                    alpha += w * omega[j, k] * (e_g[j] @ inner[k])
    a_res = hermiticity_residual(alpha)
    b_res = max((hermiticity_residual(b) for b in beta), default=0.0)
    return RateProcessResult(alpha=alpha, beta=beta, alpha_residual=a_res,
                             beta_residual=b_res, outer_nodes=outer_nodes,
                             inner_nodes=inner_nodes)


def ito_correction_operator(space, xi_op, g, omega, outer_nodes=32, inner_nodes=32):
    """The operator int E_lam(g)^T Omega int_{-1/2}^lam E_mu(g) dmu dlam alone."""
    zero = np.zeros((space.dim, space.dim), dtype=complex)
    res = rate_process(space, xi_op, zero, g, omega, outer_nodes, inner_nodes)
    return res.alpha


def matrix_N(space, rho, pi, nodes=32):
    """N_jk = tr(rho exp(xi/2) int E_lam(X_j X_k) dlam exp(xi/2))."""
    xi_op = quadratic_form(space, pi)
    conj = ExponentialConjugation(xi_op)
    e_half = conj.exp_half()
    n = space.n
    xl, wl = gauss_legendre(-0.5, 0.5, nodes)
    acc = np.zeros((n, n, space.dim, space.dim), dtype=complex)
    for lam, w in zip(xl, wl):
        e_x = np.stack([conj.apply(lam, space.x_ops[j]) for j in range(n)])
        acc += w * np.einsum("jab,kbc->jkac", e_x, e_x)
    sandwich = e_half @ rho @ e_half
    return np.einsum("jkac,ca->jk", acc, sandwich)


def rsm_pi_gradient_fd(space, rho, pi, step=1e-4):
    """Central finite-difference gradient of the RSM in the symmetric Pi entries."""
    pi = np.asarray(pi, dtype=float)
    n = pi.shape[0]
    grad = np.zeros((n, n))
    for j in range(n):
        for k in range(j, n):
            d = np.zeros((n, n))
            d[j, k] += 0.5
            d[k, j] += 0.5
            plus = rsm(space, rho, pi + step * d)
            minus = rsm(space, rho, pi - step * d)
            grad[j, k] = grad[k, j] = (plus - minus) / (2.0 * step)
    return grad


def k_of_xxt(space, fact, nodes=None):
    """The operator matrix K_op(X X^T), entrywise (K X)_j (K X)_k averaged.

    Closed form through the spectral kernel by default; pass a node count
    for the independent quadrature route.
    """
    n = space.n
    if nodes is None:
        xx = np.einsum("jab,kbc->jkac", space.x_ops, space.x_ops)
        kernel = spectral.apply_K_kernel(fact)
        return np.einsum("abjl,jlxy->abxy", kernel, xx)
    xl, wl = gauss_legendre(-0.5, 0.5, nodes)
    out = np.zeros((n, n, space.dim, space.dim), dtype=complex)
    for lam, w in zip(xl, wl):
        kx = np.einsum("jl,lab->jab", spectral.k_lambda(fact, lam), space.x_ops)
        out += w * np.einsum("jab,kbc->jkac", kx, kx)
    return out


def perturbation_T(space, spec, derived, pi, nodes=32):
    """Q and T operator matrices of the perturbation channel.

    Q_kj = int phi_k'(c_k^T K_lam X) (K_lam X)_j dlam, evaluated with the
    scalar derivative applied analytically to the (generally non-Hermitian)
    matrix argument; T = Theta C Q - Q^dag C^T Theta.
    """
    pi = np.asarray(pi, dtype=float)
    n, s = space.n, len(spec.perturbations)
    dim = space.dim
    q_ops = np.zeros((s, n, dim, dim), dtype=complex)
    if s:
        fact = spectral.spectral_factorize(spec.theta, pi)
        xl, wl = gauss_legendre(-0.5, 0.5, nodes)
        for lam, w in zip(xl, wl):
            k_mat = spectral.k_lambda(fact, lam)
            kx = np.einsum("jl,lab->jab", k_mat, space.x_ops)
            for k, pert in enumerate(spec.perturbations):
                arg = linear_combination(space, spec.c_matrix[:, k] @ k_mat)
                z_lam = pert.dphi_matrix(arg)
                for j in range(n):
                    q_ops[k, j] += w * (z_lam @ kx[j])

    tc = spec.theta @ spec.c_matrix          # (n, s)
    t_ops = np.zeros((n, n, dim, dim), dtype=complex)
    for a in range(n):
        for b in range(n):
            acc = np.zeros((dim, dim), dtype=complex)
            for k in range(s):
                acc += tc[a, k] * q_ops[k, b]
                acc += tc[b, k] * q_ops[k, a].conj().T
            t_ops[a, b] = acc
    return q_ops, t_ops


def opmatrix_adjoint_residual(l_ops):
    """Residual of L^dag = L for a matrix of operators (entrywise adjoint + transpose)."""
    adj = np.einsum("abxy->bayx", l_ops.conj())
    nrm = np.linalg.norm(l_ops)
    if nrm == 0.0:
        return 0.0
    return float(np.linalg.norm(l_ops - adj) / nrm)


def superpositivity_margin(space, t_ops, k_xxt, sigma, n_samples=200, seed=0,
                           fraction=LOW_ENERGY_FRACTION):
    """Sampled lower bound of u*(sigma*K_op(XX^T) - T)u over unit vectors u.

    Returns the minimum eigenvalue over the samples, restricted to the
    low-energy subspace.  A nonnegative margin certifies the superpositive
    ordering on the sample set only (necessary-condition sampling).
    """
    rng = np.random.default_rng(seed)
    mask = low_energy_mask(space, fraction)
    diff = sigma * k_xxt - t_ops
    n = space.n
    margin = np.inf
    for _ in range(int(n_samples)):
        u = rng.normal(size=n) + 1j * rng.normal(size=n)
        u /= np.linalg.norm(u)
        op = np.einsum("j,jkxy,k->xy", u.conj(), diff, u)
        op = restrict(_hermitize(op), mask)
        margin = min(margin, float(np.linalg.eigvalsh(op).min()))
    return margin


def smallest_admissible_sigma(space, t_ops, k_xxt, n_samples=200, seed=0,
                              tol=1e-8, sigma_max=16.0):
    """Smallest sigma on a bisection grid with sampled margin >= -tol."""
    def ok(sig):
        return superpositivity_margin(space, t_ops, k_xxt, sig,
                                      n_samples=n_samples, seed=seed) >= -tol
    if ok(0.0):
        return 0.0
    lo, hi = 0.0, sigma_max
    if not ok(hi):
        raise OracleError(f"no admissible sigma below {sigma_max}")
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def second_moments(space, rho):
    """Re E(X X^T) under the given state."""
    vals = np.einsum("jab,kbc,ca->jk", space.x_ops, space.x_ops, rho)
    return vals.real


def xi_moments(space, rho, pi, r_max=4):
    """E(xi^r) for r = 1..r_max with xi = X^T Pi X / 2."""
    xi_op = quadratic_form(space, pi)
    out = []
    power = np.eye(space.dim, dtype=complex)
    for _ in range(r_max):
        power = power @ xi_op
        out.append(float(np.trace(rho @ power).real))
    return out
