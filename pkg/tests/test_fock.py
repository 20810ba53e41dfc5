"""Truncated-space oracle: construction, evolution, operator calculus."""

import numpy as np
import pytest
import scipy.linalg as sla

from rsmbound import fock, model, spectral
from rsmbound.fock import OracleError

from conftest import THETA2


def test_space_structure(space30):
    assert space30.dim == 30
    assert space30.ccr_defect < 1e-10
    mask = fock.low_energy_mask(space30)
    assert int(mask.sum()) == 18  # levels below floor(0.6 * 30)


def test_space_errors():
    with pytest.raises(OracleError, match="cutoff"):
        fock.build_space(1, 1, THETA2)
    with pytest.raises(OracleError, match="shape"):
        fock.build_space(2, 5, THETA2)
    with pytest.raises(OracleError, match="singular"):
        fock.build_space(1, 5, np.zeros((2, 2)))


def test_general_theta_ccr():
    theta = 2.5 * np.kron(np.eye(2), THETA2)
    space = fock.build_space(2, 6, theta)
    assert space.ccr_defect < 1e-10


def test_nominal_hamiltonian_spectrum(space30):
    h = fock.build_hamiltonian(space30, np.eye(2))
    evals = np.sort(np.linalg.eigvalsh(h))
    # harmonic oscillator levels k + 1/2; the truncated edge injects one
    # spurious eigenvalue near (cutoff - 1)/2, so only the lower half of the
    # ladder is exact
    np.testing.assert_allclose(evals[:14], np.arange(14) + 0.5, atol=1e-12)


def test_states_and_diagnostics(space30):
    rho = fock.vacuum_state(space30)
    herm, tr_dev, min_eig = fock.state_diagnostics(rho)
    assert herm == 0.0 and tr_dev == 0.0 and min_eig >= 0.0
    one = fock.fock_state(space30, [1])
    assert np.trace(one).real == pytest.approx(1.0)


def test_rsm_values(space30):
    rho = fock.vacuum_state(space30)
    assert fock.rsm(space30, rho, np.zeros((2, 2))) == pytest.approx(1.0)
    # xi = 0.2 (n_hat + 1/2) and the vacuum is an eigenstate with n = 0
    assert fock.rsm(space30, rho, 0.2 * np.eye(2)) == pytest.approx(
        np.exp(0.1), abs=1e-12)
    one = fock.fock_state(space30, [1])
    assert fock.rsm(space30, one, 0.2 * np.eye(2)) == pytest.approx(
        np.exp(0.3), abs=1e-12)


def test_rsm_overflow_guard(space30):
    with pytest.raises(OracleError, match="divergent"):
        fock.rsm(space30, fock.vacuum_state(space30), 100.0 * np.eye(2))


def test_conjugation_group_property(space30, pi02):
    xi_op = fock.quadratic_form(space30, pi02)
    conj = fock.ExponentialConjugation(xi_op)
    eta = space30.x_ops[0] @ space30.x_ops[1]
    np.testing.assert_allclose(conj.apply(0.0, eta), eta, atol=1e-14)
    nested = conj.apply(0.2, conj.apply(0.3, eta))
    np.testing.assert_allclose(nested, conj.apply(0.5, eta), atol=1e-10)
    np.testing.assert_allclose(fock.superop_E(xi_op, 0.5, eta),
                               conj.apply(0.5, eta), atol=1e-12)


def test_conjugation_matches_k_matrix(space30, pi02):
    xi_op = fock.quadratic_form(space30, pi02)
    conj = fock.ExponentialConjugation(xi_op)
    fact = spectral.spectral_factorize(THETA2, pi02)
    mask = fock.low_energy_mask(space30)
    for lam in (-0.5, 0.25, 0.5):
        kx = np.einsum("jl,lab->jab", spectral.k_lambda(fact, lam),
                       space30.x_ops)
        for j in range(2):
            diff = fock.restrict(conj.apply(lam, space30.x_ops[j]) - kx[j],
                                 mask)
            assert np.linalg.norm(diff) < 1e-6


def test_conjugation_overflow_guard(space30):
    conj = fock.ExponentialConjugation(fock.quadratic_form(space30,
                                                           50.0 * np.eye(2)))
    with pytest.raises(OracleError, match="too large"):
        conj.apply(2.0, space30.x_ops[0])


def test_stationary_vacuum(uncoupled_spec, space30):
    derived = model.derive_structure(uncoupled_spec)
    rho0 = fock.vacuum_state(space30)
    states = fock.evolve_state(space30, uncoupled_spec, derived, rho0,
                               np.linspace(0.0, 1.0, 5))
    for rho in states:
        assert np.linalg.norm(rho - rho0) < 1e-9


def test_mean_dynamics(base_spec, space30):
    derived = model.derive_structure(base_spec)
    # superposition (|0> + |1>)/sqrt(2) has a nonzero mean vector
    vec = np.zeros(space30.dim, dtype=complex)
    vec[0] = vec[1] = 1.0 / np.sqrt(2.0)
    rho0 = np.outer(vec, vec.conj())
    t_grid = np.array([0.0, 0.5, 1.0])
    states = fock.evolve_state(space30, base_spec, derived, rho0, t_grid)
    mean0 = np.array([np.trace(rho0 @ x).real for x in space30.x_ops])
    for t, rho in zip(t_grid, states):
        mean_t = np.array([np.trace(rho @ x).real for x in space30.x_ops])
        ref = sla.expm(derived.a_matrix * t) @ mean0
        assert np.linalg.norm(mean_t - ref) < 1e-3 * max(np.linalg.norm(ref), 1.0)


def test_covariance_lyapunov(base_spec, space30):
    derived = model.derive_structure(base_spec)
    rho0 = fock.vacuum_state(space30)
    delta = 1e-3
    states = fock.evolve_state(space30, base_spec, derived, rho0,
                               np.array([0.0, 0.5 - delta, 0.5, 0.5 + delta]))
    s_minus = fock.second_moments(space30, states[1])
    s_mid = fock.second_moments(space30, states[2])
    s_plus = fock.second_moments(space30, states[3])
    s_mid = 0.5 * (s_mid + s_mid.T)
    lhs = 0.5 * ((s_plus + s_plus.T) - (s_minus + s_minus.T)) / (2.0 * delta)
    a = derived.a_matrix
    rhs = a @ s_mid + s_mid @ a.T + derived.b_matrix @ derived.v_matrix \
        @ derived.b_matrix.T
    assert np.linalg.norm(lhs - rhs) < 1e-3


def test_drift_dispersion_shapes(base_spec, space30):
    derived = model.derive_structure(base_spec)
    f, g, tau_const = fock.xi_drift_dispersion(space30, base_spec, derived,
                                               np.eye(2))
    assert fock.hermiticity_residual(f) < 1e-10
    # g = B^T Pi X with B = Theta2, Pi = I gives (-X_2, X_1)
    np.testing.assert_allclose(g[0], -space30.x_ops[1], atol=1e-12)
    np.testing.assert_allclose(g[1], space30.x_ops[0], atol=1e-12)
    assert tau_const == pytest.approx(
        0.5 * np.trace(derived.b_matrix @ derived.v_matrix
                       @ derived.b_matrix.T))


def test_rate_process_trivial_and_guard(space30, pi02):
    xi_op = fock.quadratic_form(space30, pi02)
    zero = np.zeros((space30.dim, space30.dim), dtype=complex)
    res = fock.rate_process(space30, xi_op, zero, [zero], np.eye(1),
                            outer_nodes=16, inner_nodes=16)
    assert np.linalg.norm(res.alpha) == 0.0
    assert np.linalg.norm(res.beta[0]) == 0.0
    with pytest.raises(OracleError, match="16 quadrature nodes"):
        fock.rate_process(space30, xi_op, zero, [zero], np.eye(1),
                          outer_nodes=8, inner_nodes=16)


def test_rate_selfadjointness(base_spec, space30, pi02):
    derived = model.derive_structure(base_spec)
    f, g, _ = fock.xi_drift_dispersion(space30, base_spec, derived, pi02)
    xi_op = fock.quadratic_form(space30, pi02)
    res = fock.rate_process(space30, xi_op, f, g, base_spec.omega)
    assert res.alpha_residual < 1e-8
    assert res.beta_residual < 1e-8


def test_matrix_n_vacuum(space30, pi02):
    rho = fock.vacuum_state(space30)
    n_mat = fock.matrix_N(space30, rho, pi02)
    xi_val = fock.rsm(space30, rho, pi02)
    np.testing.assert_allclose(n_mat.imag, 0.5 * xi_val * THETA2, atol=1e-6)
    assert fock.hermiticity_residual(n_mat) < 1e-10
    grad = fock.rsm_pi_gradient_fd(space30, rho, pi02)
    assert np.linalg.norm(n_mat.real - 2.0 * grad) \
        < 1e-3 * np.linalg.norm(n_mat.real)


def test_perturbation_t_zero_without_channels(base_spec, space30, pi02):
    derived = model.derive_structure(base_spec)
    q_ops, t_ops = fock.perturbation_T(space30, base_spec, derived, pi02)
    assert q_ops.shape[0] == 0
    assert np.linalg.norm(t_ops) == 0.0


def test_perturbation_t_quadratic(quadratic_spec, space30, pi02):
    derived = model.derive_structure(quadratic_spec)
    q_ops, t_ops = fock.perturbation_T(space30, quadratic_spec, derived, pi02)
    assert fock.opmatrix_adjoint_residual(t_ops) < 1e-8
    # the quadratic channel makes Q a linear image of the averaged X X^T
    fact = spectral.spectral_factorize(THETA2, pi02)
    k_xxt = fock.k_of_xxt(space30, fact)
    gamma = quadratic_spec.perturbations[0].gamma
    ref = gamma * np.einsum("jk,jlxy->klxy",
                            quadratic_spec.c_matrix, k_xxt)
    assert np.linalg.norm(q_ops - ref) < 1e-8 * max(np.linalg.norm(ref), 1.0)


def test_k_of_xxt_closed_vs_quadrature(space30, pi02):
    fact = spectral.spectral_factorize(THETA2, pi02)
    closed = fock.k_of_xxt(space30, fact)
    quad = fock.k_of_xxt(space30, fact, nodes=64)
    assert np.linalg.norm(closed - quad) < 1e-8 * np.linalg.norm(closed)


def test_averaged_xxt_has_negative_directions(pi02):
    """The averaged X X^T matrix is NOT superpositive for Pi > 0.

    For u = (1, i)/sqrt(2) + (1, -i)/sqrt(2) the operator u* K_op(XX^T) u
    equals ((1+s) q^2 + (1-s) p^2)/2 with s = sinh(p0)/p0 > 1 at exponent
    p0 > 0 -- a hyperbolic quadratic form that is unbounded below.  The
    sampled margin is therefore negative, stable under refining the
    truncation, and this limits how strong a sampled superpositivity
    certificate can ever be.
    """
    fact = spectral.spectral_factorize(THETA2, pi02)
    margins = []
    for cutoff in (20, 30, 40):
        space = fock.build_space(1, cutoff, THETA2)
        k_xxt = fock.k_of_xxt(space, fact)
        zero_t = np.zeros_like(k_xxt)
        # fix the restricted subspace at 18 levels so the margins are
        # directly comparable across truncations
        margins.append(fock.superpositivity_margin(space, zero_t, k_xxt, 1.0,
                                                   n_samples=200, seed=0,
                                                   fraction=18.0 / cutoff))
    assert all(m < -1e-3 for m in margins)
    # cutoff-stable, hence not a truncation artifact
    assert max(margins) - min(margins) < 1e-9


def test_superpositivity_trivial_margin(space30, pi02):
    fact = spectral.spectral_factorize(THETA2, pi02)
    k_xxt = fock.k_of_xxt(space30, fact)
    zero_t = np.zeros_like(k_xxt)
    assert fock.superpositivity_margin(space30, zero_t, k_xxt, 0.0) == 0.0
    assert fock.smallest_admissible_sigma(space30, zero_t, k_xxt) == 0.0


def test_no_admissible_sigma_for_quadratic_channel(quadratic_spec, space30,
                                                   pi02):
    # consequence of the negative directions above: no sigma on the grid
    # clears the strict sampled-margin threshold for a nonzero channel
    derived = model.derive_structure(quadratic_spec)
    _, t_ops = fock.perturbation_T(space30, quadratic_spec, derived, pi02)
    fact = spectral.spectral_factorize(THETA2, pi02)
    k_xxt = fock.k_of_xxt(space30, fact)
    with pytest.raises(OracleError, match="no admissible sigma"):
        fock.smallest_admissible_sigma(space30, t_ops, k_xxt)


def test_second_moments_and_xi_moments(space30, pi02):
    rho = fock.vacuum_state(space30)
    np.testing.assert_allclose(fock.second_moments(space30, rho),
                               0.5 * np.eye(2), atol=1e-12)
    moments = fock.xi_moments(space30, rho, pi02)
    # vacuum eigenstate: xi |0> = 0.1 |0>, so E(xi^r) = 0.1^r
    np.testing.assert_allclose(moments, [0.1**r for r in (1, 2, 3, 4)],
                               atol=1e-12)


def test_evolve_state_input_validation(base_spec, space30):
    derived = model.derive_structure(base_spec)
    rho0 = fock.vacuum_state(space30)
    with pytest.raises(OracleError, match="t_grid"):
        fock.evolve_state(space30, base_spec, derived, rho0,
                          np.array([0.5, 1.0]))
    with pytest.raises(OracleError, match="density matrix"):
        fock.evolve_state(space30, base_spec, derived, 2.0 * rho0,
                          np.array([0.0, 1.0]))
