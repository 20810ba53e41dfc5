"""Characteristic ODE integration and Gronwall bound trajectories.

The risk parameter Pi evolves along the characteristic

    dPi/dt = -(A^T Pi + Pi A + 2 Y(Pi) + sigma Pi)

where Y(Pi) comes from the spectral drift correction (recomputed from a
fresh factorization at every right-hand-side evaluation).  Along that
trajectory the moment satisfies dXi/dt <= (tau + <U, Theta>/2) Xi, so the
upper bound is the exponential of the cumulative exponent integral.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from . import spectral
from .model import validate_conditions


class DynamicsError(ValueError):
    """Invalid inputs or failed integration."""


def tau(b_matrix, v_matrix, pi):
    """Diffusion supply rate <B V B^T, Pi>/2 = tr(B V B^T Pi)/2."""
    b = np.asarray(b_matrix, dtype=float)
    v = np.asarray(v_matrix, dtype=float)
    pi = np.asarray(pi, dtype=float)
    return 0.5 * float(np.trace(b @ v @ b.T @ pi))


def exponent_terms(spec, derived, pi):
    """(tau, <U, Theta>/2, Y, U) at a given Pi; tau plus the pairing is the
    Gronwall exponent.  With zero coupling (M = 0) the Ito correction
    vanishes and Y = U = 0."""
    t = tau(derived.b_matrix, derived.v_matrix, pi)
    n = spec.n
    if np.linalg.norm(derived.b_matrix) == 0.0:
        z = np.zeros((n, n))
        return t, 0.0, z, z
    fact = spectral.spectral_factorize(spec.theta, pi)
    gam = spectral.gamma_matrix(fact, derived.b_matrix, _omega_of(derived),
                                spec.m_matrix)
    dc = spectral.drift_correction(fact, gam)
    pairing = 0.5 * float(np.sum(dc.u_matrix * spec.theta))
    return t, pairing, dc.y_matrix, dc.u_matrix


def _omega_of(derived):
    return derived.v_matrix + 0.5j * derived.j_matrix


@dataclass(frozen=True)
class CharacteristicTrajectory:
    """Time grid with Pi(t), tau(t), growth exponent and Gronwall bound."""

    times: np.ndarray
    pi_path: np.ndarray          # (n_t, n, n), symmetric
    tau_path: np.ndarray
    exponent_path: np.ndarray    # tau + <U, Theta>/2
    bound_path: np.ndarray       # Gronwall bound, nan until filled
    pd_ok: np.ndarray            # bool per point; False once Pi leaves the PD cone
    sigma: float = 0.0


def integrate_characteristic(spec, derived, pi0, sigma, horizon,
                             n_points=201, rtol=1e-8, atol=1e-10):
    """Integrate the characteristic ODE for Pi over [0, horizon].

    Pi is symmetrized after every evaluation; integration stops at the first
    point where the smallest eigenvalue of Pi drops below the PD floor
    (1e-10 * ||Pi0||), and all later grid points are flagged pd_ok=False.
    """
    pi0 = np.asarray(pi0, dtype=float)
    pi0 = 0.5 * (pi0 + pi0.T)
    if sigma < 0.0:
        raise DynamicsError("sigma must be nonnegative")
    if horizon <= 0.0:
        raise DynamicsError("horizon must be positive")
    report = validate_conditions(spec, pi0)
    if not report.ok:
        raise DynamicsError("; ".join(report.messages))

    theta = spec.theta
    n = theta.shape[0]
    a_mat = derived.a_matrix
    pd_floor = 1e-10 * np.linalg.norm(pi0)
    coupled = np.linalg.norm(derived.b_matrix) != 0.0

    def rhs(_t, y):
        pi = y.reshape(n, n)
        pi = 0.5 * (pi + pi.T)
        if coupled:
            fact = spectral.spectral_factorize(theta, pi)
            gam = spectral.gamma_matrix(fact, derived.b_matrix,
                                        _omega_of(derived), spec.m_matrix)
            y_mat = spectral.drift_correction(fact, gam).y_matrix
        else:
            y_mat = 0.0
        dpi = -(a_mat.T @ pi + pi @ a_mat + 2.0 * y_mat + sigma * pi)
        return (0.5 * (dpi + dpi.T)).ravel()

    def pd_event(_t, y):
        pi = y.reshape(n, n)
        return float(np.linalg.eigvalsh(0.5 * (pi + pi.T)).min()) - pd_floor

    pd_event.terminal = True
    pd_event.direction = -1.0

    times = np.linspace(0.0, horizon, n_points)
    sol = solve_ivp(rhs, (0.0, horizon), pi0.ravel(), t_eval=times,
                    rtol=rtol, atol=atol, events=pd_event, method="RK45")
    if not sol.success and sol.status != 1:
        raise DynamicsError(f"characteristic integration failed: {sol.message}")

    n_good = sol.y.shape[1]
    pi_path = np.full((n_points, n, n), np.nan)
    pd_ok = np.zeros(n_points, dtype=bool)
    tau_path = np.full(n_points, np.nan)
    exp_path = np.full(n_points, np.nan)
    for i in range(n_good):
        pi_t = sol.y[:, i].reshape(n, n)
        pi_t = 0.5 * (pi_t + pi_t.T)
        pi_path[i] = pi_t
        pd_ok[i] = float(np.linalg.eigvalsh(pi_t).min()) > pd_floor
        # symmetric/antisymmetric orthogonality self-check along the path
        if abs(float(np.sum(pi_t * theta))) > 1e-9 * max(np.linalg.norm(pi_t), 1.0):
            raise DynamicsError("Pi lost symmetry along the characteristic")
        if pd_ok[i]:
            t_val, pairing, _, _ = exponent_terms(spec, derived, pi_t)
            tau_path[i] = t_val
            exp_path[i] = t_val + pairing
    return CharacteristicTrajectory(times=times, pi_path=pi_path,
                                    tau_path=tau_path, exponent_path=exp_path,
                                    bound_path=np.full(n_points, np.nan),
                                    pd_ok=pd_ok, sigma=float(sigma))


def gronwall_bound(traj, xi0):
    """Fill bound_path with xi0 * exp(cumulative trapezoid of the exponent)."""
    if xi0 <= 0.0:
        raise DynamicsError("xi0 must be positive")
    good = np.isfinite(traj.exponent_path)
    n_good = int(np.argmin(good)) if not good.all() else good.size
    bound = np.full(traj.times.size, np.nan)
    if n_good > 0:
        integ = cumulative_trapezoid(traj.exponent_path[:n_good],
                                     traj.times[:n_good], initial=0.0)
        bound[:n_good] = xi0 * np.exp(integ)
    return replace(traj, bound_path=bound)


def small_pi_expansion(pi, second_moments):
    """First-order moment value 1 + <Pi, Re E(X X^T)>/2; a lower bound on Xi."""
    pi = np.asarray(pi, dtype=float)
    sm = np.asarray(second_moments, dtype=float)
    return 1.0 + 0.5 * float(np.sum(pi * sm))


def write_trajectory_csv(traj, path):
    """Export as CSV: t, vec(Pi) row-major, tau, exponent, bound, pd_ok."""
    n = traj.pi_path.shape[1]
    header = (["t"] + [f"pi_{j}{k}" for j in range(n) for k in range(n)]
              + ["tau", "exponent", "bound", "pd_ok"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, t in enumerate(traj.times):
            row = [repr(float(t))]
            row += [repr(float(v)) for v in traj.pi_path[i].ravel()]
            row += [repr(float(traj.tau_path[i])),
                    repr(float(traj.exponent_path[i])),
                    repr(float(traj.bound_path[i])),
                    int(traj.pd_ok[i])]
            writer.writerow(row)
