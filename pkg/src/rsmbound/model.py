"""System description: structure matrices, perturbation catalogue, validation.

A system is specified by the canonical commutation matrix Theta, the nominal
energy matrix R, the system-field coupling gain matrix M, the quantum Ito
matrix Omega of the driving fields, and a list of scalar perturbation
channels (direction c_k, nonlinearity phi_k).  From these the constant
matrices of the linear part of the dynamics are derived:

    V = Re Omega          (diffusion part of the Ito table)
    J = 2 Im Omega        (field commutation structure)
    B = Theta M^T         (dispersion matrix)
    A = Theta R + B J M / 2

All matrices are plain numpy arrays; specs are immutable after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# Relative tolerance for structural invariants (antisymmetry, Hermiticity,
# positive semi-definiteness).  Inputs passing the check are symmetrized so
# downstream code sees exact structure.
STRUCT_RTOL = 1e-12


class ConfigError(ValueError):
    """Malformed or inconsistent system configuration."""


def _norm(a):
    return float(np.linalg.norm(a))


def _scale(a):
    return max(_norm(a), 1.0)


@dataclass(frozen=True)
class Perturbation:
    """One scalar Hamiltonian perturbation channel phi_k.

    Supported kinds (phi and its derivative are closed-form):
      zero:        phi(y) = 0
      quadratic:   phi(y) = gamma * y^2 / 2
      polynomial:  phi(y) = sum_i coeffs[i] * y^i
      sinusoid:    phi(y) = epsilon * sin(omega0 * y)
    """

    kind: str
    gamma: float = 0.0
    coeffs: tuple = ()
    epsilon: float = 0.0
    omega0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero", "quadratic", "polynomial", "sinusoid"):
            raise ConfigError(f"unknown perturbation kind {self.kind!r}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def phi(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(y)
        if self.kind == "quadratic":
            return 0.5 * self.gamma * y**2
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(y, self.coeffs) if self.coeffs else np.zeros_like(y)
        return self.epsilon * np.sin(self.omega0 * y)

    def dphi(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(y)
        if self.kind == "quadratic":
            return self.gamma * y
        if self.kind == "polynomial":
            dc = np.polynomial.polynomial.polyder(self.coeffs) if len(self.coeffs) > 1 else (0.0,)
            return np.polynomial.polynomial.polyval(y, dc)
        return self.epsilon * self.omega0 * np.cos(self.omega0 * y)

    def dphi_matrix(self, a):
        """Apply phi' to a square (possibly non-Hermitian, diagonalizable) matrix.

        Polynomial kinds are evaluated directly (Horner); the sinusoid kind
        uses the eigendecomposition, valid for entire functions.
        """
        a = np.asarray(a, dtype=complex)
        d = a.shape[0]
        if self.kind == "zero":
            return np.zeros_like(a)
        if self.kind == "quadratic":
            return self.gamma * a
        if self.kind == "polynomial":
            dc = np.polynomial.polynomial.polyder(self.coeffs) if len(self.coeffs) > 1 else (0.0,)
            out = np.zeros_like(a)
            for c in reversed(dc):
                out = out @ a + c * np.eye(d)
            return out
        w, p = np.linalg.eig(a)
        return (p * (self.epsilon * self.omega0 * np.cos(self.omega0 * w))) @ np.linalg.inv(p)


def _check_real_matrix(name, a, shape=None):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ConfigError(f"{name} is not a matrix")
    if shape is not None and a.shape != shape:
        raise ConfigError(f"{name} has shape {a.shape}, expected {shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True)
class SystemSpec:
    """Validated, immutable description of the quantum system."""

    theta: np.ndarray
    r_matrix: np.ndarray
    m_matrix: np.ndarray
    omega: np.ndarray
    c_matrix: np.ndarray
    perturbations: tuple = ()

    def __post_init__(self):
        theta = _check_real_matrix("theta", self.theta)
        n = theta.shape[0]
        if theta.shape[1] != n:
            raise ConfigError("theta not square")
        if n % 2 != 0:
            raise ConfigError(f"n odd: system dimension n={n} must be even")
        res = _norm(theta + theta.T)
        if res > STRUCT_RTOL * _scale(theta):
            raise ConfigError(f"theta not antisymmetric (residual {res:.3e})")
        theta = 0.5 * (theta - theta.T)

        r = _check_real_matrix("r", self.r_matrix, (n, n))
        res = _norm(r - r.T)
        if res > STRUCT_RTOL * _scale(r):
            raise ConfigError(f"r not symmetric (residual {res:.3e})")
        r = 0.5 * (r + r.T)

        m = _check_real_matrix("m", self.m_matrix)
        if m.shape[1] != n:
            raise ConfigError(f"m has {m.shape[1]} columns, expected {n}")

        omega = np.asarray(self.omega, dtype=complex)
        mm = m.shape[0]
        if omega.shape != (mm, mm):
            raise ConfigError(f"omega has shape {omega.shape}, expected {(mm, mm)}")
        res = _norm(omega - omega.conj().T)
        if res > STRUCT_RTOL * _scale(omega):
            raise ConfigError(f"omega not Hermitian (residual {res:.3e})")
        omega = 0.5 * (omega + omega.conj().T)
        w_min = float(np.linalg.eigvalsh(omega).min())
        if w_min < -1e-12 * _scale(omega):
            raise ConfigError(f"omega not PSD (min eigenvalue {w_min:.3e})")

        c = self.c_matrix
        perts = tuple(self.perturbations)
        if c is None:
            c = np.zeros((n, 0))
        c = _check_real_matrix("c", c)
        if c.shape[0] != n:
            raise ConfigError(f"c has {c.shape[0]} rows, expected {n}")
        if c.shape[1] != len(perts):
            raise ConfigError(
                f"c has {c.shape[1]} columns but {len(perts)} perturbations given")

        for a in (theta, r, m, omega, c):
            a.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "r_matrix", r)
        object.__setattr__(self, "m_matrix", m)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "c_matrix", c)
        object.__setattr__(self, "perturbations", perts)

    @property
    def n(self):
        return self.theta.shape[0]

    @property
    def n_fields(self):
        return self.m_matrix.shape[0]

    def without_perturbations(self):
        return SystemSpec(self.theta, self.r_matrix, self.m_matrix, self.omega,
                          np.zeros((self.n, 0)), ())


@dataclass(frozen=True)
class DerivedMatrices:
    """Constant matrices of the linear dynamics derived from a SystemSpec."""

    v_matrix: np.ndarray
    j_matrix: np.ndarray
    b_matrix: np.ndarray
    a_matrix: np.ndarray


def ito_decompose(omega):
    """Split a Hermitian Ito matrix into V = Re Omega and J = 2 Im Omega."""
    omega = np.asarray(omega, dtype=complex)
    res = _norm(omega - omega.conj().T)
    if res > STRUCT_RTOL * _scale(omega):
        raise ConfigError(f"omega not Hermitian (residual {res:.3e})")
    v = omega.real.copy()
    j = 2.0 * omega.imag
    v = 0.5 * (v + v.T)
    j = 0.5 * (j - j.T)
    return v, j


def derive_structure(spec):
    """Compute V, J, B = Theta M^T and A = Theta R + B J M / 2."""
    v, j = ito_decompose(spec.omega)
    b = spec.theta @ spec.m_matrix.T
    a = spec.theta @ spec.r_matrix + 0.5 * b @ j @ spec.m_matrix
    return DerivedMatrices(v_matrix=v, j_matrix=j, b_matrix=b, a_matrix=a)


@dataclass(frozen=True)
class ConditionReport:
    """Diagnostics for the admissibility conditions (even n, det Theta != 0, Pi > 0)."""

    n_even: bool
    theta_nonsingular: bool
    pi_positive_definite: bool
    messages: tuple = ()

    @property
    def ok(self):
        return self.n_even and self.theta_nonsingular and self.pi_positive_definite


def validate_conditions(spec_or_theta, pi):
    """Check the admissibility conditions for a given risk parameter Pi.

    Accepts either a SystemSpec or a raw Theta matrix (so that odd-dimension
    inputs, rejected at spec construction, can still be diagnosed).
    """
    if isinstance(spec_or_theta, SystemSpec):
        theta = spec_or_theta.theta
    else:
        theta = np.asarray(spec_or_theta, dtype=float)
    pi = np.asarray(pi, dtype=float)
    msgs = []

    n = theta.shape[0]
    n_even = (n % 2 == 0)
    if not n_even:
        msgs.append(f"n odd: dimension {n}")

    det = float(np.linalg.det(theta)) if n_even or True else 0.0
    scale = max(_norm(theta), 1e-300) ** n
    nonsing = abs(det) > 1e-12 * scale
    if not nonsing:
        msgs.append(f"theta singular (|det| = {abs(det):.3e})")

    pd = False
    if pi.shape == (n, n):
        w_min = float(np.linalg.eigvalsh(0.5 * (pi + pi.T)).min())
        pd = w_min > 0.0
        if not pd:
            msgs.append(f"pi not positive definite (min eigenvalue {w_min:.3e})")
    else:
        msgs.append(f"pi has shape {pi.shape}, expected {(n, n)}")

    return ConditionReport(n_even=n_even, theta_nonsingular=nonsing,
                           pi_positive_definite=pd, messages=tuple(msgs))


def _parse_matrix(cfg, name, dtype=float):
    if name not in cfg:
        raise ConfigError(f"missing field {name!r}")
    entry = cfg[name]
    if isinstance(entry, dict) and "re" in entry:
        try:
            re = np.asarray(entry["re"], dtype=float)
            im = np.asarray(entry.get("im", np.zeros_like(re)), dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field {name!r}: {exc}") from None
        if re.shape != im.shape:
            raise ConfigError(f"field {name!r}: re/im shape mismatch")
        return re + 1j * im
    if isinstance(entry, dict) and "rows" in entry:
        entry = entry["rows"]
    try:
        return np.asarray(entry, dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {name!r}: {exc}") from None


def _parse_perturbation(cfg):
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("perturbation entries need a 'kind' field")
    kind = cfg["kind"]
    return Perturbation(
        kind=kind,
        gamma=float(cfg.get("gamma", 0.0)),
        coeffs=tuple(cfg.get("coeffs", ())),
        epsilon=float(cfg.get("epsilon", 0.0)),
        omega0=float(cfg.get("omega0", 1.0)),
    )


def load_system(path):
    """Load and validate a system configuration from a JSON file.

    Schema: ``{"theta": {"rows": [[...]]}, "r": ..., "m": ...,
    "omega": {"re": [[...]], "im": [[...]]}, "c": ...,
    "perturbations": [{"kind": "quadratic", "gamma": 0.1}, ...]}``.
    All matrices are row-major; "c" and "perturbations" are optional.
    """
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("top-level config must be a JSON object")

    theta = _parse_matrix(cfg, "theta").real
    r = _parse_matrix(cfg, "r").real
    m = _parse_matrix(cfg, "m").real
    omega = _parse_matrix(cfg, "omega", dtype=complex)
    n = theta.shape[0] if theta.ndim == 2 else 0
    if "c" in cfg:
        c = _parse_matrix(cfg, "c").real
    else:
        c = np.zeros((n, 0))
    perts = tuple(_parse_perturbation(p) for p in cfg.get("perturbations", ()))
    return SystemSpec(theta=theta, r_matrix=r, m_matrix=m, omega=omega,
                      c_matrix=c, perturbations=perts)
