"""Command-line front end: analyze, bound, verify.

``analyze`` dumps the derived structure matrices and spectral quantities at
the given risk parameter to ``analysis.json``; ``bound`` integrates the
characteristic ODE and exports the moment-bound trajectory to
``trajectory.csv``; ``verify`` runs the full oracle check suite and writes
``verify.json``.  Exit codes: 0 success, 1 verification/bound failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import dynamics, fock, spectral, verification
from .model import ConfigError, derive_structure, load_system, validate_conditions


def _complex_json(a):
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return {"re": a.real.tolist(), "im": a.imag.tolist()}
    return a.tolist()


def parse_pi0(text, n):
    """Risk parameter from a scalar shorthand, inline JSON rows, or a JSON file."""
    text = text.strip()
    try:
        return float(text) * np.eye(n)
    except ValueError:
        pass
    if text.startswith("["):
        try:
            rows = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse pi0: {exc}") from None
    else:
        try:
            with open(text) as fh:
                rows = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read pi0 from {text}: {exc}") from None
        if isinstance(rows, dict):
            rows = rows.get("rows", rows)
    pi0 = np.asarray(rows, dtype=float)
    if pi0.shape != (n, n):
        raise ConfigError(f"pi0 has shape {pi0.shape}, expected {(n, n)}")
    return pi0


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_analyze(args):
    spec = load_system(args.system)
    pi0 = parse_pi0(args.pi0, spec.n)
    report = validate_conditions(spec, pi0)
    if not report.ok:
        raise ConfigError("; ".join(report.messages))
    derived = derive_structure(spec)
    fact = spectral.spectral_factorize(spec.theta, pi0)
    if np.linalg.norm(derived.b_matrix) == 0.0:
        n = spec.n
        gam = np.zeros((n, n), dtype=complex)
        y_mat = u_mat = np.zeros((n, n))
        residuals = {"gamma_hermiticity": 0.0, "y_symmetry": 0.0,
                     "u_antisymmetry": 0.0}
    else:
        gam = spectral.gamma_matrix(fact, derived.b_matrix,
                                    derived.v_matrix + 0.5j * derived.j_matrix,
                                    spec.m_matrix)
        dc = spectral.drift_correction(fact, gam)
        y_mat, u_mat = dc.y_matrix, dc.u_matrix
        residuals = {"gamma_hermiticity": dc.gamma_hermiticity,
                     "y_symmetry": dc.y_symmetry,
                     "u_antisymmetry": dc.u_antisymmetry}
    payload = {
        "pi0": pi0.tolist(),
        "v": _complex_json(derived.v_matrix),
        "j": derived.j_matrix.tolist(),
        "b": derived.b_matrix.tolist(),
        "a": derived.a_matrix.tolist(),
        "exponents": fact.exponents.tolist(),
        "gamma": _complex_json(gam),
        "y": y_mat.tolist(),
        "u": u_mat.tolist(),
        "tau": dynamics.tau(derived.b_matrix, derived.v_matrix, pi0),
        "residuals": residuals,
    }
    out = os.path.join(args.out, "analysis.json")
    _write_json(out, payload)
    print(f"wrote {out}")
    return 0


def cmd_bound(args):
    spec = load_system(args.system)
    pi0 = parse_pi0(args.pi0, spec.n)
    derived = derive_structure(spec)
    if args.xi0 is not None:
        xi0 = float(args.xi0)
    else:
        n_modes = spec.n // 2
        cutoff = args.cutoff if n_modes == 1 else min(args.cutoff, 12)
        space = fock.build_space(n_modes, cutoff, spec.theta)
        xi0 = fock.rsm(space, fock.vacuum_state(space), pi0)
    traj = dynamics.integrate_characteristic(spec, derived, pi0, args.sigma,
                                             args.horizon, n_points=args.points)
    traj = dynamics.gronwall_bound(traj, xi0)
    out = os.path.join(args.out, "trajectory.csv")
    dynamics.write_trajectory_csv(traj, out)
    print(f"wrote {out}")
    if not traj.pd_ok.all():
        t_fail = traj.times[np.argmin(traj.pd_ok)]
        print(f"Pi left the positive-definite cone at t = {t_fail:g}",
              file=sys.stderr)
        return 1
    print(f"final bound at t = {args.horizon:g}: {float(traj.bound_path[-1])!r}")
    return 0


def cmd_verify(args):
    spec = load_system(args.system)
    pi0 = parse_pi0(args.pi0, spec.n)
    report = verification.run_suite(
        spec, pi0, sigma=args.sigma, horizon=args.horizon, cutoff=args.cutoff,
        quad_nodes=args.quad_nodes, seed=args.seed, n_samples=args.samples,
        corrupt_gamma=args.corrupt_gamma)
    out = os.path.join(args.out, "verify.json")
    _write_json(out, report)
    for c in report["checks"]:
        flag = "PASS" if c["passed"] else "FAIL"
        print(f"[{flag}] {c['name']}: residual {c['residual']:.3e} "
              f"(tolerance {c['tolerance']:.0e})")
    print(f"wrote {out}")
    if not report["all_passed"]:
        failing = [c["name"] for c in report["checks"] if not c["passed"]]
        print("failing checks: " + ", ".join(failing), file=sys.stderr)
        return 1
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rsmbound",
        description="Risk-sensitive moment bounds for open quantum oscillators")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--system", required=True, help="system config JSON")
        p.add_argument("--pi0", default="0.2",
                       help="risk parameter: scalar shorthand, JSON rows, or file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--cutoff", type=int, default=30,
                       help="Fock truncation level per mode")
        p.add_argument("--quad-nodes", type=int, default=32,
                       help="Gauss-Legendre nodes for operator integrals")
        p.add_argument("--seed", type=int, default=0, help="sampling seed")

    p = sub.add_parser("analyze", help="derived matrices and spectral data")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bound", help="moment-bound trajectory export")
    common(p)
    p.add_argument("--sigma", type=float, default=0.0, help="growth-rate parameter")
    p.add_argument("--horizon", type=float, default=1.0, help="time horizon")
    p.add_argument("--points", type=int, default=201, help="grid points")
    p.add_argument("--xi0", type=float, default=None,
                   help="initial moment value (default: vacuum oracle)")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("verify", help="run the oracle check suite")
    common(p)
    p.add_argument("--sigma", type=float, default=None,
                   help="growth-rate override (default: sampled sweep)")
    p.add_argument("--horizon", type=float, default=1.0, help="time horizon")
    p.add_argument("--samples", type=int, default=200,
                   help="superpositivity sample count")
    p.add_argument("--corrupt-gamma", type=float, default=0.0,
                   help=argparse.SUPPRESS)  # fault-injection test hook
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if getattr(args, "horizon", 1.0) <= 0.0:
            raise ConfigError("horizon must be positive")
        if getattr(args, "sigma", 0.0) is not None and getattr(args, "sigma", 0.0) < 0.0:
            raise ConfigError("sigma must be nonnegative")
        os.makedirs(args.out, exist_ok=True)
        return args.func(args)
    except (ConfigError, dynamics.DynamicsError, spectral.SpectralError,
            fock.OracleError, verification.VerificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
