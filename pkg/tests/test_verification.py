"""Check-suite behavior on the demo systems, including fault injection."""

import numpy as np
import pytest

from rsmbound import verification
from rsmbound.verification import VerificationError


def _by_name(report):
    return {c["name"]: c for c in report["checks"]}


@pytest.fixture(scope="module")
def base_report(base_spec, pi02):
    return verification.run_suite(base_spec, pi02)


@pytest.fixture(scope="module")
def quadratic_report(quadratic_spec, pi02):
    return verification.run_suite(quadratic_spec, pi02)


def test_base_suite_all_pass(base_report):
    assert base_report["all_passed"]
    names = _by_name(base_report)
    for required in ("space_ccr_defect", "state_preservation",
                     "conjugation_identity", "drift_generator_consistency",
                     "rate_selfadjointness", "moment_matrix_imaginary",
                     "moment_matrix_real", "moment_growth_rate", "moment_pde",
                     "ito_correction_quadform", "averaging_consistency",
                     "moment_lower_bound", "moment_bounds",
                     "perturbation_t_selfadjoint",
                     "superpositivity_certificate", "moment_bound_trajectory"):
        assert required in names, required
    assert base_report["sigma_hat"] == 0.0
    assert base_report["margin_certified"]


def test_quadratic_suite_certificate_fails_honestly(quadratic_report):
    names = _by_name(quadratic_report)
    # the sampled certificate cannot clear the strict threshold because the
    # averaged X X^T operator has negative directions; the bound check is
    # unaffected and passes with a wide margin
    assert not names["superpositivity_certificate"]["passed"]
    assert names["moment_bound_trajectory"]["passed"]
    assert names["quadratic_q_closed_form"]["passed"]
    assert not quadratic_report["margin_certified"]
    assert quadratic_report["sampled_margin"] < -1e-3
    failing = [n for n, c in names.items() if not c["passed"]]
    assert failing == ["superpositivity_certificate"]


def test_margin_sweep_reported(quadratic_report):
    margins = quadratic_report["margin_by_sigma"]
    assert len(margins) == len(verification.SIGMA_SWEEP)
    assert margins["0"] < margins[f"{quadratic_report['sigma_hat']:g}"]


def test_corrupt_gamma_fails_pde_check(base_spec, pi02):
    report = verification.run_suite(base_spec, pi02, corrupt_gamma=0.5)
    names = _by_name(report)
    assert not names["moment_pde"]["passed"]
    assert not report["all_passed"]


def test_sigma_override_used(base_spec, pi02):
    report = verification.run_suite(base_spec, pi02, sigma=0.3)
    assert report["sigma_used"] == pytest.approx(0.3)
    assert _by_name(report)["moment_bound_trajectory"]["passed"]


def test_invalid_inputs_rejected(base_spec):
    with pytest.raises(VerificationError, match="positive definite"):
        verification.run_suite(base_spec, -np.eye(2))
    with pytest.raises(VerificationError, match="horizon"):
        verification.run_suite(base_spec, 0.2 * np.eye(2), horizon=0.0)


def test_report_is_json_ready(base_report):
    import json

    text = json.dumps(base_report, sort_keys=True)
    assert "space_ccr_defect" in text
