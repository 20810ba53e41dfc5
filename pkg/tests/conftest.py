"""Shared fixtures: demo systems and a truncated oracle space."""

import numpy as np
import pytest

from rsmbound import fock, model

THETA2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def single_mode(perturbations=(), c_matrix=None):
    """One oscillator, unit energy and coupling, vacuum-field Ito matrix."""
    return model.SystemSpec(
        theta=THETA2,
        r_matrix=np.eye(2),
        m_matrix=np.eye(2),
        omega=np.eye(2) + 0.5j * THETA2,
        c_matrix=c_matrix,
        perturbations=perturbations,
    )


@pytest.fixture(scope="session")
def base_spec():
    return single_mode()


@pytest.fixture(scope="session")
def quadratic_spec():
    pert = model.Perturbation(kind="quadratic", gamma=0.05)
    return single_mode(perturbations=(pert,), c_matrix=np.array([[1.0], [0.0]]))


@pytest.fixture(scope="session")
def uncoupled_spec():
    return model.SystemSpec(theta=THETA2, r_matrix=np.eye(2),
                            m_matrix=np.zeros((1, 2)), omega=np.eye(1),
                            c_matrix=None)


@pytest.fixture(scope="session")
def pi02():
    return 0.2 * np.eye(2)


@pytest.fixture(scope="session")
def space30():
    return fock.build_space(1, 30, THETA2)
