"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from gratcas.profiles import (
    FermiStepParams,
    fermi_step_profile,
    uniform_slab_profile,
    vacuum_profile,
)

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def ridge_profile():
    """The production grating: smoothed ridges h=2, w=2, s=16, period 2*pi."""
    return fermi_step_profile(FermiStepParams(h=2.0, w=2.0, s=16.0, L=TWO_PI))


@pytest.fixture(scope="session")
def slab_profile():
    """x-independent smoothed slab with the same footprint as the grating."""
    return uniform_slab_profile(4.0, 2.0, 16.0, TWO_PI)


@pytest.fixture(scope="session")
def empty_profile():
    return vacuum_profile(TWO_PI)
