"""Dielectric profile components: values, derivatives, symmetry, policies."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gratcas.profiles import (
    FermiStepComponent,
    FermiStepParams,
    ProfileError,
    TabulatedComponent,
    eval_component,
    eval_component_dz,
    eval_component_dzz,
    eval_total,
    fermi_step_profile,
    quiet_zone_start,
    resolving_step,
    tabulated_profile,
    uniform_slab_profile,
    vacuum_profile,
)

TWO_PI = 2.0 * np.pi


def fd_derivative(fun, z, delta):
    """4th-order central difference, the independent check on analytic dz."""
    return (
        -fun(z + 2 * delta) + 8 * fun(z + delta)
        - 8 * fun(z - delta) + fun(z - 2 * delta)
    ) / (12 * delta)


# -- Fermi step component ----------------------------------------------------


def test_fermi_value_matches_naive_formula():
    comp = FermiStepComponent(coef=0.5, h=2.0, w=2.0, s=16.0)
    z = np.linspace(-4.0, 4.0, 41)
    naive = 0.5 * 2.0 / (1.0 + np.exp(16.0 * (np.abs(z) - 2.0)))
    assert np.allclose(comp.value(0.7, z), naive, rtol=1e-14, atol=1e-300)


def test_fermi_value_stable_at_extreme_arguments():
    comp = FermiStepComponent(coef=1.0, h=2.0, w=2.0, s=16.0)
    with np.errstate(over="raise", invalid="raise"):
        far = comp.value(1.0, np.array([-500.0, 500.0]))
        near = comp.value(1.0, 0.0)
    assert np.all(np.isfinite(far)) and np.all(np.abs(far) < 1e-300)
    assert abs(near - 2.0) < 1e-13


@pytest.mark.parametrize("z", [0.3, 1.1, 1.97, 2.03, 2.6, 3.4, -1.5, -2.4])
def test_fermi_derivatives_match_finite_differences(z):
    comp = FermiStepComponent(coef=1.0, h=2.0, w=2.0, s=16.0)
    delta = 1e-3
    scale = comp.h * comp.s  # typical magnitude of dz near the wall
    fd1 = fd_derivative(lambda t: comp.value(1.0, t), z, delta)
    fd2 = fd_derivative(lambda t: comp.dz(1.0, t), z, delta)
    assert abs(comp.dz(1.0, z) - fd1) < 1e-8 * scale
    assert abs(comp.dzz(1.0, z) - fd2) < 1e-7 * scale * comp.s


@given(
    h=st.floats(0.1, 10.0),
    w=st.floats(0.5, 4.0),
    s=st.floats(2.0, 64.0),
    z=st.floats(-30.0, 30.0),
)
@settings(max_examples=60, deadline=None)
def test_fermi_component_even_in_z(h, w, s, z):
    comp = FermiStepComponent(coef=1.0, h=h, w=w, s=s)
    assert comp.value(1.0, z) == comp.value(1.0, -z)
    assert comp.dz(1.0, z) == -comp.dz(1.0, -z)
    assert comp.dzz(1.0, z) == comp.dzz(1.0, -z)


# -- profile construction and evaluation -------------------------------------


def test_ridge_profile_component_amplitudes(ridge_profile):
    z = np.array([0.0, 1.0, 2.5])
    c0 = eval_component(ridge_profile, 0, 1.0, z)
    c1 = eval_component(ridge_profile, 1, 1.0, z)
    cm1 = eval_component(ridge_profile, -1, 1.0, z)
    assert np.allclose(c1, 0.5 * c0, rtol=1e-15)
    assert np.allclose(cm1, c1, rtol=1e-15)
    assert eval_component(ridge_profile, 3, 1.0, 0.5) == 0.0


def test_total_dielectric_ridge_and_trough(ridge_profile):
    # ridge center: eps = 1 + h + 2*(h/2) = 1 + 2h = 5; trough: back to vacuum
    ridge = eval_total(ridge_profile, 1.0, 0.0, 0.0)
    trough = eval_total(ridge_profile, 1.0, np.pi, 0.0)
    assert abs(ridge - 5.0) < 1e-12
    assert abs(trough - 1.0) < 1e-12
    assert abs(ridge.imag) < 1e-15


def test_total_dielectric_real_and_positive_everywhere(ridge_profile):
    x = np.linspace(0.0, TWO_PI, 31)
    z = np.linspace(-5.0, 5.0, 41)
    vals = np.array([eval_total(ridge_profile, 1.0, xi, z) for xi in x])
    assert np.abs(vals.imag).max() < 1e-12
    assert vals.real.min() > 0.99


def test_uniform_slab_profile_is_x_independent():
    prof = uniform_slab_profile(4.0, 2.0, 16.0, TWO_PI)
    for x in (0.0, 1.3, np.pi):
        assert abs(eval_total(prof, 1.0, x, 0.0) - 4.0) < 1e-12
        assert abs(eval_total(prof, 1.0, x, 50.0) - 1.0) < 1e-300 + 1e-12


def test_vacuum_profile_is_empty():
    prof = vacuum_profile()
    assert prof.components == {}
    assert prof.max_harmonic == 0
    assert eval_total(prof, 1.0, 0.3, 0.7) == 1.0


def test_profile_validation_errors():
    with pytest.raises(ProfileError, match="FermiStepParams.s must be positive"):
        FermiStepParams(h=2.0, w=2.0, s=-1.0, L=TWO_PI)
    with pytest.raises(ProfileError, match="FermiStepParams.h must be positive"):
        FermiStepParams(h=0.0, w=2.0, s=16.0, L=TWO_PI)
    with pytest.raises(ProfileError, match="period_L"):
        vacuum_profile(L=-1.0)
    with pytest.raises(ProfileError):
        uniform_slab_profile(-4.0, 2.0, 16.0, TWO_PI)


# -- tabulated components -----------------------------------------------------


def _sample_table(n_pts=60, z_max=6.0):
    z = np.linspace(0.0, z_max, n_pts)
    return z, 2.0 / (1.0 + np.exp(16.0 * (z - 2.0)))


def test_tabulated_component_reproduces_table_and_is_even():
    z, v = _sample_table()
    comp = TabulatedComponent(z, v)
    assert np.allclose(comp.value(1.0, z), v, rtol=0, atol=1e-12)
    zs = np.linspace(0.1, 5.5, 23)
    assert np.allclose(comp.value(1.0, -zs), comp.value(1.0, zs), rtol=1e-15)
    assert abs(comp.dz(1.0, 0.0)) < 1e-14  # clamped slope keeps even extension smooth


def test_tabulated_derivatives_match_finite_differences():
    z, v = _sample_table(n_pts=240)
    comp = TabulatedComponent(z, v)
    for z0 in (0.8, 1.9, 2.2, 3.1):
        fd1 = fd_derivative(lambda t: comp.value(1.0, t), z0, 1e-3)
        assert abs(comp.dz(1.0, z0) - fd1) < 1e-6 * 32.0
        fd2 = fd_derivative(lambda t: comp.dz(1.0, t), z0, 1e-3)
        assert abs(comp.dzz(1.0, z0) - fd2) < 1e-5 * 512.0


def test_tabulated_profile_validation():
    z, v = _sample_table()
    with pytest.raises(ProfileError, match=">= 4 points"):
        tabulated_profile(TWO_PI, {0: (z[:3], v[:3])})
    with pytest.raises(ProfileError, match="ascending"):
        tabulated_profile(TWO_PI, {0: (z[::-1], v[::-1])})
    with pytest.raises(ProfileError, match="start at 0"):
        tabulated_profile(TWO_PI, {0: (z + 0.5, v)})
    prof = tabulated_profile(TWO_PI, {0: (z, v), 1: (z, 0.5 * v)})
    assert prof.max_harmonic == 1


# -- integration policies ------------------------------------------------------


def test_quiet_zone_start_for_production_grating(ridge_profile):
    z0 = quiet_zone_start(ridge_profile)
    assert 4.0 <= z0 <= 5.5
    # beyond the start point (minus its safety margin) the profile is dead
    total = sum(
        np.abs(eval_component(ridge_profile, n, 1.0, z0 - 0.4))
        for n in (-1, 0, 1)
    )
    assert total < 1e-13


def test_quiet_zone_start_scales_with_steepness():
    sharp = fermi_step_profile(FermiStepParams(h=2.0, w=2.0, s=8192.0, L=TWO_PI))
    soft = fermi_step_profile(FermiStepParams(h=2.0, w=2.0, s=4.0, L=TWO_PI))
    assert quiet_zone_start(sharp) < quiet_zone_start(soft)
    assert quiet_zone_start(sharp) >= 2.0 + 0.5  # never inside the slab body


def test_resolving_step_policies(ridge_profile):
    assert resolving_step(ridge_profile) == pytest.approx(10.0 / 16.0)
    assert resolving_step(vacuum_profile()) == np.inf
    z, v = _sample_table(n_pts=61, z_max=6.0)  # spacing 0.1
    tab = tabulated_profile(TWO_PI, {0: (z, v)})
    assert resolving_step(tab) == pytest.approx(1.0)


@given(s=st.floats(2.0, 2e4))
@settings(max_examples=40, deadline=None)
def test_quiet_zone_is_quiet(s):
    prof = fermi_step_profile(FermiStepParams(h=2.0, w=2.0, s=s, L=TWO_PI))
    z0 = quiet_zone_start(prof)
    total = sum(np.abs(eval_component(prof, n, 1.0, z0)) for n in (-1, 0, 1))
    assert total < 1e-13
