"""Factorized outgoing/regular matrix ODEs: vacuum exactness, batching, limits."""

import numpy as np
import pytest

from gratcas.modes import Frequency, build_basis
from gratcas.ode import (
    integrate_channel,
    integrate_outgoing,
    integrate_regular,
    origin_regular,
    outgoing_pair,
    regular_seed,
)

TWO_PI = 2.0 * np.pi


def small_basis(axis, mag=0.9, kx0=0.15, ky0=0.4, n=1):
    return build_basis(Frequency(axis, mag), kx0, ky0, n, TWO_PI)


# -- vacuum: closed-form oracle ------------------------------------------------


@pytest.mark.parametrize("axis", ["real", "imaginary"])
def test_vacuum_outgoing_is_identity(empty_profile, axis):
    basis = small_basis(axis)
    for z_fit in (0.0, 1.3):
        sol = integrate_outgoing(empty_profile, basis, 5.0, z_fit,
                                 rtol=1e-10, atol=1e-12)
        assert np.abs(sol.value - np.eye(basis.dim)).max() < 1e-9
        assert np.abs(sol.derivative).max() < 1e-9
        assert sol.at_z == z_fit


@pytest.mark.parametrize("axis", ["real", "imaginary"])
@pytest.mark.parametrize("parity", ["+", "-"])
def test_vacuum_regular_closed_form(empty_profile, axis, parity):
    """With no coupling the factorized regular system integrates to
    H(z) = h + (1 - exp(-2 s i M kz z)) / (2 s i M kz) on the diagonal."""
    basis = small_basis(axis)
    z = 1.1
    sol = integrate_regular(parity, empty_profile, basis, z,
                            rtol=1e-11, atol=1e-13)
    sigma = 1 if parity == "+" else -1
    mkz = basis.M_diag * basis.kz_diag
    h0 = np.diag(regular_seed(basis, parity)[0]).copy()
    expect = h0 + (1.0 - np.exp(-2j * sigma * mkz * z)) / (2j * sigma * mkz)
    assert np.abs(sol.value - np.diag(expect)).max() < 1e-9
    d_expect = np.exp(-2j * sigma * mkz * z)
    assert np.abs(sol.derivative - np.diag(d_expect)).max() < 1e-9


def test_origin_regular_is_exact_seed():
    basis = small_basis("imaginary")
    for parity in ("+", "-"):
        sol = origin_regular(basis, parity)
        h0, hp0 = regular_seed(basis, parity)
        assert np.array_equal(sol.value, h0)
        assert np.array_equal(sol.derivative, hp0)
        assert sol.at_z == 0.0
    # seed pattern: 1/(-i kz) on the parity's component rows, zero elsewhere
    h_plus = np.diag(regular_seed(basis, "+")[0])
    h_minus = np.diag(regular_seed(basis, "-")[0])
    xy = basis.M_diag > 0
    assert np.allclose(h_plus[xy], 1.0 / (-1j * basis.kz_diag[xy]))
    assert np.all(h_plus[~xy] == 0.0)
    assert np.all(h_minus[xy] == 0.0)
    assert np.allclose(h_minus[~xy], 1.0 / (-1j * basis.kz_diag[~xy]))
    with pytest.raises(ValueError, match="parity"):
        regular_seed(basis, "plus")


# -- batching consistency -------------------------------------------------------


def test_outgoing_pair_matches_separate_runs(ridge_profile):
    basis = small_basis("imaginary", mag=0.7, kx0=0.2, ky0=0.3)
    pair = outgoing_pair(ridge_profile, basis, 4.6, 0.0, rtol=1e-9, atol=1e-11)
    for sign in (1, -1):
        b = basis if sign == 1 else basis.flipped()
        solo = integrate_outgoing(ridge_profile, b, 4.6, 0.0,
                                  rtol=1e-9, atol=1e-11)
        scale = np.abs(solo.value).max()
        assert np.abs(pair[sign].value - solo.value).max() < 1e-8 * scale
        assert np.abs(pair[sign].derivative - solo.derivative).max() < 1e-8 * scale


def test_integrate_channel_matches_component_runs(ridge_profile):
    basis = small_basis("imaginary", mag=0.7, kx0=0.2, ky0=0.3)
    z_fit = [0.0, 2.0]
    got = integrate_channel(ridge_profile, basis, 4.6, z_fit,
                            rtol=1e-9, atol=1e-11)
    assert set(got) == {("outgoing", 1), ("outgoing", -1),
                        ("+", 1), ("+", -1), ("-", 1), ("-", -1)}
    solo_out = integrate_outgoing(ridge_profile, basis, 4.6, z_fit,
                                  rtol=1e-9, atol=1e-11)
    scale = np.abs(solo_out[1].value).max()
    assert np.abs(got[("outgoing", 1)][1].value
                  - solo_out[1].value).max() < 1e-8 * scale
    solo_reg = integrate_regular("-", ridge_profile, basis.flipped(), 2.0,
                                 rtol=1e-9, atol=1e-11)
    scale = max(np.abs(solo_reg.value).max(), 1.0)
    assert np.abs(got[("-", -1)][1].value - solo_reg.value).max() < 1e-7 * scale


# -- guards and numerics ---------------------------------------------------------


def test_outgoing_rejects_start_inside_profile(ridge_profile):
    basis = small_basis("imaginary")
    with pytest.raises(ValueError, match="not numerically vacuum"):
        integrate_outgoing(ridge_profile, basis, 2.5, 0.0)
    with pytest.raises(ValueError, match="z_start >= z_fit"):
        integrate_outgoing(ridge_profile, basis, 4.6, 5.0)
    with pytest.raises(ValueError, match="positive"):
        integrate_regular("+", ridge_profile, basis, 0.0)


def test_tolerance_convergence(ridge_profile):
    basis = small_basis("imaginary", mag=0.7, kx0=0.2, ky0=0.3)
    tight = integrate_outgoing(ridge_profile, basis, 4.6, 0.0,
                               rtol=1e-11, atol=1e-13, method="DOP853")
    loose = integrate_outgoing(ridge_profile, basis, 4.6, 0.0,
                               rtol=1e-6, atol=1e-8)
    mid = integrate_outgoing(ridge_profile, basis, 4.6, 0.0,
                             rtol=1e-9, atol=1e-11)
    scale = np.abs(tight.value).max()
    err_loose = np.abs(loose.value - tight.value).max() / scale
    err_mid = np.abs(mid.value - tight.value).max() / scale
    assert err_mid < err_loose
    assert err_mid < 1e-8


def test_start_point_insensitivity_in_quiet_zone(ridge_profile):
    """Anywhere past the quiet zone the start point only multiplies noise;
    at moderate decay rates two choices two lengths apart must agree."""
    basis = small_basis("imaginary", mag=0.7, kx0=0.2, ky0=0.3)
    a = integrate_outgoing(ridge_profile, basis, 4.6, 0.0,
                           rtol=1e-10, atol=1e-12)
    b = integrate_outgoing(ridge_profile, basis, 6.6, 0.0,
                           rtol=1e-10, atol=1e-12)
    scale = np.abs(a.value).max()
    assert np.abs(a.value - b.value).max() < 1e-7 * scale


def test_max_step_threads_through(ridge_profile):
    basis = small_basis("imaginary", mag=0.7, kx0=0.2, ky0=0.3)
    capped = integrate_outgoing(ridge_profile, basis, 4.6, 0.0,
                                rtol=1e-9, atol=1e-11, max_step=0.1)
    free = integrate_outgoing(ridge_profile, basis, 4.6, 0.0,
                              rtol=1e-9, atol=1e-11)
    scale = np.abs(free.value).max()
    assert np.abs(capped.value - free.value).max() < 1e-8 * scale
