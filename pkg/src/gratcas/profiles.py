"""Periodic, z-symmetric dielectric profiles as Fourier components over x.

A profile is a set of Fourier components chi_n(k, z) of the deviation of the
dielectric function from vacuum,

    eps(k, x, z) = 1 + sum_n chi_n(k, z) exp(2*pi*i*n*x / L),

with chi_n -> 0 as |z| -> infinity and chi_n(k, z) = chi_n(k, -z).  Storing
the deviation keeps the troughs of a grating at physical vacuum (eps = 1) and
makes the large-|z| asymptotics exact.

All lengths are measured in a fixed reference length, wavenumbers in its
inverse; hbar = c = 1 throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline


class ProfileError(ValueError):
    """Invalid profile parameters or tables."""


def _split_logistic(t):
    """Stable pieces of the logistic 1/(1+e^t): returns (g, g*(1-g), 1-2g)."""
    t = np.asarray(t, dtype=float)
    u = np.exp(-np.abs(t))         # e^-t for t > 0, e^t for t <= 0
    g = np.where(t > 0, u / (1.0 + u), 1.0 / (1.0 + u))
    gg = u / (1.0 + u) ** 2        # g*(1-g), symmetric in t
    one_minus_2g = np.sign(t) * (1.0 - u) / (1.0 + u)
    return g, gg, one_minus_2g


@dataclass(frozen=True)
class FermiStepComponent:
    """One Fourier component coef * h / (1 + exp[s(|z| - w)]).

    Frequency-independent; the k argument is accepted for interface
    uniformity with dispersive components.
    """

    coef: float
    h: float
    w: float
    s: float

    def value(self, k, z):
        z = np.asarray(z, dtype=float)
        g, _, _ = _split_logistic(self.s * (np.abs(z) - self.w))
        return (self.coef * self.h) * g + 0j

    def dz(self, k, z):
        z = np.asarray(z, dtype=float)
        _, gg, _ = _split_logistic(self.s * (np.abs(z) - self.w))
        return (-self.coef * self.h * self.s) * np.sign(z) * gg + 0j

    def dzz(self, k, z):
        z = np.asarray(z, dtype=float)
        _, gg, m2g = _split_logistic(self.s * (np.abs(z) - self.w))
        # d/dz [-s*sign(z)*g(1-g)] = s^2 * sign(z)^2 * g(1-g)(1-2g)
        return (self.coef * self.h * self.s**2) * np.sign(z) ** 2 * gg * m2g + 0j


@dataclass(frozen=True)
class TabulatedComponent:
    """Component given by a table over z >= 0, evaluated at |z|.

    Cubic-spline interpolation (clamped to zero slope at z = 0 so the even
    extension is smooth); two analytic derivatives of the interpolant are
    exposed because the coupled-mode operator needs them.
    """

    z_grid: np.ndarray
    values: np.ndarray
    _spline: CubicSpline = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        z = np.asarray(self.z_grid, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if z.ndim != 1 or z.size < 4:
            raise ProfileError("tabulated component needs a 1D z grid with >= 4 points")
        if not np.all(np.diff(z) > 0):
            raise ProfileError("tabulated component z grid must be strictly ascending")
        if z[0] != 0.0:
            raise ProfileError("tabulated component z grid must start at 0")
        spline = CubicSpline(z, v, bc_type=((1, 0.0), "natural"))
        object.__setattr__(self, "z_grid", z)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_spline", spline)

    def value(self, k, z):
        return self._spline(np.abs(z)) + 0j

    def dz(self, k, z):
        z = np.asarray(z, dtype=float)
        return self._spline(np.abs(z), 1) * np.sign(z) + 0j

    def dzz(self, k, z):
        z = np.asarray(z, dtype=float)
        return self._spline(np.abs(z), 2) * np.sign(z) ** 2 + 0j


@dataclass(frozen=True)
class FourierProfile:
    """Fourier components of the deviation of eps from vacuum."""

    period_L: float
    components: dict

    def __post_init__(self):
        if self.period_L <= 0:
            raise ProfileError("period_L must be positive")

    @property
    def max_harmonic(self):
        return max((abs(n) for n in self.components), default=0)


@dataclass(frozen=True)
class FermiStepParams:
    """Grating of smoothed-step ridges: height h, half-width w, steepness s, period L."""

    h: float
    w: float
    s: float
    L: float

    def __post_init__(self):
        for name in ("h", "w", "s", "L"):
            if getattr(self, name) <= 0:
                raise ProfileError(f"FermiStepParams.{name} must be positive")


def fermi_step_profile(params: FermiStepParams) -> FourierProfile:
    """Three-component grating: chi_0 = 2*chi_1 = 2*chi_-1 = h/(1+exp[s(|z|-w)])."""
    comps = {
        0: FermiStepComponent(1.0, params.h, params.w, params.s),
        1: FermiStepComponent(0.5, params.h, params.w, params.s),
        -1: FermiStepComponent(0.5, params.h, params.w, params.s),
    }
    return FourierProfile(period_L=params.L, components=comps)


def uniform_slab_profile(eps_slab: float, w: float, s: float, L: float) -> FourierProfile:
    """x-independent smoothed slab: total eps rises from 1 to eps_slab for |z| < w."""
    if eps_slab <= 0 or w <= 0 or s <= 0 or L <= 0:
        raise ProfileError("uniform_slab_profile arguments must be positive")
    return FourierProfile(
        period_L=L, components={0: FermiStepComponent(1.0, eps_slab - 1.0, w, s)}
    )


def tabulated_profile(period_L: float, tables: dict) -> FourierProfile:
    """Profile from per-harmonic tables {n: (z_grid, values)} over z >= 0."""
    comps = {int(n): TabulatedComponent(z, v) for n, (z, v) in tables.items()}
    return FourierProfile(period_L=period_L, components=comps)


def vacuum_profile(L: float = 2 * np.pi) -> FourierProfile:
    return FourierProfile(period_L=L, components={})


def quiet_zone_start(profile: FourierProfile, k=1.0, tol=1e-13,
                     margin=0.5) -> float:
    """Smallest z (plus margin) beyond which the profile is numerically vacuum.

    Integrations of the scattering problem should start here and no farther
    out: the incoming solution family is exponentially unstable toward
    decreasing z, so every extra vacuum length ell multiplies roundoff noise
    by exp(2 q ell) per mode, while starting inside the tail injects the
    neglected dielectric into the boundary data.  The returned point balances
    the two at the tol level.
    """
    hints = [1.0]
    for comp in profile.components.values():
        w = getattr(comp, "w", None)
        if w is not None:
            hints.append(float(w))
        zg = getattr(comp, "z_grid", None)
        if zg is not None:
            hints.append(float(zg[-1]))
    grid = np.arange(0.0, max(hints) + 24.0, 0.0625)
    total = np.zeros_like(grid)
    for n in profile.components:
        total += np.abs(eval_component(profile, n, k, grid))
    suffix = np.maximum.accumulate(total[::-1])[::-1]
    quiet = np.nonzero(suffix < tol)[0]
    z0 = grid[quiet[0]] if quiet.size else grid[-1]
    return float(z0 + margin)


def resolving_step(profile: FourierProfile) -> float:
    """Largest ODE step guaranteed to land inside every wall of the profile.

    Adaptive integrators can step clean over a feature much narrower than
    the trial step without the error estimator ever seeing it; capping the
    step at the narrowest feature width keeps the walls visible.  Returns
    inf when the profile carries no steepness information.
    """
    s_max = 0.0
    for comp in profile.components.values():
        s = getattr(comp, "s", None)
        if s is not None:
            s_max = max(s_max, float(s))
        else:
            zg = getattr(comp, "z_grid", None)
            if zg is not None and len(zg) > 1:
                s_max = max(s_max, 1.0 / float(np.diff(zg).min()))
    return 10.0 / s_max if s_max > 0 else float("inf")


def eval_component(profile: FourierProfile, n: int, k, z):
    """Deviation component chi_n(k, z); 0 for unstored n."""
    comp = profile.components.get(n)
    if comp is None:
        return np.zeros_like(np.asarray(z, dtype=float)) + 0j
    return comp.value(k, z)


def eval_component_dz(profile: FourierProfile, n: int, k, z):
    """Analytic d/dz of eval_component."""
    comp = profile.components.get(n)
    if comp is None:
        return np.zeros_like(np.asarray(z, dtype=float)) + 0j
    return comp.dz(k, z)


def eval_component_dzz(profile: FourierProfile, n: int, k, z):
    """Analytic d^2/dz^2 of eval_component (needed by the coupled-mode operator)."""
    comp = profile.components.get(n)
    if comp is None:
        return np.zeros_like(np.asarray(z, dtype=float)) + 0j
    return comp.dzz(k, z)


def eval_total(profile: FourierProfile, k, x, z):
    """Total dielectric 1 + sum_n chi_n(k,z) exp(2*pi*i*n*x/L)."""
    x = np.asarray(x, dtype=float)
    total = np.ones(np.broadcast(x, np.asarray(z, dtype=float)).shape, dtype=complex)
    for n, comp in profile.components.items():
        total += comp.value(k, z) * np.exp(2j * np.pi * n * x / profile.period_L)
    return total
