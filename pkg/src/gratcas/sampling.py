"""Randomized channel sampling for scattering health checks.

One draw fixes a (magnitude, kx0, ky0) triple that is exercised on both
frequency axes: on the real axis the propagating block of S must be unitary,
on either axis S must commute with the transverse projector and the
generalized Wronskian must not drift between fitting points.  The sampler
rejects draws whose checks are numerically unrepresentative rather than
wrong:

 - grazing channels (some harmonic's kz near zero), where the flux
   normalization 1/sqrt(kz) amplifies everything without bound;
 - propagating counts outside the wanted range;
 - draws whose deepest imaginary-axis harmonic exceeds q_edge_max: the
   inward integration tilts error onto the deepest harmonic like
   exp(2 q_edge (z_start - w)), so a cap on q_edge is a cap on the noise
   floor of the defect metrics.  Raising the truncation window or the
   magnitude range loosens what the checks can resolve, not their truth.

The structural checks (unitarity, commutation) hold at any truncation
window, so the sampler keeps the window small by default.
"""

from __future__ import annotations

import numpy as np

from .casimir import profile_half_width
from .modes import Frequency, build_basis
from .profiles import FourierProfile, quiet_zone_start
from .smatrix import channel_diagnostics

REAL_AXIS_NUMERICS = {"rtol": 1e-9, "atol": 1e-12, "method": "RK45"}
IMAG_AXIS_NUMERICS = {"rtol": 1e-12, "atol": 1e-15, "method": "DOP853"}


def draw_channels(n, seed, *, L=2 * np.pi, n_trunc=2,
                  magnitude_range=(1.05, 2.45), kx0_range=(-0.5, 0.5),
                  ky0_fraction=0.8, n_prop_range=(1, 5), grazing_tol=0.05,
                  q_edge_max=4.15, max_attempts=200_000):
    """n accepted (magnitude, kx0, ky0, n_prop) draws, deterministic in seed.

    The defaults are tuned for a unit reciprocal-lattice constant
    (L = 2*pi): they cover 1-5 propagating harmonics inside an |n| <= 2
    window while keeping the deepest evanescent harmonic under q_edge_max.
    """
    rng = np.random.default_rng(seed)
    K = 2 * np.pi / L
    harmonics = np.arange(-n_trunc, n_trunc + 1)
    out = []
    for _ in range(max_attempts):
        if len(out) >= n:
            break
        mag = rng.uniform(*magnitude_range)
        kx0 = rng.uniform(*kx0_range)
        ky0 = rng.uniform(0.0, ky0_fraction * mag)
        kx = kx0 + K * harmonics
        kz2 = mag**2 - kx**2 - ky0**2
        n_prop = int(np.sum(kz2 > 0))
        if not n_prop_range[0] <= n_prop <= n_prop_range[1]:
            continue
        if np.abs(kz2).min() < grazing_tol**2:
            continue
        q_edge = np.sqrt(mag**2 + (np.abs(kx0) + K * n_trunc)**2 + ky0**2)
        if q_edge > q_edge_max:
            continue
        out.append((float(mag), float(kx0), float(ky0), n_prop))
    if len(out) < n:
        raise RuntimeError(
            f"only {len(out)} of {n} draws accepted in {max_attempts} "
            f"attempts; the rejection rules and ranges are inconsistent")
    return out


def run_channel_diagnostics(profile: FourierProfile, draws, axis, *,
                            n_trunc=2, window_pad=0, z_start=None,
                            z_fit=None, numerics=None):
    """channel_diagnostics rows for every draw on one axis.

    numerics defaults to REAL_AXIS_NUMERICS / IMAG_AXIS_NUMERICS: defect
    targets of 1e-6 need tighter integration than energy production runs,
    and the inward run on the imaginary axis tilts noise onto the deepest
    harmonics, so that axis gets the high-order method and the tight rtol.
    """
    if axis not in ("real", "imaginary"):
        raise ValueError(f"axis must be 'real' or 'imaginary', got {axis!r}")
    base = REAL_AXIS_NUMERICS if axis == "real" else IMAG_AXIS_NUMERICS
    num = {**base, **(numerics or {})}
    if z_start is None:
        z_start = quiet_zone_start(profile)
    if z_fit is None:
        w = profile_half_width(profile)
        z_fit = w if w > 0 else 1.0
    rows = []
    for mag, kx0, ky0, n_prop in draws:
        basis = build_basis(Frequency(axis, mag), kx0, ky0, n_trunc,
                            profile.period_L)
        d = channel_diagnostics(profile, basis, z_start, z_fit,
                                num["rtol"], num["atol"],
                                window_pad=window_pad,
                                method=num["method"])
        rows.append({"axis": axis, "magnitude": mag, "kx0": kx0,
                     "ky0": ky0, "n_prop": n_prop, **d})
    return rows
