"""Analytic reflection of a homogeneous dielectric slab (sharp steps).

A slab of dielectric constant eps and half-width w centered at z = 0 has the
Fabry-Perot summed Fresnel reflection, referenced to the center plane,

    r_TE = +G_TE (1 - e^{4 i beta w}) / (1 - G_TE^2 e^{4 i beta w}) e^{-2 i kz w}
    r_TM = -G_TM (1 - e^{4 i beta w}) / (1 - G_TM^2 e^{4 i beta w}) e^{-2 i kz w}

with the interface coefficients

    G_TE = (kz - beta) / (kz + beta),   G_TM = (eps kz - beta) / (eps kz + beta),

where beta is the perpendicular wavenumber inside the slab.  Everything is
analytic in k, so imaginary-axis values follow from the same formulas with
k = i kappa, kz = i q (principal square roots keep Im beta >= 0 there).

The center-plane reference factor e^{-2 i kz w} matches the convention of the
grating pipeline, whose profiles are centered at z = 0 as well.
"""

from __future__ import annotations

import numpy as np


def slab_reflection(eps_slab: float, w: float, k, kz):
    """(r_TE, r_TM) of the sharp slab for perpendicular wavenumber kz."""
    if eps_slab <= 1:
        raise ValueError("slab dielectric constant must exceed 1")
    k = np.asarray(k, dtype=complex)
    kz = np.asarray(kz, dtype=complex)
    cos_t = np.sqrt(1 - (1 - (kz / k) ** 2) / eps_slab)
    beta = k * np.sqrt(eps_slab) * cos_t
    phase = np.exp(4j * beta * w)
    ref = np.exp(-2j * kz * w)
    out = []
    for gamma, sgn in (((kz - beta) / (kz + beta), 1.0),
                       ((eps_slab * kz - beta) / (eps_slab * kz + beta),
                        -1.0)):
        out.append(sgn * gamma * (1 - phase) / (1 - gamma ** 2 * phase) * ref)
    return out[0], out[1]


def slab_smatrix_te(eps_slab: float, w: float, k, kz):
    """Parity S-matrix eigenvalues (S_+, S_-) of the sharp slab, TE.

    From matching cos/sin interior solutions to the exterior scattering
    combinations (conventions fixed by (S_+ - S_-)/2 = r_TE):
    even channel  S_+ = e^{-2 i kz w} (i kz - beta tan beta w)/(i kz + beta tan beta w),
    odd  channel  S_- = e^{-2 i kz w} (beta cot beta w + i kz)/(beta cot beta w - i kz).
    """
    k = complex(k)
    kz = complex(kz)
    beta = k * np.sqrt(eps_slab) * np.sqrt(1 - (1 - (kz / k) ** 2) / eps_slab)
    ref = np.exp(-2j * kz * w)
    t = beta * np.tan(beta * w)
    c = beta / np.tan(beta * w)
    return (ref * (1j * kz - t) / (1j * kz + t),
            ref * (c + 1j * kz) / (c - 1j * kz))
