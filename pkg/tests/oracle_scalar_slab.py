"""Independent scalar oracle for smooth-slab reflection on the imaginary axis.

For an x-independent profile the vector problem splits per harmonic into two
scalar second-order equations in z (one per polarization), which this module
integrates directly as real first-order systems — no mode basis, no coupling
matrices, no Wronskian machinery.  Matching to decaying/growing exponentials
at the far edge gives the center-referenced reflection coefficient.

The TM coefficient is returned in the magnetic-field convention, which is
opposite in sign to the electric-field convention used by the scattering
pipeline; callers compare pipeline_TM against minus the oracle value.
"""

import numpy as np
from scipy.integrate import solve_ivp

from gratcas.profiles import eval_component


def smooth_slab_reflection(profile, kappa, krho, *, rtol=1e-12, atol=1e-16):
    """(r_TE, r_TM) of an x-independent profile at Wick-rotated frequency.

    kappa is the imaginary-frequency magnitude, krho the conserved lateral
    wavenumber of the harmonic under test.
    """
    q = float(np.sqrt(kappa**2 + krho**2))
    comp = profile.components[0]
    w = float(getattr(comp, "w", 0.0) or 0.0)
    s = float(getattr(comp, "s", 8.0) or 8.0)
    z0 = w + max(0.1, 34.0 / s)  # profile numerically dead beyond this

    def eps(z):
        return 1.0 + float(
            eval_component(profile, 0, 1j * kappa, np.array([z])).real[0]
        )

    def rhs_te(z, y):
        return [y[1], (krho**2 + kappa**2 * eps(z)) * y[0]]

    def rhs_tm(z, y):
        e = eps(z)
        return [e * y[1], (kappa**2 + krho**2 / e) * y[0]]

    out = []
    for rhs in (rhs_te, rhs_tm):
        sol = solve_ivp(rhs, (-z0, z0), [1.0, q], rtol=rtol, atol=atol,
                        method="DOP853", max_step=5.0 / s)
        if not sol.success:
            raise RuntimeError(f"oracle integration failed: {sol.message}")
        val, deriv = sol.y[0, -1], sol.y[1, -1]
        out.append(np.exp(2 * q * z0) * (q * val - deriv) / (q * val + deriv))
    return out[0], out[1]
