"""Real-space pseudospectral oracle for the coupled-mode operator.

Applies  curl curl E - eps * grad[div(eps E)] - k^2 eps E  to a smooth trial
Bloch field directly: the dielectric and the field are sampled on a uniform
x-grid over one period (all products are band-limited, so grid products are
exact), x-derivatives act via FFT with Bloch-shifted wavenumbers, and every
z-derivative is taken by 8th-order central finite differences on a stencil of
heights.  Nothing here shares code with the spectral assembly beyond the
profile evaluation itself.
"""

import numpy as np
from numpy.polynomial import polynomial as P

from gratcas.profiles import eval_total

# 9-point central weights (order 8) for d/dz and d2/dz2
FD1 = np.array([3, -32, 168, -672, 0, 672, -168, 32, -3], float) / 840.0
FD2 = np.array([-9, 128, -1008, 8064, -14350, 8064, -1008, 128, -9],
               float) / 5040.0


class TrialField:
    """Polynomial-times-Gaussian harmonic coefficients with exact derivatives."""

    def __init__(self, rng, n_trunc, degree=3, decay=0.25, scale=1.0):
        nh = 2 * n_trunc + 1
        self.n_trunc = n_trunc
        self.decay = decay
        self.coef = scale * (rng.standard_normal((nh, 3, degree + 1))
                             + 1j * rng.standard_normal((nh, 3, degree + 1)))

    def coeffs(self, z, deriv=0):
        """F_{n,c}(z) (or its z-derivative) as an (nh, 3) array."""
        lam = self.decay
        out = np.empty(self.coef.shape[:2], dtype=complex)
        for idx in np.ndindex(*self.coef.shape[:2]):
            c = self.coef[idx]
            for _ in range(deriv):
                # d/dz [p(z) e^{-lam z^2}] -> (p' - 2 lam z p) e^{-lam z^2}
                d = np.concatenate([P.polyder(c), [0.0, 0.0]])
                c = d - 2 * lam * P.polymulx(c)
            out[idx] = P.polyval(z, c)
        return out * np.exp(-lam * z * z)

    def grid_values(self, kx_list_offsets, x, z):
        """Periodic part of E on the x-grid: (3, nx) at height z."""
        f = self.coeffs(z)                      # (nh, 3)
        phase = np.exp(1j * np.outer(kx_list_offsets, x))   # (nh, nx)
        return f.T @ phase                      # (3, nx)


def apply_operator(profile, basis, field, z, nx=64, dz=0.01):
    """Harmonic coefficients of the operator applied to the trial field at z.

    Returns a flat (dim,) vector in the basis ordering 3*(n+N)+c.
    """
    L = profile.period_L
    k = basis.k
    ky = basis.ky0
    n_tr = basis.n_trunc
    x = np.arange(nx) * (L / nx)
    offsets = 2 * np.pi * np.arange(-n_tr, n_tr + 1) / L  # kx_n - kx0
    kx_fft = basis.kx0 + 2 * np.pi * np.fft.fftfreq(nx, d=L / nx)

    def DX(u):
        # x-derivative of the full Bloch field, acting on periodic parts
        return np.fft.ifft(1j * kx_fft * np.fft.fft(u, axis=-1), axis=-1)

    def window_fd(vals, w, h):
        # vals (17, ...): derivative at the 9 interior heights
        return np.stack([np.tensordot(w, vals[j:j + 9], axes=(0, 0))
                         for j in range(9)]) / h

    def center_fd(vals9, w, h):
        return np.tensordot(w, vals9, axes=(0, 0)) / h

    zs = z + dz * np.arange(-8, 9)
    eps = np.stack([eval_total(profile, k, x, zz) for zz in zs])  # (17, nx)
    E = np.stack([field.grid_values(offsets, x, zz) for zz in zs])  # (17,3,nx)

    # term 1: curl curl E, needs E' on the interior stencil
    Ep = window_fd(E, FD1, dz)                                   # (9, 3, nx)
    Ei = E[4:13]
    C = np.empty_like(Ei)
    C[:, 0] = 1j * ky * Ei[:, 2] - Ep[:, 1]
    C[:, 1] = Ep[:, 0] - DX(Ei[:, 2])
    C[:, 2] = DX(Ei[:, 1]) - 1j * ky * Ei[:, 0]
    Cp = center_fd(C, FD1, dz)                                   # (3, nx)
    Cc = C[4]
    curlcurl = np.empty_like(Cc)
    curlcurl[0] = 1j * ky * Cc[2] - Cp[1]
    curlcurl[1] = Cp[0] - DX(Cc[2])
    curlcurl[2] = DX(Cc[1]) - 1j * ky * Cc[0]

    # term 2: eps * grad[div(eps E)]
    epsE = eps[:, None, :] * E
    div = DX(epsE[4:13, 0]) + 1j * ky * epsE[4:13, 1] \
        + window_fd(epsE[:, 2], FD1, dz)                         # (9, nx)
    graddiv = np.stack([DX(div[4]), 1j * ky * div[4],
                        center_fd(div, FD1, dz)])
    term2 = eps[8] * graddiv

    # term 3: k^2 eps E
    term3 = (k * k) * eps[8] * E[8]

    R = curlcurl - term2 - term3                                 # (3, nx)
    spec = np.fft.fft(R, axis=-1) / nx
    # FFT bins are indexed mod nx; negative harmonics wrap around
    coeff = spec[:, np.arange(-n_tr, n_tr + 1) % nx]
    return coeff.T.reshape(-1)


def system_residual(field, z):
    """F, F', F'' of the trial field at z, flattened to basis ordering."""
    f = field.coeffs(z).reshape(-1)
    fp = field.coeffs(z, 1).reshape(-1)
    fpp = field.coeffs(z, 2).reshape(-1)
    return f, fp, fpp
