"""Coupling matrices of the vector Helmholtz system in the harmonic basis.

The electric field of a channel, E = sum_{n,c} F_{n,c}(z) e_c exp(i k_x x +
i k_y y), satisfies

    curl curl E - eps * grad[div(eps E)] - k^2 eps E = 0,

where the grad-div term (vanishing on physical solutions by the divergence
constraint) removes the singular second-derivative structure of curl curl.
Collecting harmonics turns this into a second-order ODE system

    -F'' + D1 F' + D0 F = 0

for the coefficient vector F(z).  Two assembly schemes are provided.  The
default ("matrix") keeps every product of profile functions as a product of
window-truncated Toeplitz matrices in its operator ordering, which preserves
the algebraic identities of the operator (notably closure of the div(eps E)
sector) exactly at finite truncation.  The alternative ("exact") assembles
each product as the exact discrete convolution of the deviation components;
its coefficient rows are exact for the untruncated operator but the
truncated system loses the closure identities at the window edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .modes import ModeBasis
from .profiles import FourierProfile


@dataclass(frozen=True)
class CouplingMatrices:
    D0: np.ndarray
    D1: np.ndarray
    D1_dz: np.ndarray
    evaluated_at: float


class CouplingAssembler:
    """Evaluates the coupling matrices of one (profile, basis) pair at any z.

    Precomputes index machinery so that repeated evaluation inside an ODE
    right-hand side stays cheap; build_coupling_matrices wraps a throwaway
    instance for one-off use.
    """

    def __init__(self, profile: FourierProfile, basis: ModeBasis,
                 scheme: str = "matrix"):
        if abs(profile.period_L - basis.L) > 1e-12 * basis.L:
            raise ValueError("profile and basis periods differ")
        if scheme not in ("matrix", "exact"):
            raise ValueError("scheme must be 'matrix' or 'exact'")
        self.profile = profile
        self.basis = basis
        self.scheme = scheme
        self.J = profile.max_harmonic
        self.nh = 2 * basis.n_trunc + 1
        self.dim = basis.dim

        harm = np.arange(-self.J, self.J + 1)
        self._gx = 1j * (2 * np.pi * harm / profile.period_L)  # d/dx multiplier
        self._gxx = -((2 * np.pi * harm / profile.period_L) ** 2)
        # unit (Kronecker delta) on the product support [-2J, 2J]
        self._unit = np.zeros(4 * self.J + 1, dtype=complex)
        self._unit[2 * self.J] = 1.0
        # Toeplitz gather indices into a padded component vector
        n = np.arange(self.nh)
        self._S = max(2 * self.J, self.nh - 1)
        self._diff_idx = (n[:, None] - n[None, :]) + self._S
        self._kx = basis.kx_list
        self._ky = basis.ky0
        self._k2 = basis.k ** 2
        self._comps = sorted(profile.components.items())

    # -- component plumbing ------------------------------------------------

    def _component_arrays(self, z):
        """chi, chi', chi'' on the support [-J, J] at height z."""
        m = 2 * self.J + 1
        c = np.zeros(m, dtype=complex)
        cz = np.zeros(m, dtype=complex)
        czz = np.zeros(m, dtype=complex)
        k = self.basis.k
        for n, comp in self._comps:
            i = n + self.J
            c[i] = comp.value(k, z)
            cz[i] = comp.dz(k, z)
            czz[i] = comp.dzz(k, z)
        return c, cz, czz

    def _embed(self, v):
        """Place a support-[-J,J] array into the product support [-2J,2J]."""
        out = np.zeros(4 * self.J + 1, dtype=complex)
        out[self.J:3 * self.J + 1] = v
        return out

    def _toeplitz(self, v):
        """T[v]_{nm} = v_{n-m} for a component vector on [-2J, 2J]."""
        pad = np.zeros(2 * self._S + 1, dtype=complex)
        pad[self._S - 2 * self.J:self._S + 2 * self.J + 1] = v
        return pad[self._diff_idx]

    # -- assembly ----------------------------------------------------------

    def _raw_system(self, z):
        """A2, A1, A0 with A2 F'' + A1 F' + A0 F = 0 (unnormalized rows)."""
        c, cz, czz = self._component_arrays(z)
        gx, gxx = self._gx, self._gxx
        emb, T = self._embed, self._toeplitz
        conv = np.convolve

        eps_v = self._unit + emb(c)                       # eps
        eps2_v = self._unit + emb(2 * c) + conv(c, c)     # eps^2
        epsz_v = emb(cz) + conv(c, cz)                    # eps deps/dz
        epszz_v = emb(czz) + conv(c, czz)                 # eps d2eps/dz2
        epsx_v = emb(gx * c) + conv(c, gx * c)            # eps deps/dx
        epsxx_v = emb(gxx * c) + conv(c, gxx * c)         # eps d2eps/dx2
        epsxz_v = emb(gx * cz) + conv(c, gx * cz)         # eps d2eps/dxdz

        kx, ky, k2 = self._kx, self._ky, self._k2
        nh, dim = self.nh, self.dim
        I = np.eye(nh, dtype=complex)
        Teps = T(eps_v)
        Teps2 = T(eps2_v)
        Tepsz = T(epsz_v)
        Tepsx = T(epsx_v)

        A2 = np.zeros((dim, dim), dtype=complex)
        A1 = np.zeros((dim, dim), dtype=complex)
        A0 = np.zeros((dim, dim), dtype=complex)

        A2[0::3, 0::3] = -I
        A2[1::3, 1::3] = -I
        A2[2::3, 2::3] = -Teps2

        xz1 = 1j * np.diag(kx).astype(complex) - 1j * Teps2 * kx[None, :] - Tepsx
        yz1 = 1j * ky * (I - Teps2)
        A1[0::3, 2::3] = xz1
        A1[1::3, 2::3] = yz1
        A1[2::3, 0::3] = xz1
        A1[2::3, 1::3] = yz1
        A1[2::3, 2::3] = -2 * Tepsz

        xy0 = (-ky) * np.diag(kx).astype(complex) + ky * Teps2 * kx[None, :] \
            - 1j * ky * Tepsx
        xz0 = -1j * Tepsz * kx[None, :] - T(epsxz_v)
        yz0 = -1j * ky * Tepsz
        A0[0::3, 0::3] = (ky ** 2) * I + Teps2 * (kx ** 2)[None, :] \
            - 2j * Tepsx * kx[None, :] - T(epsxx_v) - k2 * Teps
        A0[0::3, 1::3] = xy0
        A0[1::3, 0::3] = xy0
        A0[0::3, 2::3] = xz0
        A0[2::3, 0::3] = xz0
        A0[1::3, 1::3] = np.diag(kx ** 2).astype(complex) + (ky ** 2) * Teps2 \
            - k2 * Teps
        A0[1::3, 2::3] = yz0
        A0[2::3, 1::3] = yz0
        A0[2::3, 2::3] = np.diag(kx ** 2).astype(complex) + (ky ** 2) * I \
            - T(epszz_v) - k2 * Teps

        return A2, A1, A0, (c, cz, czz, eps2_v, epsz_v, Teps2)

    def _matrix_system(self, z):
        """Assemble from window-truncated Toeplitz factors of eps and its
        z-derivatives, with x-derivatives as the diagonal harmonic multiplier.

        Every product keeps its operator ordering as a matrix product, so
        identities of the continuum operator (in particular the closure of
        the div(eps E) sector, which keeps transverse and longitudinal
        solutions from mixing) hold exactly for the truncated system instead
        of only up to window-edge convolution errors.
        """
        c, cz, czz = self._component_arrays(z)
        emb, T = self._embed, self._toeplitz
        kx, ky, k2 = self._kx, self._ky, self._k2
        nh, dim = self.nh, self.dim

        I = np.eye(nh, dtype=complex)
        E = I + T(emb(c))
        Z = T(emb(cz))
        ZZ = T(emb(czz))
        Dx = 1j * np.diag(kx).astype(complex)
        Kx2 = np.diag(kx ** 2).astype(complex)

        EE = E @ E
        EZ = E @ Z
        EDxE = E @ Dx @ E
        EDxZ = E @ Dx @ Z

        A2 = np.zeros((dim, dim), dtype=complex)
        A1 = np.zeros((dim, dim), dtype=complex)
        A0 = np.zeros((dim, dim), dtype=complex)

        A2[0::3, 0::3] = -I
        A2[1::3, 1::3] = -I
        A2[2::3, 2::3] = -EE

        xz1 = Dx - EDxE
        yz1 = 1j * ky * (I - EE)
        A1[0::3, 2::3] = xz1
        A1[1::3, 2::3] = yz1
        A1[2::3, 0::3] = xz1
        A1[2::3, 1::3] = yz1
        A1[2::3, 2::3] = -2 * EZ

        xy0 = 1j * ky * xz1
        xz0 = -EDxZ
        yz0 = -1j * ky * EZ
        A0[0::3, 0::3] = (ky ** 2) * I + E @ Kx2 @ E - k2 * E
        A0[0::3, 1::3] = xy0
        A0[1::3, 0::3] = xy0
        A0[0::3, 2::3] = xz0
        A0[2::3, 0::3] = xz0
        A0[1::3, 1::3] = Kx2 + (ky ** 2) * EE - k2 * E
        A0[1::3, 2::3] = yz0
        A0[2::3, 1::3] = yz0
        A0[2::3, 2::3] = Kx2 + (ky ** 2) * I - E @ ZZ - k2 * E

        # z-derivatives of the A1 blocks (analytic)
        dEE = Z @ E + E @ Z
        dEZ = Z @ Z + E @ ZZ
        d_xz1 = -(Z @ Dx @ E + E @ Dx @ Z)
        d_yz1 = -1j * ky * dEE

        dA1 = np.zeros((dim, dim), dtype=complex)
        dA1[0::3, 2::3] = d_xz1
        dA1[1::3, 2::3] = d_yz1
        dA1[2::3, 0::3] = d_xz1
        dA1[2::3, 1::3] = d_yz1
        dA1[2::3, 2::3] = -2 * dEZ

        return A2, A1, A0, dA1, EE, dEE

    def __call__(self, z) -> CouplingMatrices:
        z = float(z)
        if not self._comps:
            zero = np.zeros((self.dim, self.dim), dtype=complex)
            D0 = np.diag(-self.basis.kz_diag ** 2)
            return CouplingMatrices(D0=D0, D1=zero, D1_dz=zero.copy(),
                                    evaluated_at=z)
        if self.scheme == "matrix":
            _, A1, A0, dA1, EE, dEE = self._matrix_system(z)
            lu = lu_factor(EE)
            D1 = A1.copy()
            D0 = A0.copy()
            D1[2::3, :] = lu_solve(lu, A1[2::3, :])
            D0[2::3, :] = lu_solve(lu, A0[2::3, :])
            D1_dz = dA1
            D1_dz[2::3, :] = lu_solve(lu, dA1[2::3, :] - dEE @ D1[2::3, :])
            return CouplingMatrices(D0=D0, D1=D1, D1_dz=D1_dz,
                                    evaluated_at=z)

        _, A1, A0, (c, cz, czz, eps2_v, epsz_v, Teps2) = self._raw_system(z)
        gx = self._gx
        emb, T = self._embed, self._toeplitz
        conv = np.convolve
        kx, ky = self._kx, self._ky

        # z-derivatives of the A1 product vectors (analytic, not FD)
        d_eps2_v = 2 * epsz_v
        d_epsx_v = emb(gx * cz) + conv(cz, gx * c) + conv(c, gx * cz)
        d_epsz_v = emb(czz) + conv(cz, cz) + conv(c, czz)

        Td_eps2 = T(d_eps2_v)
        d_xz1 = -1j * Td_eps2 * kx[None, :] - T(d_epsx_v)
        d_yz1 = -1j * ky * Td_eps2

        dim = self.dim
        dA1 = np.zeros((dim, dim), dtype=complex)
        dA1[0::3, 2::3] = d_xz1
        dA1[1::3, 2::3] = d_yz1
        dA1[2::3, 0::3] = d_xz1
        dA1[2::3, 1::3] = d_yz1
        dA1[2::3, 2::3] = -2 * T(d_epsz_v)

        # normalize: divide z rows by eps^2 (x, y rows already have -F'')
        lu = lu_factor(Teps2)
        D1 = A1.copy()
        D0 = A0.copy()
        D1[2::3, :] = lu_solve(lu, A1[2::3, :])
        D0[2::3, :] = lu_solve(lu, A0[2::3, :])
        D1_dz = dA1
        # d/dz [Teps2^{-1} A1z] = Teps2^{-1} (dA1z - d(Teps2) D1z)
        D1_dz[2::3, :] = lu_solve(lu, dA1[2::3, :] - Td_eps2 @ D1[2::3, :])
        return CouplingMatrices(D0=D0, D1=D1, D1_dz=D1_dz, evaluated_at=z)


def build_coupling_matrices(profile: FourierProfile, basis: ModeBasis,
                            z, scheme: str = "matrix") -> CouplingMatrices:
    """One-off evaluation; see CouplingAssembler for the repeated-use path."""
    return CouplingAssembler(profile, basis, scheme=scheme)(z)
