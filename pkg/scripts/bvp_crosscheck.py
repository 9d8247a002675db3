"""Cross-check one S-matrix column against a direct BVP solve.

The variable-phase pipeline extracts S from matrix ODE solutions and a
Wronskian.  This script solves the same truncated second-order system as a
two-point boundary value problem instead: parity conditions at z = 0 and a
radiation condition at z_end with a unit incoming wave in one mode slot, and
reads the outgoing amplitudes off the boundary values.  Agreement validates
the pipeline through an entirely different numerical route.
"""

import numpy as np
from scipy.integrate import solve_bvp

from gratcas.coupling import CouplingAssembler
from gratcas.modes import Frequency, build_basis
from gratcas.profiles import fermi_step_profile, FermiStepParams
from gratcas.smatrix import scattering_for_channel


def bvp_column(profile, basis, parity, j_in, z_end, tol=1e-9):
    """Column S[:, j_in] of the parity S-matrix via solve_bvp."""
    dim = basis.dim
    asm = CouplingAssembler(profile, basis)
    kz = basis.kz_diag
    sigma = 1 if parity == "+" else -1
    a_in = np.sqrt(basis.k / kz[j_in])
    mu = np.where(basis.M_diag > 0, 1.0, -1.0)
    # component parity of F at z=0 for this channel: x,y carry sigma, z carries -sigma
    even = (mu if sigma == 1 else -mu) > 0

    def split(y):
        F = y[:dim] + 1j * y[dim:2 * dim]
        Fp = y[2 * dim:3 * dim] + 1j * y[3 * dim:]
        return F, Fp

    cm_cache = {}

    def coeffs(zz):
        key = float(zz)
        if key not in cm_cache:
            cm = asm(key)
            cm_cache[key] = (cm.D0.copy(), cm.D1.copy())
        return cm_cache[key]

    def fun(z, y):
        out = np.empty_like(y)
        for i, zz in enumerate(np.atleast_1d(z)):
            D0, D1 = coeffs(zz)
            F, Fp = split(y[:, i])
            Fpp = D1 @ Fp + D0 @ F
            out[:dim, i] = y[2 * dim:3 * dim, i]
            out[dim:2 * dim, i] = y[3 * dim:, i]
            out[2 * dim:3 * dim, i] = Fpp.real
            out[3 * dim:, i] = Fpp.imag
        return out

    def fun_jac(z, y):
        # the system is linear: df/dy is y-independent, built from the
        # real/imaginary blocks of D0 and D1
        m = np.atleast_1d(z).size
        J = np.zeros((4 * dim, 4 * dim, m))
        eye = np.eye(dim)
        for i, zz in enumerate(np.atleast_1d(z)):
            D0, D1 = coeffs(zz)
            J[:dim, 2 * dim:3 * dim, i] = eye
            J[dim:2 * dim, 3 * dim:, i] = eye
            J[2 * dim:3 * dim, :dim, i] = D0.real
            J[2 * dim:3 * dim, dim:2 * dim, i] = -D0.imag
            J[2 * dim:3 * dim, 2 * dim:3 * dim, i] = D1.real
            J[2 * dim:3 * dim, 3 * dim:, i] = -D1.imag
            J[3 * dim:, :dim, i] = D0.imag
            J[3 * dim:, dim:2 * dim, i] = D0.real
            J[3 * dim:, 2 * dim:3 * dim, i] = D1.imag
            J[3 * dim:, 3 * dim:, i] = D1.real
        return J

    def bc(ya, yb):
        F0, Fp0 = split(ya)
        r0 = np.where(even, Fp0, F0)
        Fe, Fpe = split(yb)
        re = Fpe - 1j * kz * Fe
        re[j_in] += 2j * kz[j_in] * a_in * np.exp(-1j * kz[j_in] * z_end)
        return np.concatenate([r0.real, r0.imag, re.real, re.imag])

    def bc_jac(ya, yb):
        dya = np.zeros((4 * dim, 4 * dim))
        dyb = np.zeros((4 * dim, 4 * dim))
        for i in range(dim):
            if even[i]:
                dya[i, 2 * dim + i] = 1.0
                dya[dim + i, 3 * dim + i] = 1.0
            else:
                dya[i, i] = 1.0
                dya[dim + i, dim + i] = 1.0
            dyb[2 * dim + i, 2 * dim + i] = 1.0
            dyb[2 * dim + i, i] = kz[i].imag
            dyb[2 * dim + i, dim + i] = kz[i].real
            dyb[3 * dim + i, 3 * dim + i] = 1.0
            dyb[3 * dim + i, i] = -kz[i].real
            dyb[3 * dim + i, dim + i] = kz[i].imag
        return dya, dyb

    mesh = np.unique(np.concatenate([
        np.linspace(0.0, 1.5, 60), np.linspace(1.5, 2.5, 200),
        np.linspace(2.5, z_end, 60)]))
    sol = solve_bvp(fun, bc, mesh, np.zeros((4 * dim, mesh.size)),
                    tol=tol, max_nodes=120000, fun_jac=fun_jac,
                    bc_jac=bc_jac, verbose=0)
    if sol.status != 0:
        raise RuntimeError(f"solve_bvp failed: {sol.message}")
    F, _ = split(sol.sol(z_end))
    b = np.exp(-1j * kz * z_end) * F
    b[j_in] -= np.exp(-2j * kz[j_in] * z_end) * a_in
    return sigma * mu * np.sqrt(kz / basis.k) * b, sol


def main():
    L = 2 * np.pi
    prof = fermi_step_profile(FermiStepParams(h=2.0, w=2.0, s=16.0, L=L))
    basis = build_basis(Frequency("real", 2.68), 0.48, 1.18, 2, L)
    res = scattering_for_channel(prof, basis, 4.0, rtol=1e-10,
                                 atol=1e-12)
    j_in = 3 * basis.n_trunc  # x slot of the n = 0 harmonic
    for parity, S in (("+", res.S_plus), ("-", res.S_minus)):
        col, sol = bvp_column(prof, basis, parity, j_in, 4.0, tol=1e-8)
        ref = S[:, j_in]
        print(f"parity {parity}: bvp nodes {sol.x.size}, "
              f"max|col| {np.abs(col).max():.3e}, "
              f"max diff {np.abs(col - ref).max():.3e}")
        for m in range(basis.dim):
            if max(abs(col[m]), abs(ref[m])) > 1e-8:
                print(f"  m={m:2d} (n={m // 3 - basis.n_trunc:+d},c={m % 3})"
                      f"  bvp {col[m]:+.6e}  pipe {ref[m]:+.6e}")


if __name__ == "__main__":
    main()
