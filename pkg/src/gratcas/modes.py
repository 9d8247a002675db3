"""Coupled-channel mode basis for a (frequency, kx0, ky0) scattering channel.

Channels are labeled by a Bloch momentum kx0 in [-pi/L, pi/L] and ky0 >= 0.
The basis spans Fourier harmonics n in [-N, N] with k_x = kx0 + 2*pi*n/L and
three vector components per harmonic, flattened as index = 3*(n + N) + c with
component order (x, y, z).

Branch rules for k_z:
  real axis:      k_z = sqrt(k^2 - k_x^2 - k_y^2) > 0 propagating,
                  k_z = i*|...|  evanescent;
  imaginary axis: k = i*kappa, k_z = i*sqrt(kappa^2 + k_x^2 + k_y^2), so that
                  exp(i k_z dz) decays for dz > 0.
A frequency sign of -1 negates k and every k_z entry (both signs are needed
to assemble the generalized Wronskian).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

COMPONENTS = ("x", "y", "z")


class GrazingModeError(ValueError):
    """A real-axis harmonic sits exactly at the propagation threshold (k_z = 0).

    Callers should perturb the frequency or transverse momentum node.
    """


@dataclass(frozen=True)
class Frequency:
    axis: str          # "real" | "imaginary"
    magnitude: float   # k on the real axis, kappa on the imaginary axis
    sign: int = 1

    def __post_init__(self):
        if self.axis not in ("real", "imaginary"):
            raise ValueError(f"unknown frequency axis {self.axis!r}")
        if not self.magnitude > 0:
            raise ValueError("frequency magnitude must be positive")
        if self.sign not in (-1, 1):
            raise ValueError("frequency sign must be +1 or -1")

    @property
    def k(self) -> complex:
        k0 = self.sign * self.magnitude
        return complex(k0) if self.axis == "real" else 1j * k0

    def flipped(self) -> "Frequency":
        return replace(self, sign=-self.sign)


@dataclass(frozen=True)
class ModeBasis:
    frequency: Frequency
    kx0: float
    ky0: float
    n_trunc: int
    L: float
    kx_list: np.ndarray     # (2N+1,) real
    kz_harm: np.ndarray     # (2N+1,) complex, signed
    kz_diag: np.ndarray     # (dim,) complex, kz_harm repeated per component
    M_diag: np.ndarray      # (dim,) +1 on x,y rows, -1 on z rows
    Nflux_diag: np.ndarray  # (dim,) sqrt(k/k_z)

    @property
    def dim(self) -> int:
        return 3 * (2 * self.n_trunc + 1)

    @property
    def harmonics(self) -> np.ndarray:
        return np.arange(-self.n_trunc, self.n_trunc + 1)

    @property
    def k(self) -> complex:
        return self.frequency.k

    def flipped(self) -> "ModeBasis":
        return build_basis(self.frequency.flipped(), self.kx0, self.ky0,
                           self.n_trunc, self.L)


@dataclass(frozen=True)
class TransverseBasis:
    """Asymptotic TE/TM columns per harmonic, and the longitudinal directions.

    T has shape (dim, 2*(2N+1)) with column order (TE_n, TM_n) grouped by
    harmonic.  The columns are orthonormal under the unconjugated bilinear
    pairing for every k_z branch, so T itself also serves as the dual basis:
    T.T @ T = identity exactly.
    """

    T: np.ndarray
    L_dirs: np.ndarray      # (dim, 2N+1) longitudinal columns


def _mode_vectors(k: complex, kx: float, ky: float, kz: complex):
    """TE, TM and longitudinal 3-vectors for one harmonic."""
    rho2 = kx * kx + ky * ky
    if rho2 == 0.0:
        # ky -> 0+ limit at kx = 0; kz/k = 1 in every branch here.
        return (np.array([1, 0, 0], dtype=complex),
                np.array([0, 1, 0], dtype=complex),
                np.array([0, 0, 1], dtype=complex))
    rho = np.sqrt(rho2)
    te = np.array([ky / rho, -kx / rho, 0.0], dtype=complex)
    tm = np.array([kz * kx, kz * ky, -rho2], dtype=complex) / (k * rho)
    lng = np.array([kx, ky, kz], dtype=complex) / k
    return te, tm, lng


def build_basis(frequency: Frequency, kx0: float, ky0: float,
                n_trunc: int, L: float) -> ModeBasis:
    """Assemble the channel basis and its diagonal matrices."""
    if L <= 0:
        raise ValueError("period L must be positive")
    if abs(kx0) > np.pi / L * (1 + 1e-12):
        raise ValueError("kx0 outside the first Brillouin zone")
    if ky0 < 0:
        raise ValueError("ky0 must be >= 0")
    if n_trunc < 0:
        raise ValueError("n_trunc must be >= 0")

    n = np.arange(-n_trunc, n_trunc + 1)
    kx = kx0 + 2 * np.pi * n / L
    mag = frequency.magnitude
    if frequency.axis == "real":
        kz2 = mag * mag - kx * kx - ky0 * ky0
        if np.any(kz2 == 0.0):
            raise GrazingModeError(
                f"k_z = 0 exactly for harmonics {n[kz2 == 0.0].tolist()} at "
                f"k={mag}, kx0={kx0}, ky0={ky0}; perturb the node")
        kz = np.where(kz2 > 0, np.sqrt(np.abs(kz2)) + 0j,
                      1j * np.sqrt(np.abs(kz2)))
    else:
        kz = 1j * np.sqrt(mag * mag + kx * kx + ky0 * ky0) + 0j
    kz = frequency.sign * kz

    dim = 3 * (2 * n_trunc + 1)
    kz_diag = np.repeat(kz, 3)
    m_diag = np.tile(np.array([1.0, 1.0, -1.0]), 2 * n_trunc + 1)
    nflux = np.repeat(np.sqrt(frequency.k / kz), 3)
    assert kz_diag.shape == (dim,)
    return ModeBasis(frequency=frequency, kx0=kx0, ky0=ky0, n_trunc=n_trunc,
                     L=L, kx_list=kx, kz_harm=kz, kz_diag=kz_diag,
                     M_diag=m_diag, Nflux_diag=nflux)


def propagating_mask(basis: ModeBasis) -> np.ndarray:
    """Boolean mask over harmonics with real positive k_z (real axis only)."""
    if basis.frequency.axis != "real":
        raise ValueError("propagating modes are defined on the real axis only")
    mag = basis.frequency.magnitude
    return basis.kx_list ** 2 + basis.ky0 ** 2 < mag * mag


def build_transverse(basis: ModeBasis) -> TransverseBasis:
    nh = 2 * basis.n_trunc + 1
    T = np.zeros((basis.dim, 2 * nh), dtype=complex)
    Ld = np.zeros((basis.dim, nh), dtype=complex)
    for i in range(nh):
        te, tm, lng = _mode_vectors(basis.k, basis.kx_list[i], basis.ky0,
                                    basis.kz_harm[i])
        T[3 * i:3 * i + 3, 2 * i] = te
        T[3 * i:3 * i + 3, 2 * i + 1] = tm
        Ld[3 * i:3 * i + 3, i] = lng
    return TransverseBasis(T=T, L_dirs=Ld)


def transverse_projector(basis: ModeBasis) -> np.ndarray:
    """P = 1 - sum_n L_n L_n^t: kills longitudinal columns, fixes TE/TM ones.

    Built with the unconjugated outer product; this is the unique projector
    satisfying P M = M, P N = N, P L = 0 on every k_z branch.
    """
    tb = build_transverse(basis)
    return np.eye(basis.dim, dtype=complex) - tb.L_dirs @ tb.L_dirs.T
