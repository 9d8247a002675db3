"""Casimir interaction energy per unit area of two identical gratings.

The energy is an imaginary-frequency integral over channels,

    E/A = (hbar c / 4 pi^3) int_0^inf dkappa int_{-pi/L}^{pi/L} dkx0
          int_0^inf dky0  log det[1 - U(ikappa, kx0, ky0) rbar
                                    U(ikappa, -kx0, -ky0) rbar],

with rbar the transverse-projected grating reflection matrix of the channel
and U the diagonal translation matrix exp(i k . dr) between the grating
center planes.  The integrand is even in kx0, so kx0 runs over (0, pi/L]
with a factor 2.  The baseline is the same quadrature with the diagonal
Fresnel reflection of a uniform slab, which makes the energy ratio
insensitive to quadrature bias.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .fresnel import slab_reflection
from .modes import Frequency, ModeBasis, build_basis
from .profiles import FourierProfile, eval_component, quiet_zone_start
from .smatrix import IllConditionedWronskianError, scattering_for_channel

HALF_WIDTH_VACUUM_TOL = 1e-8


class IntegrandRealnessError(RuntimeError):
    """log det picked up an imaginary part beyond tolerance."""


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class GeometryConfig:
    """Separation of the grating center planes and lateral displacement."""

    delta_z: float
    delta_x: float = 0.0

    def __post_init__(self):
        if self.delta_z <= 0:
            raise GeometryError("delta_z must be positive")


@dataclass(frozen=True)
class QuadratureSpec:
    """Node layout of the three-axis imaginary-frequency quadrature.

    kappa and ky run over [min, max] split into n_panels geometric panels
    (Gauss-Legendre nodes per panel); kx0 runs over a single panel (0, pi/L]
    and carries the evenness factor 2.  rule="trapezoid" replaces the panels
    with uniform trapezoid nodes on the same intervals.
    """

    kappa_min: float = 0.0078125
    kappa_max: float = 2.5
    ky_min: float = 0.0078125
    ky_max: float = 2.5
    n_kappa: int = 16
    n_kx: int = 4
    n_ky: int = 16
    rule: str = "gauss_legendre_panels"
    n_panels: int = 4

    def __post_init__(self):
        if self.rule not in ("gauss_legendre_panels", "trapezoid"):
            raise ValueError(f"unknown quadrature rule: {self.rule!r}")
        for name in ("n_kappa", "n_kx", "n_ky"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2")
        if not (0 < self.kappa_min < self.kappa_max):
            raise ValueError("need 0 < kappa_min < kappa_max")
        if not (0 < self.ky_min < self.ky_max):
            raise ValueError("need 0 < ky_min < ky_max")
        if self.rule == "gauss_legendre_panels" and (
                self.n_kappa % self.n_panels or self.n_ky % self.n_panels):
            raise ValueError("n_kappa and n_ky must be divisible by n_panels")


@dataclass(frozen=True)
class SweepRow:
    delta_z: float
    delta_x: float
    energy: float
    slab_energy: float
    ratio: float
    est_error: float


@dataclass
class EnergySweepResult:
    rows: list
    metadata: dict = field(default_factory=dict)


def profile_half_width(profile: FourierProfile) -> float:
    """Half-width of the profile's numerically non-vacuum support."""
    widths = [0.0]
    for comp in profile.components.values():
        w = getattr(comp, "w", None)
        if w is not None:
            widths.append(float(w))
            continue
        zg = getattr(comp, "z_grid", None)
        if zg is not None:
            vals = np.abs(comp.value(1.0, zg))
            nz = np.nonzero(vals >= HALF_WIDTH_VACUUM_TOL)[0]
            if nz.size:
                widths.append(float(zg[nz[-1]]))
    return max(widths)


def validate_geometry(geometry: GeometryConfig, profile: FourierProfile,
                      margin: float = 1.0):
    """delta_z must exceed the combined profile supports; warn when close."""
    w = profile_half_width(profile)
    if geometry.delta_z <= 2 * w:
        raise GeometryError(
            f"delta_z={geometry.delta_z} does not separate the gratings: "
            f"profile supports reach half-width {w}")
    if geometry.delta_z <= 2 * w + margin:
        warnings.warn(
            f"delta_z={geometry.delta_z} is within {margin} of the combined "
            f"profile support 2w={2 * w}; exponential tails may overlap",
            stacklevel=2)


def _gauss_panel(lo, hi, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return (lo + (hi - lo) * (x + 1) / 2), w * (hi - lo) / 2


def _panel_edges(lo, hi, n_panels):
    r = (hi / lo) ** (1.0 / n_panels)
    return [lo * r ** j for j in range(n_panels + 1)]


def axis_nodes(lo, hi, n, rule, n_panels=4):
    """Quadrature nodes and weights on [lo, hi] for one axis."""
    if rule == "trapezoid":
        x = np.linspace(lo, hi, n)
        w = np.full(n, (hi - lo) / (n - 1))
        w[0] /= 2
        w[-1] /= 2
        return x, w
    per = n // n_panels
    edges = _panel_edges(lo, hi, n_panels)
    xs, ws = zip(*(_gauss_panel(edges[j], edges[j + 1], per)
                   for j in range(n_panels)))
    return np.concatenate(xs), np.concatenate(ws)


def quadrature_nodes(quadrature: QuadratureSpec, L: float):
    """(kappa, w), (kx0, w), (ky0, w) node arrays; kx0 weights carry the
    evenness factor 2."""
    q = quadrature
    kap = axis_nodes(q.kappa_min, q.kappa_max, q.n_kappa, q.rule, q.n_panels)
    ky = axis_nodes(q.ky_min, q.ky_max, q.n_ky, q.rule, q.n_panels)
    if q.rule == "trapezoid":
        kx, wx = axis_nodes(0.0, np.pi / L, q.n_kx, q.rule)
    else:
        kx, wx = _gauss_panel(0.0, np.pi / L, q.n_kx)
    return kap, (kx, 2 * wx), ky


@dataclass(frozen=True)
class ChannelReflection:
    """Geometry-independent per-node scattering data."""

    kappa: float
    kx0: float
    ky0: float
    kx_harm: np.ndarray     # lateral wavenumber per harmonic
    q_harm: np.ndarray      # evanescent decay rate per harmonic
    r_bar: np.ndarray       # transverse-projected reflection matrix
    n_window: int
    n_eval: int
    r_surface_max: float    # largest surface-referenced |r_bar| entry


R_SURFACE_BOUND = 10.0


def channel_reflection(profile: FourierProfile, kappa, kx0, ky0, n_trunc,
                       *, L=None, z_start=None, rtol=1e-8,
                       atol=1e-10, method="RK45", max_step=None,
                       window_pad=3) -> ChannelReflection:
    """Solve the scattering problem of one imaginary-frequency channel.

    The coupled system is integrated on a window padded by window_pad
    harmonics per side and the reflection matrix is restricted back to the
    n_trunc window: the outermost harmonics converge slowest toward their
    untruncated values, so the padding keeps the least-converged entries
    outside the window the determinant sees.  Should the padded Wronskian
    core come out too ill-conditioned to solve, the padding is walked down
    until the solve goes through.

    z_start defaults to the smallest start point at which the profile is
    numerically vacuum.  Starting deeper in the vacuum is not harmless: the
    inward integration of the flipped-sign outgoing family is exponentially
    unstable, so every extra unit of vacuum run multiplies the roundoff
    reaching the deepest harmonics by exp(2 q).
    """
    L = profile.period_L if L is None else L
    if z_start is None:
        z_start = quiet_zone_start(profile)
    kappa, kx0, ky0 = float(kappa), float(kx0), float(ky0)
    pad = 3 if window_pad == "auto" else int(window_pad)
    while True:
        basis = build_basis(Frequency("imaginary", kappa), kx0, ky0,
                            n_trunc + pad, L)
        try:
            res = scattering_for_channel(profile, basis, z_start, rtol=rtol,
                                         atol=atol, method=method,
                                         max_step=max_step)
            break
        except IllConditionedWronskianError:
            if pad == 0:
                raise
            pad -= 1
    sl3 = slice(pad, pad + 2 * n_trunc + 1)
    sl2 = slice(2 * pad, 2 * (pad + 2 * n_trunc) + 2)
    q = basis.kz_diag[::3].imag[sl3].copy()
    r_bar = res.r_transverse[sl2, sl2].copy()
    w = profile_half_width(profile)
    d = np.repeat(np.exp(-q * w), 2)
    r_surf = float(np.abs(d[:, None] * r_bar * d[None, :]).max())
    if r_surf >= R_SURFACE_BOUND:
        raise RuntimeError(
            f"unphysical reflection magnitude {r_surf:.3e} (surface "
            f"referenced) at kappa={kappa} kx0={kx0} ky0={ky0} "
            f"n_trunc={n_trunc} pad={pad}")
    return ChannelReflection(
        kappa=kappa, kx0=kx0, ky0=ky0,
        kx_harm=basis.kx_list[sl3].copy(), q_harm=q, r_bar=r_bar,
        n_window=n_trunc, n_eval=n_trunc + pad, r_surface_max=r_surf)


def translation_matrix(basis: ModeBasis, delta_z, delta_x) -> np.ndarray:
    """Diagonal translation matrix exp(i k . dr) in TE/TM coordinates."""
    if basis.frequency.axis != "imaginary":
        raise ValueError("translation_matrix needs an imaginary-axis basis")
    q = basis.kz_diag[::3].imag
    diag = np.exp(1j * basis.kx_list * delta_x - q * delta_z)
    return np.diag(np.repeat(diag, 2))


def _round_trip_logdet(node: ChannelReflection, geometry: GeometryConfig):
    u1 = np.repeat(np.exp(1j * node.kx_harm * geometry.delta_x
                          - node.q_harm * geometry.delta_z), 2)
    # U at (-kx0, -ky0) reindexed n -> -n: lateral phase conjugated, same q
    u2 = np.repeat(np.exp(-1j * node.kx_harm * geometry.delta_x
                          - node.q_harm * geometry.delta_z), 2)
    m = u1[:, None] * node.r_bar * u2[None, :]
    return np.linalg.slogdet(np.eye(m.shape[0]) - m @ node.r_bar)


def integrand_from_reflection(node: ChannelReflection,
                              geometry: GeometryConfig) -> float:
    """Re log det of the round-trip operator; asserts the result is real."""
    sign, logabs = _round_trip_logdet(node, geometry)
    im = np.angle(sign)
    if abs(im) >= 1e-6 * abs(logabs) + 1e-12:
        raise IntegrandRealnessError(
            f"Im(log det)={im:.3e} vs Re={logabs:.3e} at kappa={node.kappa} "
            f"kx0={node.kx0} ky0={node.ky0} dz={geometry.delta_z} "
            f"dx={geometry.delta_x}")
    if logabs > 1e-12:
        raise IntegrandRealnessError(
            f"positive integrand {logabs:.3e} at kappa={node.kappa} "
            f"kx0={node.kx0} ky0={node.ky0} dz={geometry.delta_z} "
            f"dx={geometry.delta_x}; the round-trip determinant of a "
            "passive pair must not exceed 1")
    return logabs


def integrand(profile: FourierProfile, kappa, kx0, ky0, n_trunc,
              geometry: GeometryConfig, **channel_kwargs) -> float:
    """log det integrand of one quadrature node (full channel pipeline)."""
    validate_geometry(geometry, profile)
    node = channel_reflection(profile, kappa, kx0, ky0, n_trunc,
                              **channel_kwargs)
    return integrand_from_reflection(node, geometry)


def default_n_trunc(quadrature: QuadratureSpec, L: float) -> int:
    """Keep harmonics with |kx - kx0| <= kappa_max."""
    return math.ceil(L * quadrature.kappa_max / (2 * np.pi))


def _node_list(quadrature: QuadratureSpec, L: float):
    (kap, wk), (kx, wx), (ky, wy) = quadrature_nodes(quadrature, L)
    return [(float(kap[i]), float(kx[j]), float(ky[m]),
             float(wk[i] * wx[j] * wy[m]))
            for i in range(len(kap)) for j in range(len(kx))
            for m in range(len(ky))]


def solve_node(node, profile, n_trunc, channel_kwargs):
    """Scattering solve of one (kappa, kx0, ky0, weight) node; picklable for
    worker pools."""
    kap, kx0, ky0, _ = node
    return channel_reflection(profile, kap, kx0, ky0, n_trunc,
                              **channel_kwargs)


def _reduce(weighted):
    return math.fsum(w * v for w, v in weighted) / (4 * np.pi ** 3)


def energy_for_geometries(profile: FourierProfile, geometries,
                          quadrature: QuadratureSpec, n_trunc=None, *,
                          map_fn=map, **channel_kwargs):
    """Energies of many (delta_z, delta_x) pairs sharing one scattering pass.

    The reflection matrices do not depend on the geometry, so each quadrature
    node is solved once and the translation factors are applied per geometry.
    map_fn lets a caller substitute a worker pool's map; the reduction always
    runs in node order.  Returns (energies, n_nodes).
    """
    for g in geometries:
        validate_geometry(g, profile)
    L = profile.period_L
    if n_trunc is None:
        n_trunc = default_n_trunc(quadrature, L)
    nodes = _node_list(quadrature, L)
    solve = functools.partial(solve_node, profile=profile, n_trunc=n_trunc,
                              channel_kwargs=channel_kwargs)
    reflections = list(map_fn(solve, nodes))
    energies = [
        _reduce(((w, integrand_from_reflection(refl, g))
                 for (_, _, _, w), refl in zip(nodes, reflections)))
        for g in geometries]
    return energies, len(nodes)


def energy_per_area(profile: FourierProfile, geometry: GeometryConfig,
                    quadrature: QuadratureSpec, n_trunc=None, *,
                    refine=True, refine_tol=1e-3, map_fn=map,
                    **channel_kwargs):
    """Energy per unit area of one geometry.

    Returns (energy, est_error, converged).  The error estimate doubles the
    kappa node count and takes the difference; the refined value is returned.
    With refine=False the estimate is NaN and converged is True.
    """
    (base,), n_nodes = energy_for_geometries(
        profile, [geometry], quadrature, n_trunc, map_fn=map_fn,
        **channel_kwargs)
    if not refine:
        return base, float("nan"), True
    fine_spec = replace(quadrature, n_kappa=2 * quadrature.n_kappa)
    (fine,), _ = energy_for_geometries(
        profile, [geometry], fine_spec, n_trunc, map_fn=map_fn,
        **channel_kwargs)
    err = abs(fine - base)
    return fine, err, bool(err <= refine_tol * abs(fine))


def slab_energy(eps_slab, w, delta_z, quadrature: QuadratureSpec, *,
                L=2 * np.pi, n_trunc=None) -> float:
    """Baseline energy of two uniform slabs (width 2w, permittivity
    eps_slab) on the same folded quadrature, with the analytic Fresnel
    reflection on the diagonal.  Independent of delta_x."""
    if delta_z <= 2 * w:
        raise GeometryError(
            f"delta_z={delta_z} does not separate slabs of width {2 * w}")
    if n_trunc is None:
        n_trunc = default_n_trunc(quadrature, L)
    (kap, wk), (kx, wx), (ky, wy) = quadrature_nodes(quadrature, L)
    offsets = 2 * np.pi * np.arange(-n_trunc, n_trunc + 1) / L
    total = []
    for i in range(len(kap)):
        k = 1j * kap[i]
        for j in range(len(kx)):
            kx_harm = kx[j] + offsets
            for m in range(len(ky)):
                q = np.sqrt(kap[i] ** 2 + kx_harm ** 2 + ky[m] ** 2)
                r_te, r_tm = slab_reflection(eps_slab, w, k, 1j * q)
                dust = max(np.abs(r_te.imag).max(), np.abs(r_tm.imag).max())
                if dust >= 1e-9:
                    raise IntegrandRealnessError(
                        f"slab reflection not real on the imaginary axis: "
                        f"|Im r|={dust:.3e} at kappa={kap[i]}")
                damp = np.exp(-2 * q * delta_z)
                val = np.sum(np.log1p(-damp * r_te.real ** 2)
                             + np.log1p(-damp * r_tm.real ** 2))
                total.append(wk[i] * wx[j] * wy[m] * val)
    return math.fsum(total) / (4 * np.pi ** 3)


def energy_sweep(profile: FourierProfile, delta_z_list, delta_x_list,
                 quadrature: QuadratureSpec, n_trunc=None, *, eps_slab,
                 slab_w, refine=False, refine_tol=1e-3, map_fn=map,
                 **channel_kwargs) -> EnergySweepResult:
    """Grating energies, slab baseline, and their ratio over a grid."""
    L = profile.period_L
    if n_trunc is None:
        n_trunc = default_n_trunc(quadrature, L)
    geoms = [GeometryConfig(delta_z=dz, delta_x=dx)
             for dz in delta_z_list for dx in delta_x_list]
    energies, n_nodes = energy_for_geometries(
        profile, geoms, quadrature, n_trunc, map_fn=map_fn, **channel_kwargs)
    errors = [float("nan")] * len(geoms)
    if refine:
        fine_spec = replace(quadrature, n_kappa=2 * quadrature.n_kappa)
        fine, _ = energy_for_geometries(
            profile, geoms, fine_spec, n_trunc, map_fn=map_fn,
            **channel_kwargs)
        errors = [abs(f - b) for f, b in zip(fine, energies)]
        energies = fine
    slab = {dz: slab_energy(eps_slab, slab_w, dz, quadrature, L=L,
                            n_trunc=n_trunc)
            for dz in delta_z_list}
    rows = [SweepRow(delta_z=g.delta_z, delta_x=g.delta_x, energy=e,
                     slab_energy=slab[g.delta_z],
                     ratio=e / slab[g.delta_z], est_error=err)
            for g, e, err in zip(geoms, energies, errors)]
    meta = {"n_trunc": n_trunc, "n_nodes": n_nodes,
            "n_geometries": len(geoms), "refined": refine,
            "quadrature": {
                "rule": quadrature.rule, "n_kappa": quadrature.n_kappa,
                "n_kx": quadrature.n_kx, "n_ky": quadrature.n_ky,
                "kappa_min": quadrature.kappa_min,
                "kappa_max": quadrature.kappa_max,
                "ky_min": quadrature.ky_min, "ky_max": quadrature.ky_max,
                "n_panels": quadrature.n_panels}}
    return EnergySweepResult(rows=rows, metadata=meta)
