"""Integration of the factorized outgoing and regular matrix ODEs.

With the free behavior factored out on the appropriate side,

    outgoing:  F_out = G(z) exp(i kz_diag z),    G(inf) = 1, G'(inf) = 0,
    regular:   Phi_pm^t = exp(pm i M kz_diag z) H_pm(z),
               H_pm(0) = h_pm, H_pm'(0) = 1,

the second-order system -F'' + D1 F' + D0 F = 0 and its dual turn into matrix
ODEs with slowly varying solutions:

    G''  = (D1 G - 2 G') i kz + D1 G' + D0 G + G kz^2          (kz acts right)
    H''  = kz^2 H - s i M kz (2 H' + H D1) - H' D1 - H D1_dz + H D0
                                                (diagonals act left, D's right)

with s = +1 / -1 for the even / odd parity channel.  The boundary matrices
h_pm are diagonal: (-i kz)^{-1} on the x, y slots and 0 on the z slots for
parity +, and the complementary pattern for parity -.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .coupling import CouplingAssembler
from .modes import ModeBasis
from .profiles import FourierProfile, eval_component


class IntegrationError(RuntimeError):
    """ODE solver failure, annotated with the offending channel."""

    def __init__(self, message, basis: ModeBasis):
        f = basis.frequency
        super().__init__(
            f"{message} [axis={f.axis} magnitude={f.magnitude} sign={f.sign} "
            f"kx0={basis.kx0} ky0={basis.ky0} N={basis.n_trunc}]")


@dataclass(frozen=True)
class CoupledSolution:
    parity: str            # "+", "-", or "outgoing"
    value: np.ndarray
    derivative: np.ndarray
    at_z: float


@dataclass(frozen=True)
class _Slot:
    kind: str              # "G" or "H"
    sigma: int             # parity sign for H slots (ignored for G)
    kz: np.ndarray         # signed kz_diag for this slot
    mkz: np.ndarray        # M_diag * kz (H slots only)


def regular_seed(basis: ModeBasis, parity: str):
    """Diagonal boundary data (h_pm, 1) of the regular solutions at z = 0."""
    if parity not in ("+", "-"):
        raise ValueError("parity must be '+' or '-'")
    h = np.zeros(basis.dim, dtype=complex)
    rows = basis.M_diag > 0 if parity == "+" else basis.M_diag < 0
    h[rows] = 1.0 / (-1j * basis.kz_diag[rows])
    return np.diag(h), np.eye(basis.dim, dtype=complex)


def origin_regular(basis: ModeBasis, parity: str) -> CoupledSolution:
    """The regular solutions at z = 0: exact seed data, nothing integrated."""
    h0, hp0 = regular_seed(basis, parity)
    return CoupledSolution(parity, h0, hp0, 0.0)


def _make_rhs(assembler: CouplingAssembler, slots):
    dim = assembler.basis.dim

    def rhs(z, y):
        cm = assembler(z)
        mats = y.reshape(len(slots), 2, dim, dim)
        out = np.empty_like(mats)
        for i, s in enumerate(slots):
            V, Vp = mats[i]
            out[i, 0] = Vp
            if s.kind == "G":
                out[i, 1] = (cm.D1 @ V - 2 * Vp) * (1j * s.kz)[None, :] \
                    + cm.D1 @ Vp + cm.D0 @ V + V * (s.kz ** 2)[None, :]
            else:
                out[i, 1] = (s.kz ** 2)[:, None] * V \
                    - (s.sigma * 1j * s.mkz)[:, None] * (2 * Vp + V @ cm.D1) \
                    - Vp @ cm.D1 - V @ cm.D1_dz + V @ cm.D0
        return out.reshape(-1)

    return rhs


def _run(assembler, slots, y0, z0, z1, fit_points, rtol, atol, basis,
         method="RK45", max_step=np.inf):
    """Integrate stacked slots from z0 to z1, sampling at fit_points."""
    t_eval = sorted(fit_points, reverse=z1 < z0)
    sol = solve_ivp(_make_rhs(assembler, slots), (z0, z1),
                    y0.reshape(-1), method=method, t_eval=t_eval,
                    rtol=rtol, atol=atol, max_step=max_step)
    if not sol.success:
        raise IntegrationError(f"integration failed: {sol.message}", basis)
    dim = basis.dim
    # -> {fit_z: array (n_slots, 2, dim, dim)}
    return {t: sol.y[:, j].reshape(len(slots), 2, dim, dim)
            for j, t in enumerate(sol.t)}


def _as_fit_list(z_fit):
    return list(z_fit) if np.ndim(z_fit) else [float(z_fit)]


def integrate_outgoing(profile: FourierProfile, basis: ModeBasis, z_start,
                       z_fit, rtol=1e-8, atol=1e-10, assembler=None,
                       method="RK45", max_step=np.inf):
    """G, G' at the fitting point(s), integrating inward from z_start.

    Returns a CoupledSolution, or a list of them if z_fit is a sequence.
    """
    fits = _as_fit_list(z_fit)
    if not z_start >= max(fits) or not min(fits) >= 0:
        raise ValueError("need z_start >= z_fit >= 0")
    resid = max((abs(eval_component(profile, n, basis.k, z_start))
                 for n in profile.components), default=0.0)
    if resid >= 1e-8:
        raise ValueError(
            f"profile is not numerically vacuum at z_start={z_start} "
            f"(component magnitude {resid:.2e})")
    if assembler is None:
        assembler = CouplingAssembler(profile, basis)
    dim = basis.dim
    y0 = np.stack([np.eye(dim, dtype=complex),
                   np.zeros((dim, dim), dtype=complex)])[None]
    slots = [_Slot("G", 0, basis.kz_diag, basis.kz_diag)]
    got = _run(assembler, slots, y0, z_start, min(fits), fits, rtol, atol,
               basis, method, max_step)
    sols = [CoupledSolution("outgoing", got[t][0, 0], got[t][0, 1], t)
            for t in fits]
    return sols if np.ndim(z_fit) else sols[0]


def integrate_regular(parity: str, profile: FourierProfile, basis: ModeBasis,
                      z_fit, rtol=1e-8, atol=1e-10, assembler=None,
                      method="RK45", max_step=np.inf):
    """H_pm, H_pm' at the fitting point(s), integrating outward from z = 0."""
    fits = _as_fit_list(z_fit)
    if not min(fits) > 0:
        raise ValueError("z_fit must be positive")
    if assembler is None:
        assembler = CouplingAssembler(profile, basis)
    h0, hp0 = regular_seed(basis, parity)
    y0 = np.stack([h0, hp0])[None]
    sigma = 1 if parity == "+" else -1
    slots = [_Slot("H", sigma, basis.kz_diag, basis.M_diag * basis.kz_diag)]
    got = _run(assembler, slots, y0, 0.0, max(fits), fits, rtol, atol, basis,
               method, max_step)
    sols = [CoupledSolution(parity, got[t][0, 0], got[t][0, 1], t)
            for t in fits]
    return sols if np.ndim(z_fit) else sols[0]


def outgoing_pair(profile: FourierProfile, basis: ModeBasis, z_start,
                  z_fit=0.0, rtol=1e-8, atol=1e-10, assembler=None,
                  method="RK45", max_step=np.inf):
    """G, G' of both frequency signs at the fit point(s), in one integration.

    The coupling matrices do not depend on the frequency sign, so the two
    outgoing families share every right-hand-side evaluation.  Returns
    {sign: CoupledSolution} (values are lists if z_fit is a sequence).
    """
    fits = _as_fit_list(z_fit)
    if not z_start >= max(fits) or not min(fits) >= 0:
        raise ValueError("need z_start >= z_fit >= 0")
    bases = {1: basis if basis.frequency.sign == 1 else basis.flipped()}
    bases[-1] = bases[1].flipped()
    resid = max((abs(eval_component(profile, n, bases[1].k, z_start))
                 for n in profile.components), default=0.0)
    if resid >= 1e-8:
        raise ValueError(
            f"profile is not numerically vacuum at z_start={z_start} "
            f"(component magnitude {resid:.2e})")
    if assembler is None:
        assembler = CouplingAssembler(profile, bases[1])
    dim = basis.dim
    eye = np.eye(dim, dtype=complex)
    zero = np.zeros((dim, dim), dtype=complex)
    slots = [_Slot("G", 0, bases[s].kz_diag, bases[s].kz_diag)
             for s in (1, -1)]
    y0 = np.stack([np.stack([eye, zero]), np.stack([eye, zero])])
    got = _run(assembler, slots, y0, z_start, min(fits), fits, rtol, atol,
               bases[1], method, max_step)
    out = {}
    for i, s in enumerate((1, -1)):
        sols = [CoupledSolution("outgoing", got[t][i, 0], got[t][i, 1], t)
                for t in fits]
        out[s] = sols if np.ndim(z_fit) else sols[0]
    return out


def integrate_channel(profile: FourierProfile, basis: ModeBasis, z_start,
                      z_fit, rtol=1e-8, atol=1e-10, method="RK45",
                      max_step=np.inf):
    """All six solutions of a channel, batched to share coupling evaluations.

    Returns {(kind, sign): [CoupledSolution per fit point]} with kind in
    {"outgoing", "+", "-"} and sign the frequency sign; the coupling matrices
    are sign-independent, so both signs ride in one integration.
    """
    fits = _as_fit_list(z_fit)
    bases = {1: basis if basis.frequency.sign == 1 else basis.flipped()}
    bases[-1] = bases[1].flipped()
    assembler = CouplingAssembler(profile, bases[1])

    out = {}
    gs = outgoing_pair(profile, bases[1], z_start, fits, rtol, atol,
                       assembler=assembler, method=method, max_step=max_step)
    for s in (1, -1):
        out[("outgoing", s)] = gs[s]

    # regular, both parities and signs in one run
    keys = [("+", 1), ("-", 1), ("+", -1), ("-", -1)]
    slots = [_Slot("H", 1 if p == "+" else -1, bases[s].kz_diag,
                   bases[s].M_diag * bases[s].kz_diag) for p, s in keys]
    y0 = np.stack([np.stack(regular_seed(bases[s], p)) for p, s in keys])
    got = _run(assembler, slots, y0, 0.0, max(fits), fits, rtol, atol,
               bases[1], method, max_step)
    for i, (p, s) in enumerate(keys):
        out[(p, s)] = [CoupledSolution(p, got[t][i, 0], got[t][i, 1], t)
                       for t in fits]
    return out
