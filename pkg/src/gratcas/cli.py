"""Command-line front end: validation, diagnostics, energy sweeps, baseline.

Commands
    validate CONFIG        parse the run file strictly and check the profile
                           invariants (parity, vacuum asymptotics,
                           analytic-vs-finite-difference derivatives,
                           dielectric positivity, geometry separation)
    diagnostics CONFIG     sample scattering channels and report unitarity,
                           commutation, Wronskian drift and conditioning
    energy CONFIG          the full (delta_z, delta_x) sweep: CSV plus JSON
                           metadata sidecar, node-level cache, worker pool
    slab-baseline CONFIG   the analytic planar-slab energies alone

Exit codes: 0 all good; 1 a check failed (validate check, --max-defect
exceeded, integrand realness/sign violation); 2 execution error (bad config,
missing file, failed nodes).

Determinism: node order, reduction order and float formatting are fixed, so
identical configs produce byte-identical outputs.  Every output embeds the
sha256 of the resolved configuration.  Per-node scattering results are
cached under output.cache_dir keyed by the hash of everything that
determines them (profile, numerics, truncation, node), so interrupted
sweeps resume and geometry changes reuse the scattering work; entries are
never shared across differing numerics or profiles.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .casimir import (GeometryConfig, GeometryError, IntegrandRealnessError,
                      SweepRow, _node_list, _reduce, integrand_from_reflection,
                      profile_half_width, slab_energy, solve_node,
                      validate_geometry, ChannelReflection)
from .config import (ConfigError, RunConfig, build_profile, config_dict,
                     config_sha256, load_config, quadrature_spec,
                     resolve_baseline, resolve_channel_kwargs,
                     resolve_n_trunc, resolve_z_fit)
from .profiles import (eval_component, eval_component_dz, eval_component_dzz,
                       eval_total, quiet_zone_start)
from .sampling import draw_channels, run_channel_diagnostics

NODE_CACHE_VERSION = 1
CSV_COLUMNS = ("delta_z", "delta_x", "energy", "slab_energy", "ratio",
               "est_error")


# ----------------------------------------------------------------- output --

def _fmt(value: float) -> str:
    return f"{value:.12e}"


def _write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_csv(path, header, rows, cfg_hash):
    lines = [f"# config_sha256={cfg_hash}", ",".join(header)]
    lines += [",".join(_fmt(v) if isinstance(v, float) else str(v)
                       for v in row) for row in rows]
    _write_text(path, "\n".join(lines) + "\n")


def write_sidecar(path, payload):
    _write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def sidecar_path(config: RunConfig, csv_path) -> str:
    if config.output.json is not None:
        return config.output.json
    stem, _ = os.path.splitext(csv_path)
    return stem + ".json"


# ------------------------------------------------------------- node cache --

def node_cache_key(config: RunConfig, channel_kwargs, n_trunc, node) -> str:
    kappa, kx0, ky0, _ = node
    payload = {
        "version": NODE_CACHE_VERSION,
        "profile": config_dict(config)["profile"],
        "numerics": {k: channel_kwargs[k] for k in sorted(channel_kwargs)},
        "n_trunc": n_trunc,
        "node": [kappa, kx0, ky0],
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _store_node(path, refl: ChannelReflection):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    os.close(fd)
    try:
        with open(tmp, "wb") as fh:
            np.savez(fh, kappa=refl.kappa, kx0=refl.kx0, ky0=refl.ky0,
                     kx_harm=refl.kx_harm, q_harm=refl.q_harm,
                     r_bar=refl.r_bar, n_window=refl.n_window,
                     n_eval=refl.n_eval, r_surface_max=refl.r_surface_max)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _load_node(path) -> ChannelReflection:
    with np.load(path) as data:
        return ChannelReflection(
            kappa=float(data["kappa"]), kx0=float(data["kx0"]),
            ky0=float(data["ky0"]), kx_harm=data["kx_harm"],
            q_harm=data["q_harm"], r_bar=data["r_bar"],
            n_window=int(data["n_window"]), n_eval=int(data["n_eval"]),
            r_surface_max=float(data["r_surface_max"]))


def solve_node_task(task):
    """Cached scattering solve of one node; returns a status triple.

    Module-level and exception-free so worker pools can map it: failures
    come back as data and are reported together instead of aborting the
    whole sweep.
    """
    node = task["node"]
    path = None
    if task["cache_dir"]:
        path = os.path.join(task["cache_dir"], task["key"] + ".npz")
    try:
        if path is not None and os.path.exists(path):
            return ("ok", _load_node(path), True)
        refl = solve_node(node, task["profile"], task["n_trunc"],
                          task["channel_kwargs"])
        if path is not None:
            _store_node(path, refl)
        return ("ok", refl, False)
    except Exception as exc:                     # noqa: BLE001 — reported
        coords = tuple(round(c, 9) for c in node[:3])
        return ("fail", (coords, f"{type(exc).__name__}: {exc}"), False)


def solve_all_nodes(nodes, profile, n_trunc, channel_kwargs, config,
                    map_fn):
    tasks = [{"node": node, "profile": profile, "n_trunc": n_trunc,
              "channel_kwargs": channel_kwargs,
              "cache_dir": config.output.cache_dir,
              "key": node_cache_key(config, channel_kwargs, n_trunc, node)}
             for node in nodes]
    results = list(map_fn(solve_node_task, tasks))
    failures = [payload for status, payload, _ in results
                if status == "fail"]
    reflections = [payload for status, payload, _ in results
                   if status == "ok"]
    cached = sum(1 for status, _, hit in results if status == "ok" and hit)
    return reflections, failures, cached


def make_map_fn(workers):
    """(map_fn, pool) for the requested worker count; pool may be None."""
    if workers == 0:
        workers = os.cpu_count() or 1
    if workers <= 1:
        return map, None
    pool = ProcessPoolExecutor(max_workers=workers)
    return pool.map, pool


# --------------------------------------------------------------- validate --

def _check_parity(profile):
    z = np.linspace(0.0, 12.0, 241)
    worst = 0.0
    for n in profile.components:
        a = eval_component(profile, n, 1.0, z)
        b = eval_component(profile, n, 1.0, -z)
        scale = max(np.abs(a).max(), 1e-300)
        worst = max(worst, float(np.abs(a - b).max() / scale))
    return worst, 1e-12


def _check_asymptotics(profile):
    z0 = quiet_zone_start(profile)
    z = np.linspace(z0, z0 + 8.0, 65)
    worst = 0.0
    for n in profile.components:
        worst = max(worst, float(np.abs(eval_component(profile, n, 1.0,
                                                       z)).max()))
    return worst, 1e-8


def _check_derivatives(profile):
    """Analytic dz/dzz of every component against central differences."""
    worst = 0.0
    for n, comp in profile.components.items():
        s = getattr(comp, "s", None)
        delta = min(1e-3, 0.02 / s) if s else 1e-3
        zg = getattr(comp, "z_grid", None)
        hi = getattr(comp, "w", None) or (float(zg[-1]) if zg is not None
                                          else 4.0)
        z = np.linspace(0.3 * hi, 1.2 * hi, 41)
        f = eval_component(profile, n, 1.0, z)
        fp = eval_component(profile, n, 1.0, z + delta)
        fm = eval_component(profile, n, 1.0, z - delta)
        scale = max(np.abs(f).max(), 1e-300)
        d1 = (fp - fm) / (2 * delta)
        d2 = (fp - 2 * f + fm) / delta**2
        worst = max(worst, float(np.abs(
            d1 - eval_component_dz(profile, n, 1.0, z)).max()
            / max(np.abs(d1).max(), scale)))
        worst = max(worst, float(np.abs(
            d2 - eval_component_dzz(profile, n, 1.0, z)).max()
            / max(np.abs(d2).max(), scale / delta)))
    return worst, 1e-3


def _check_dielectric(profile):
    """Total eps over one period: must be real and positive."""
    x = np.linspace(0.0, profile.period_L, 33)
    z = np.linspace(0.0, profile_half_width(profile) + 2.0, 65)
    eps = eval_total(profile, 1.0, x[:, None], z[None, :])
    dust = float(np.abs(eps.imag).max())
    if dust > 1e-9:
        return -1.0, 0.0        # imaginary part: report through minimum
    return float(eps.real.min()), None


def cmd_validate(ns) -> int:
    config = load_config(ns.config)
    profile = build_profile(config)
    print(f"config {ns.config}: strict schema ok "
          f"(sha256 {config_sha256(config)[:16]})")
    failed = 0

    def report(name, ok, detail):
        nonlocal failed
        failed += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")

    if profile.components:
        worst, tol = _check_parity(profile)
        report("profile parity chi(z) = chi(-z)", worst < tol,
               f"max asymmetry {worst:.2e} (tol {tol:.0e})")
        worst, tol = _check_asymptotics(profile)
        report("vacuum asymptotics beyond the quiet zone", worst < tol,
               f"max residual {worst:.2e} (tol {tol:.0e})")
        worst, tol = _check_derivatives(profile)
        report("analytic derivatives vs finite differences", worst < tol,
               f"max deviation {worst:.2e} (tol {tol:.0e})")
        mn, _ = _check_dielectric(profile)
        report("dielectric real and positive", mn > 0.0,
               f"min eps {mn:.6g}" if mn >= 0 else "imaginary part found")
    else:
        print("PASS  vacuum profile: nothing to check")
    for dz in config.geometry.delta_z:
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                validate_geometry(GeometryConfig(delta_z=dz), profile)
            note = ("separated"
                    if not caught else str(caught[0].message))
            report(f"geometry delta_z={dz:g}", True, note)
        except GeometryError as exc:
            report(f"geometry delta_z={dz:g}", False, str(exc))
    try:
        eps_slab, slab_w = resolve_baseline(config)
        report("slab baseline", True,
               f"eps_slab={eps_slab:g} half-width={slab_w:g}")
    except ConfigError as exc:
        report("slab baseline", False, str(exc))
    print(f"{'all checks passed' if not failed else f'{failed} check(s) FAILED'}")
    return 1 if failed else 0


# ------------------------------------------------------------ diagnostics --

DIAG_COLUMNS = ("axis", "magnitude", "kx0", "ky0", "n_prop", "n_window",
                "n_eval", "unitarity_defect", "commutator_defect",
                "wronskian_drift", "cond_plus", "cond_minus")


def cmd_diagnostics(ns) -> int:
    config = load_config(ns.config)
    profile = build_profile(config)
    cfg_hash = config_sha256(config)
    axes = ("real", "imaginary") if ns.axis == "both" else (ns.axis,)
    draws = draw_channels(ns.samples, ns.seed, L=profile.period_L,
                          n_trunc=ns.n_trunc)
    z_fit = resolve_z_fit(config, profile)
    t0 = time.time()
    rows = []
    for axis in axes:
        rows += run_channel_diagnostics(profile, draws, axis,
                                        n_trunc=ns.n_trunc, z_fit=z_fit)
    csv_rows = []
    for r in rows:
        csv_rows.append((r["axis"], r["magnitude"], r["kx0"], r["ky0"],
                         str(r["n_prop"]), str(r["n_window"]),
                         str(r["n_eval"]),
                         _fmt(r["unitarity_defect"])
                         if "unitarity_defect" in r else "",
                         r["commutator_defect"], r["wronskian_drift"],
                         r["cond_plus"], r["cond_minus"]))
    write_csv(ns.output, DIAG_COLUMNS, csv_rows, cfg_hash)
    maxima = {
        "commutator_defect": max(r["commutator_defect"] for r in rows),
        "wronskian_drift": max(r["wronskian_drift"] for r in rows),
    }
    unit = [r["unitarity_defect"] for r in rows if "unitarity_defect" in r]
    if unit:
        maxima["unitarity_defect"] = max(unit)
    payload = {"schema_version": 1, "command": "diagnostics",
               "config_sha256": cfg_hash, "config": config_dict(config),
               "axes": list(axes), "samples": ns.samples, "seed": ns.seed,
               "sample_window": ns.n_trunc, "max_defects": maxima,
               "threshold": ns.max_defect}
    write_sidecar(sidecar_path(config, ns.output), payload)
    print(f"sampled {len(draws)} channels on {len(axes)} axis/axes in "
          f"{time.time() - t0:.0f}s -> {ns.output}")
    for name, value in maxima.items():
        print(f"  max {name}: {value:.3e}")
    if ns.max_defect is not None and any(v > ns.max_defect
                                         for v in maxima.values()):
        print(f"defect threshold {ns.max_defect:g} exceeded")
        return 1
    return 0


# ----------------------------------------------------------------- energy --

def _geometries(config: RunConfig):
    return [GeometryConfig(delta_z=dz, delta_x=dx)
            for dz in config.geometry.delta_z
            for dx in config.geometry.delta_x]


def _energies_for(reflections, nodes, geometries):
    energies = []
    for geom in geometries:
        energies.append(_reduce(
            ((node[3], integrand_from_reflection(refl, geom))
             for node, refl in zip(nodes, reflections))))
    return energies


def _report_failures(failures):
    print(f"{len(failures)} node(s) failed:", file=sys.stderr)
    for coords, message in failures:
        print(f"  kappa={coords[0]} kx0={coords[1]} ky0={coords[2]}: "
              f"{message}", file=sys.stderr)


def cmd_energy(ns) -> int:
    overrides = {}
    if ns.workers is not None:
        overrides["parallelism.workers"] = ns.workers
    if ns.output is not None:
        overrides["output.csv"] = ns.output
    if ns.cache_dir is not None:
        overrides["output.cache_dir"] = ns.cache_dir
    if ns.no_cache:
        overrides["output.cache_dir"] = ""
    config = load_config(ns.config, overrides)
    profile = build_profile(config)
    cfg_hash = config_sha256(config)
    spec = quadrature_spec(config)
    n_trunc = resolve_n_trunc(config)
    kwargs = resolve_channel_kwargs(config, profile)
    eps_slab, slab_w = resolve_baseline(config)
    geometries = _geometries(config)
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="delta_z")
        for geom in geometries:
            validate_geometry(geom, profile)

    map_fn, pool = make_map_fn(config.parallelism.workers)
    t0 = time.time()
    try:
        passes = [("base", _node_list(spec, profile.period_L))]
        if config.quadrature.refine:
            fine = replace(spec, n_kappa=2 * spec.n_kappa)
            passes.append(("refine", _node_list(fine, profile.period_L)))
        solved = {}
        cached_total = 0
        for label, nodes in passes:
            refl, failures, cached = solve_all_nodes(
                nodes, profile, n_trunc, kwargs, config, map_fn)
            if failures:
                _report_failures(failures)
                return 2
            solved[label] = (nodes, refl)
            cached_total += cached
    finally:
        if pool is not None:
            pool.shutdown()

    try:
        nodes, refl = solved["base"]
        energies = _energies_for(refl, nodes, geometries)
        errors = [float("nan")] * len(geometries)
        if config.quadrature.refine:
            fnodes, frefl = solved["refine"]
            fine_e = _energies_for(frefl, fnodes, geometries)
            errors = [abs(f - b) for f, b in zip(fine_e, energies)]
            energies = fine_e
    except IntegrandRealnessError as exc:
        print(f"integrand check failed: {exc}", file=sys.stderr)
        return 1

    slab = {dz: slab_energy(eps_slab, slab_w, dz, spec,
                            L=profile.period_L, n_trunc=n_trunc)
            for dz in config.geometry.delta_z}
    rows = [SweepRow(delta_z=g.delta_z, delta_x=g.delta_x, energy=e,
                     slab_energy=slab[g.delta_z],
                     ratio=e / slab[g.delta_z], est_error=err)
            for g, e, err in zip(geometries, energies, errors)]
    csv_rows = [(r.delta_z, r.delta_x, r.energy, r.slab_energy, r.ratio,
                 r.est_error) for r in rows]
    write_csv(config.output.csv, CSV_COLUMNS, csv_rows, cfg_hash)

    n_nodes = sum(len(nodes) for _, nodes in solved.values())
    all_refl = [r for _, pair in solved.items() for r in pair[1]]
    payload = {
        "schema_version": 1, "command": "energy",
        "config_sha256": cfg_hash, "config": config_dict(config),
        "n_trunc": n_trunc, "window_pad": config.numerics.window_pad,
        "n_nodes": n_nodes, "n_geometries": len(geometries),
        "baseline": {"eps_slab": eps_slab, "slab_w": slab_w},
        "resolved_numerics": {k: kwargs[k] for k in sorted(kwargs)},
        "pads_used": {"min": min(r.n_eval - r.n_window for r in all_refl),
                      "max": max(r.n_eval - r.n_window for r in all_refl)},
        "r_surface_max": max(r.r_surface_max for r in all_refl),
        "checks": {"integrand_real": True, "integrand_nonpositive": True,
                   "geometry_separation": True},
    }
    write_sidecar(sidecar_path(config, config.output.csv), payload)
    print(f"solved {n_nodes} nodes ({cached_total} from cache) in "
          f"{time.time() - t0:.0f}s")
    print(f"wrote {config.output.csv} and "
          f"{sidecar_path(config, config.output.csv)}")
    return 0


# ---------------------------------------------------------- slab baseline --

def cmd_slab_baseline(ns) -> int:
    config = load_config(ns.config)
    cfg_hash = config_sha256(config)
    spec = quadrature_spec(config)
    n_trunc = resolve_n_trunc(config)
    eps_slab, slab_w = resolve_baseline(config)
    L = config.profile.L
    rows = []
    for dz in config.geometry.delta_z:
        rows.append((float(dz), slab_energy(eps_slab, slab_w, dz, spec,
                                            L=L, n_trunc=n_trunc)))
    out = ns.output
    write_csv(out, ("delta_z", "slab_energy"), rows, cfg_hash)
    payload = {"schema_version": 1, "command": "slab-baseline",
               "config_sha256": cfg_hash, "config": config_dict(config),
               "n_trunc": n_trunc,
               "baseline": {"eps_slab": eps_slab, "slab_w": slab_w}}
    write_sidecar(sidecar_path(config, out), payload)
    print(f"wrote {out}")
    return 0


# ------------------------------------------------------------------- main --

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gratcas",
        description="Reflection matrices of periodic dielectric gratings "
                    "and the Casimir energy between two of them.")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="strict config + profile checks")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    d = sub.add_parser("diagnostics",
                       help="sampled channel health metrics CSV")
    d.add_argument("config")
    d.add_argument("--axis", choices=("real", "imaginary", "both"),
                   default="both")
    d.add_argument("--samples", type=int, default=50)
    d.add_argument("--seed", type=int, default=20260819)
    d.add_argument("--n-trunc", type=int, default=2,
                   help="truncation window of the sampled channels")
    d.add_argument("--output", default="diagnostics.csv")
    d.add_argument("--max-defect", type=float, default=None,
                   help="exit 1 if any defect maximum exceeds this")
    d.set_defaults(func=cmd_diagnostics)

    e = sub.add_parser("energy", help="(delta_z, delta_x) energy sweep")
    e.add_argument("config")
    e.add_argument("--workers", type=int, default=None)
    e.add_argument("--output", default=None, help="CSV path override")
    e.add_argument("--cache-dir", default=None)
    e.add_argument("--no-cache", action="store_true")
    e.set_defaults(func=cmd_energy)

    s = sub.add_parser("slab-baseline",
                       help="analytic planar-slab baseline only")
    s.add_argument("config")
    s.add_argument("--output", default="slab_baseline.csv")
    s.set_defaults(func=cmd_slab_baseline)
    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except (ConfigError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except IntegrandRealnessError as exc:
        print(f"integrand check failed: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:                     # noqa: BLE001
        print(f"unexpected error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
