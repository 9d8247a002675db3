"""Strict TOML run configuration for the command-line front end.

A run file has up to seven sections — profile, geometry, quadrature,
numerics, baseline, output, parallelism — every key optional except
profile.type's parameters.  Parsing is strict: unknown sections or keys are
rejected by name, values are type- and range-checked, and error messages
carry the offending key.  The defaults reproduce the reference grating sweep
(Fermi-step grating h = 2, w = 2, s = 16, L = 2*pi, production quadrature
16 x 4 x 16).

"auto" sentinels: numerics.z_start, numerics.max_step and numerics.z_fit
default to values derived from the profile (quiet-zone start, wall-resolving
step cap, profile half-width); baseline.eps_slab and baseline.slab_w default
to 2h and w for step profiles.  The resolved configuration, including every
default, is what the config hash covers.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

try:
    import tomllib
except ModuleNotFoundError:                        # Python < 3.11
    import tomli as tomllib

import numpy as np

from .casimir import QuadratureSpec, default_n_trunc, profile_half_width
from .profiles import (FermiStepParams, FourierProfile, ProfileError,
                       fermi_step_profile, quiet_zone_start, resolving_step,
                       tabulated_profile, uniform_slab_profile)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


@dataclass(frozen=True)
class ProfileSection:
    type: str = "fermi_step"
    h: float = 2.0
    w: float = 2.0
    s: float = 16.0
    L: float = 2 * np.pi
    eps_slab: float | None = None      # uniform_slab only
    component: tuple = ()              # tabulated_fourier only


@dataclass(frozen=True)
class GeometrySection:
    delta_z: tuple = (5.0, 6.0, 7.0)
    delta_x: tuple = (0.0, np.pi / 2, np.pi, 3 * np.pi / 2, 2 * np.pi)


@dataclass(frozen=True)
class QuadratureSection:
    kappa_min: float = 0.0078125
    kappa_max: float = 2.5
    ky_min: float = 0.0078125
    ky_max: float = 2.5
    n_kappa: int = 16
    n_kx: int = 4
    n_ky: int = 16
    n_panels: int = 4
    rule: str = "gauss_legendre_panels"
    refine: bool = False
    refine_tol: float = 1e-3


@dataclass(frozen=True)
class NumericsSection:
    rtol: float = 1e-8
    atol: float = 1e-10
    method: str = "RK45"
    z_start: float | str = "auto"
    max_step: float | str = "auto"
    z_fit: float | str = "auto"
    n_trunc: int | None = None
    window_pad: int = 3


@dataclass(frozen=True)
class BaselineSection:
    eps_slab: float | str = "auto"     # auto: 2h for step profiles
    slab_w: float | str = "auto"       # auto: w for step profiles


@dataclass(frozen=True)
class OutputSection:
    csv: str = "energy.csv"
    json: str | None = None            # default: csv path with .json suffix
    cache_dir: str = "cache"           # "" disables the node cache


@dataclass(frozen=True)
class ParallelismSection:
    workers: int = 0                   # 0: use the hardware count


@dataclass(frozen=True)
class RunConfig:
    profile: ProfileSection = field(default_factory=ProfileSection)
    geometry: GeometrySection = field(default_factory=GeometrySection)
    quadrature: QuadratureSection = field(default_factory=QuadratureSection)
    numerics: NumericsSection = field(default_factory=NumericsSection)
    baseline: BaselineSection = field(default_factory=BaselineSection)
    output: OutputSection = field(default_factory=OutputSection)
    parallelism: ParallelismSection = field(
        default_factory=ParallelismSection)


_SECTIONS = {
    "profile": ProfileSection, "geometry": GeometrySection,
    "quadrature": QuadratureSection, "numerics": NumericsSection,
    "baseline": BaselineSection, "output": OutputSection,
    "parallelism": ParallelismSection,
}

_PROFILE_TYPES = ("fermi_step", "uniform_slab", "tabulated_fourier",
                  "vacuum")
_ODE_METHODS = ("RK23", "RK45", "DOP853", "Radau", "BDF", "LSODA")


def _float(section, key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got "
                          f"{value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(f"{section}.{key} must be finite")
    return v


def _positive(section, key, value):
    v = _float(section, key, value)
    if v <= 0:
        raise ConfigError(f"{section}.{key} must be positive, got {value!r}")
    return v


def _int(section, key, value, minimum):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{key} must be an integer, got "
                          f"{value!r}")
    if value < minimum:
        raise ConfigError(f"{section}.{key} must be >= {minimum}, got "
                          f"{value}")
    return value


def _string(section, key, value, allowed=None):
    if not isinstance(value, str):
        raise ConfigError(f"{section}.{key} must be a string, got {value!r}")
    if allowed is not None and value not in allowed:
        raise ConfigError(f"{section}.{key} must be one of {allowed}, got "
                          f"{value!r}")
    return value


def _float_list(section, key, value, positive=False):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{section}.{key} must be a non-empty list of "
                          f"numbers")
    out = tuple(_float(section, key, v) for v in value)
    if positive and any(v <= 0 for v in out):
        raise ConfigError(f"{section}.{key} entries must be positive")
    return out


def _auto_or(section, key, value, check):
    if value == "auto":
        return "auto"
    return check(section, key, value)


def _reject_unknown(section, data, known):
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key '{section}.{key}'")


def _parse_profile(data) -> ProfileSection:
    known = {"type", "h", "w", "s", "L", "eps_slab", "component"}
    _reject_unknown("profile", data, known)
    defaults = ProfileSection()
    ptype = _string("profile", "type", data.get("type", defaults.type),
                    _PROFILE_TYPES)
    L = _positive("profile", "L", data.get("L", defaults.L))
    kwargs = {"type": ptype, "L": L}
    if ptype in ("fermi_step", "uniform_slab"):
        if "component" in data:
            raise ConfigError(
                "profile.component is only valid for type "
                "'tabulated_fourier'")
        if "s" in data and (isinstance(data["s"], bool)
                            or not isinstance(data["s"], (int, float))
                            or float(data["s"]) <= 0):
            raise ConfigError("profile.s: steepness must be positive, got "
                              f"{data['s']!r}")
        kwargs["s"] = _positive("profile", "s", data.get("s", defaults.s))
        kwargs["w"] = _positive("profile", "w", data.get("w", defaults.w))
        if ptype == "fermi_step":
            if "eps_slab" in data:
                raise ConfigError("profile.eps_slab is only valid for type "
                                  "'uniform_slab'")
            kwargs["h"] = _positive("profile", "h",
                                    data.get("h", defaults.h))
        else:
            if "h" in data:
                raise ConfigError("profile.h is only valid for type "
                                  "'fermi_step'")
            eps = _positive("profile", "eps_slab", data.get("eps_slab", 4.0))
            if eps <= 1.0:
                raise ConfigError("profile.eps_slab must exceed 1 (vacuum)")
            kwargs["eps_slab"] = eps
    elif ptype == "tabulated_fourier":
        for key in ("h", "w", "s", "eps_slab"):
            if key in data:
                raise ConfigError(f"profile.{key} is only valid for step "
                                  f"profiles, not 'tabulated_fourier'")
        comps = data.get("component")
        if not isinstance(comps, list) or not comps:
            raise ConfigError("profile type 'tabulated_fourier' needs at "
                              "least one [[profile.component]] table")
        seen, parsed = set(), []
        for i, comp in enumerate(comps):
            if not isinstance(comp, dict):
                raise ConfigError(f"profile.component[{i}] must be a table")
            _reject_unknown(f"profile.component[{i}]", comp,
                            {"n", "z", "chi_re", "chi_im"})
            n = _int(f"profile.component[{i}]", "n", comp.get("n"), -10**6) \
                if "n" in comp else None
            if n is None:
                raise ConfigError(f"profile.component[{i}].n is required")
            if n in seen:
                raise ConfigError(f"profile.component[{i}].n={n} repeats an "
                                  f"earlier harmonic")
            seen.add(n)
            z = _float_list(f"profile.component[{i}]", "z",
                            comp.get("z", None))
            re = _float_list(f"profile.component[{i}]", "chi_re",
                             comp.get("chi_re", None))
            im = (_float_list(f"profile.component[{i}]", "chi_im",
                              comp["chi_im"]) if "chi_im" in comp
                  else (0.0,) * len(re))
            if not (len(z) == len(re) == len(im)):
                raise ConfigError(f"profile.component[{i}] z/chi_re/chi_im "
                                  f"lengths differ")
            parsed.append((n, z, re, im))
        kwargs["component"] = tuple(parsed)
    else:                              # vacuum
        for key in ("h", "w", "s", "eps_slab", "component"):
            if key in data:
                raise ConfigError(f"profile.{key} is not valid for type "
                                  f"'vacuum'")
    return ProfileSection(**{**asdict(defaults), **kwargs})


def _parse_geometry(data) -> GeometrySection:
    defaults = GeometrySection()
    _reject_unknown("geometry", data, {"delta_z", "delta_x"})
    dz = (_float_list("geometry", "delta_z", data["delta_z"], positive=True)
          if "delta_z" in data else defaults.delta_z)
    dx = (_float_list("geometry", "delta_x", data["delta_x"])
          if "delta_x" in data else defaults.delta_x)
    return GeometrySection(delta_z=dz, delta_x=dx)


def _parse_quadrature(data) -> QuadratureSection:
    d = QuadratureSection()
    known = {"kappa_min", "kappa_max", "ky_min", "ky_max", "n_kappa",
             "n_kx", "n_ky", "n_panels", "rule", "refine", "refine_tol"}
    _reject_unknown("quadrature", data, known)
    refine = data.get("refine", d.refine)
    if not isinstance(refine, bool):
        raise ConfigError(f"quadrature.refine must be a boolean, got "
                          f"{refine!r}")
    out = QuadratureSection(
        kappa_min=_positive("quadrature", "kappa_min",
                            data.get("kappa_min", d.kappa_min)),
        kappa_max=_positive("quadrature", "kappa_max",
                            data.get("kappa_max", d.kappa_max)),
        ky_min=_positive("quadrature", "ky_min",
                         data.get("ky_min", d.ky_min)),
        ky_max=_positive("quadrature", "ky_max",
                         data.get("ky_max", d.ky_max)),
        n_kappa=_int("quadrature", "n_kappa",
                     data.get("n_kappa", d.n_kappa), 2),
        n_kx=_int("quadrature", "n_kx", data.get("n_kx", d.n_kx), 2),
        n_ky=_int("quadrature", "n_ky", data.get("n_ky", d.n_ky), 2),
        n_panels=_int("quadrature", "n_panels",
                      data.get("n_panels", d.n_panels), 1),
        rule=_string("quadrature", "rule", data.get("rule", d.rule),
                     ("gauss_legendre_panels", "trapezoid")),
        refine=refine,
        refine_tol=_positive("quadrature", "refine_tol",
                             data.get("refine_tol", d.refine_tol)),
    )
    if out.kappa_min >= out.kappa_max:
        raise ConfigError("quadrature.kappa_min must be below kappa_max")
    if out.ky_min >= out.ky_max:
        raise ConfigError("quadrature.ky_min must be below ky_max")
    for key in ("n_kappa", "n_ky"):
        if getattr(out, key) % out.n_panels:
            raise ConfigError(f"quadrature.{key}={getattr(out, key)} must "
                              f"be divisible by n_panels={out.n_panels}")
    return out


def _parse_numerics(data) -> NumericsSection:
    d = NumericsSection()
    known = {"rtol", "atol", "method", "z_start", "max_step", "z_fit",
             "n_trunc", "window_pad"}
    _reject_unknown("numerics", data, known)
    n_trunc = d.n_trunc
    if "n_trunc" in data:
        n_trunc = _int("numerics", "n_trunc", data["n_trunc"], 0)
    return NumericsSection(
        rtol=_positive("numerics", "rtol", data.get("rtol", d.rtol)),
        atol=_positive("numerics", "atol", data.get("atol", d.atol)),
        method=_string("numerics", "method", data.get("method", d.method),
                       _ODE_METHODS),
        z_start=_auto_or("numerics", "z_start",
                         data.get("z_start", d.z_start), _positive),
        max_step=_auto_or("numerics", "max_step",
                          data.get("max_step", d.max_step), _positive),
        z_fit=_auto_or("numerics", "z_fit", data.get("z_fit", d.z_fit),
                       _positive),
        n_trunc=n_trunc,
        window_pad=_int("numerics", "window_pad",
                        data.get("window_pad", d.window_pad), 0),
    )


def _parse_baseline(data) -> BaselineSection:
    d = BaselineSection()
    _reject_unknown("baseline", data, {"eps_slab", "slab_w"})
    return BaselineSection(
        eps_slab=_auto_or("baseline", "eps_slab",
                          data.get("eps_slab", d.eps_slab), _positive),
        slab_w=_auto_or("baseline", "slab_w",
                        data.get("slab_w", d.slab_w), _positive),
    )


def _parse_output(data) -> OutputSection:
    d = OutputSection()
    _reject_unknown("output", data, {"csv", "json", "cache_dir"})
    jsn = data.get("json", d.json)
    if jsn is not None:
        jsn = _string("output", "json", jsn)
    cache = data.get("cache_dir", d.cache_dir)
    if not isinstance(cache, str):
        raise ConfigError(f"output.cache_dir must be a string, got "
                          f"{cache!r}")
    return OutputSection(csv=_string("output", "csv",
                                     data.get("csv", d.csv)),
                         json=jsn, cache_dir=cache)


def _parse_parallelism(data) -> ParallelismSection:
    d = ParallelismSection()
    _reject_unknown("parallelism", data, {"workers"})
    return ParallelismSection(
        workers=_int("parallelism", "workers",
                     data.get("workers", d.workers), 0))


_PARSERS = {
    "profile": _parse_profile, "geometry": _parse_geometry,
    "quadrature": _parse_quadrature, "numerics": _parse_numerics,
    "baseline": _parse_baseline, "output": _parse_output,
    "parallelism": _parse_parallelism,
}


def parse_config(raw: dict) -> RunConfig:
    """RunConfig from a raw TOML mapping; strict about sections and keys."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table")
    for section in raw:
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section '{section}'")
        if not isinstance(raw[section], dict):
            raise ConfigError(f"section '{section}' must be a table")
    parsed = {name: _PARSERS[name](raw.get(name, {})) for name in _SECTIONS}
    return RunConfig(**parsed)


def apply_overrides(raw: dict, overrides: dict) -> dict:
    """Overlay dotted-key overrides ('numerics.rtol') onto a raw mapping."""
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in
           raw.items()}
    for dotted, value in overrides.items():
        section, _, key = dotted.partition(".")
        if not key:
            raise ConfigError(f"override '{dotted}' must be section.key")
        out.setdefault(section, {})
        if not isinstance(out[section], dict):
            raise ConfigError(f"section '{section}' must be a table")
        out[section][key] = value
    return out


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a TOML run file, newest overrides last."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}")
    if overrides:
        raw = apply_overrides(raw, overrides)
    return parse_config(raw)


def build_profile(config: RunConfig) -> FourierProfile:
    p = config.profile
    if p.type == "fermi_step":
        try:
            return fermi_step_profile(FermiStepParams(h=p.h, w=p.w, s=p.s,
                                                      L=p.L))
        except ProfileError as exc:
            raise ConfigError(str(exc))
    if p.type == "uniform_slab":
        return uniform_slab_profile(p.eps_slab, p.w, p.s, p.L)
    if p.type == "tabulated_fourier":
        tables = {}
        for n, z, re, im in p.component:
            tables[n] = (np.asarray(z), np.asarray(re)
                         + 1j * np.asarray(im))
        try:
            return tabulated_profile(p.L, tables)
        except ProfileError as exc:
            raise ConfigError(f"profile.component: {exc}")
    return FourierProfile(period_L=p.L, components={})


def quadrature_spec(config: RunConfig) -> QuadratureSpec:
    q = config.quadrature
    return QuadratureSpec(kappa_min=q.kappa_min, kappa_max=q.kappa_max,
                          ky_min=q.ky_min, ky_max=q.ky_max,
                          n_kappa=q.n_kappa, n_kx=q.n_kx, n_ky=q.n_ky,
                          rule=q.rule, n_panels=q.n_panels)


def resolve_n_trunc(config: RunConfig) -> int:
    if config.numerics.n_trunc is not None:
        return config.numerics.n_trunc
    return default_n_trunc(quadrature_spec(config), config.profile.L)


def resolve_channel_kwargs(config: RunConfig,
                           profile: FourierProfile) -> dict:
    """Numerics keywords for channel solves, with "auto" values resolved."""
    n = config.numerics
    z_start = (quiet_zone_start(profile) if n.z_start == "auto"
               else float(n.z_start))
    max_step = (resolving_step(profile) if n.max_step == "auto"
                else float(n.max_step))
    return {"rtol": n.rtol, "atol": n.atol, "method": n.method,
            "z_start": z_start, "max_step": max_step,
            "window_pad": n.window_pad}


def resolve_z_fit(config: RunConfig, profile: FourierProfile) -> float:
    if config.numerics.z_fit != "auto":
        return float(config.numerics.z_fit)
    w = profile_half_width(profile)
    return w if w > 0 else 1.0


def resolve_baseline(config: RunConfig) -> tuple:
    """(eps_slab, slab_w) of the planar reference, resolving "auto"."""
    b, p = config.baseline, config.profile
    eps = b.eps_slab
    if eps == "auto":
        if p.type == "fermi_step":
            eps = 2.0 * p.h
        elif p.type == "uniform_slab":
            eps = p.eps_slab
        else:
            raise ConfigError(
                "baseline.eps_slab has no automatic value for profile type "
                f"'{p.type}'; set it explicitly")
    w = b.slab_w
    if w == "auto":
        if p.type in ("fermi_step", "uniform_slab"):
            w = p.w
        else:
            raise ConfigError(
                "baseline.slab_w has no automatic value for profile type "
                f"'{p.type}'; set it explicitly")
    return float(eps), float(w)


def config_dict(config: RunConfig) -> dict:
    """Plain nested dict of the resolved configuration (for hashing/JSON)."""
    out = asdict(config)
    out["schema_version"] = SCHEMA_VERSION
    return out


def config_sha256(config: RunConfig) -> str:
    payload = json.dumps(config_dict(config), sort_keys=True,
                         separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()
