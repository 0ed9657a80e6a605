"""Flat ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored, keys may appear once, and unknown
keys are rejected. Every key and its default is listed in :data:`KEYS`.
"""

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .coupled import PrescribedFlow, SimConfig
from .errors import ParseError, ValidationError
from .flow import GravityForcing
from .reaction import IgnitionNonlinearity


@dataclass(frozen=True)
class Key:
    name: str
    kind: type
    default: object
    help: str


KEYS = [
    Key("grid.lx", float, 128.0, "window length L_x"),
    Key("grid.lambda", float, 1.0, "channel width"),
    Key("grid.nx", int, 512, "cells along the channel"),
    Key("grid.ny", int, 64, "cells across the channel (>= 8)"),
    Key("grid.x_mode", str, "front", "front | periodic (periodic only for decay/tests)"),
    Key("reaction.kind", str, "quadratic-ignition", "quadratic-ignition | linear-ignition | tabulated"),
    Key("reaction.theta0", float, 0.25, "ignition threshold"),
    Key("reaction.amplitude", float, 2.0, "rate scale A"),
    Key("reaction.table_path", str, "", "CSV of theta,f pairs for kind = tabulated"),
    Key("flow.model", str, "stokes-evolution", "stokes-evolution | stokes-stationary | navier-stokes-stationary"),
    Key("flow.nu", float, 1.0, "viscosity"),
    Key("flow.n_flow", int, 1, "re-solve stationary flow every n steps"),
    Key("advection.scheme", str, "upwind", "upwind | central (central adds no numerical diffusion)"),
    Key("gravity.rho", float, 0.0, "Rayleigh number"),
    Key("gravity.angle_degrees", float, 0.0, "g_hat = (sin a, -cos a); 90 is along the channel"),
    Key("time.T", float, 30.0, "horizon"),
    Key("time.dt", str, "cfl", "fixed step or 'cfl'"),
    Key("time.cfl_safety", float, 0.4, "safety factor of the step limit"),
    Key("time.sample_interval", float, 0.1, "diagnostics sampling interval"),
    Key("time.snapshot_interval", float, 1.0, "temperature snapshot interval"),
    Key("window.threshold", float, 0.6, "recenter once the front passes this fraction of L_x"),
    Key("window.target", float, 0.4, "fraction of L_x the front is moved back to"),
    Key("init.mode", str, "front", "front | decay"),
    Key("init.front_center", str, "auto", "initial front position (auto: window.target * L_x)"),
    Key("init.perturbation_amplitude", float, 0.0, "amplitude of the compact perturbation"),
    Key("init.perturbation_width", float, 2.0, "half-width of the perturbation bump"),
    Key("init.perturbation_center", str, "auto", "bump centre (auto: front centre)"),
    Key("init.noise_amplitude", float, 0.0, "seeded uniform noise inside the bump"),
    Key("decay.flow", str, "zero", "zero | cellular"),
    Key("decay.flow_amplitude", float, 0.0, "cellular streamfunction amplitude A"),
    Key("decay.wavelength", float, 4.0, "cellular x-wavelength"),
    Key("decay.width", float, 1.0, "Gaussian width of phi0"),
    Key("decay.amplitude", float, 1.0, "Gaussian peak of phi0"),
    Key("decay.center", str, "auto", "Gaussian centre (auto: L_x/2)"),
    Key("decay.samples", int, 40, "log-spaced sample count"),
    Key("decay.t_start", float, 0.5, "first sample time"),
    Key("sandwich.t_min", str, "auto", "first snapshot time used by the sandwich check (auto: T/2)"),
    Key("sweep.rho", str, "0,0.05,0.1,0.2", "comma-separated Rayleigh numbers"),
    Key("sweep.nu", str, "1", "comma-separated viscosities"),
]
KEY_INDEX = {k.name: k for k in KEYS}


def help_text():
    width = max(len(k.name) for k in KEYS)
    return "\n".join(f"  {k.name:<{width}}  {k.help} [default: {k.default}]" for k in KEYS)


def parse_pairs(text):
    """``{key: (value_text, line_number)}`` with duplicate and unknown keys rejected."""
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", n)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError("empty key", n)
        if key not in KEY_INDEX:
            raise ParseError(f"unknown key {key!r}", n)
        if key in out:
            raise ParseError(f"duplicate key {key!r} (first on line {out[key][1]})", n)
        out[key] = (value, n)
    return out


def _convert(key, value, line):
    kind = KEY_INDEX[key].kind
    try:
        return kind(value)
    except ValueError:
        raise ParseError(f"{key}: cannot read {value!r} as {kind.__name__}", line) from None


def resolved_values(pairs):
    vals = {k.name: k.default for k in KEYS}
    for key, (value, line) in pairs.items():
        vals[key] = _convert(key, value, line)
    return vals


def _auto(v):
    if isinstance(v, str) and v.strip().lower() in ("auto", ""):
        return None
    try:
        return float(v)
    except ValueError:
        raise ValidationError(f"expected a number or 'auto', got {v!r}") from None


def build_config(vals, base_dir=None, seed=0):
    kind = vals["reaction.kind"]
    if kind == "tabulated":
        path = vals["reaction.table_path"]
        if not path:
            raise ValidationError("reaction.kind = tabulated requires reaction.table_path")
        p = Path(path)
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        f = IgnitionNonlinearity.from_csv(p, vals["reaction.theta0"], vals["reaction.amplitude"])
    else:
        f = IgnitionNonlinearity(kind, vals["reaction.theta0"], vals["reaction.amplitude"])
    gravity = GravityForcing.from_angle(vals["gravity.rho"], vals["gravity.angle_degrees"])
    dt = vals["time.dt"]
    dt = None if dt.strip().lower() == "cfl" else _auto(dt)
    return SimConfig(
        lx=vals["grid.lx"], lam=vals["grid.lambda"], nx=vals["grid.nx"], ny=vals["grid.ny"],
        x_mode=vals["grid.x_mode"],
        reaction=f,
        flow_model=vals["flow.model"], nu=vals["flow.nu"], n_flow=vals["flow.n_flow"],
        advection=vals["advection.scheme"],
        gravity=gravity,
        dt=dt, cfl_safety=vals["time.cfl_safety"], T=vals["time.T"],
        sample_interval=vals["time.sample_interval"],
        snapshot_interval=vals["time.snapshot_interval"],
        recenter_threshold=vals["window.threshold"], recenter_target=vals["window.target"],
        mode=vals["init.mode"],
        front_center=_auto(vals["init.front_center"]),
        perturbation_amplitude=vals["init.perturbation_amplitude"],
        perturbation_width=vals["init.perturbation_width"],
        perturbation_center=_auto(vals["init.perturbation_center"]),
        noise_amplitude=vals["init.noise_amplitude"],
        seed=seed,
        decay_flow=PrescribedFlow(vals["decay.flow"], vals["decay.flow_amplitude"],
                                  vals["decay.wavelength"]),
        decay_width=vals["decay.width"], decay_amplitude=vals["decay.amplitude"],
        decay_center=_auto(vals["decay.center"]),
        decay_samples=vals["decay.samples"], decay_t_start=vals["decay.t_start"],
        t_min=_auto(vals["sandwich.t_min"]),
    )


def parse_config(text, base_dir=None, seed=0):
    """Parse and validate a configuration document into a :class:`SimConfig`."""
    return build_config(resolved_values(parse_pairs(text)), base_dir, seed)


def canonical_text(text):
    """All keys (defaults filled) in sorted order; the basis of the config hash."""
    vals = resolved_values(parse_pairs(text))
    return "".join(f"{k} = {vals[k]!r}\n" for k in sorted(vals))


def config_hash(text):
    return hashlib.sha256(canonical_text(text).encode()).hexdigest()[:16]


def _float_list(s, key):
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"{key} must be a comma-separated list of numbers") from None


@dataclass
class SweepSpec:
    rhos: list
    nus: list
    base_text: str
    parallel: int = 1
    out_dir: str = "."
    seed: int = 0
    base_dir: str = None
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if 0.0 not in self.rhos:
            raise ValidationError("sweep.rho must include 0 (the laminar baseline)")
        if any(r < 0 for r in self.rhos):
            raise ValidationError("sweep.rho values must be >= 0")
        if not self.nus or any(n <= 0 for n in self.nus):
            raise ValidationError("sweep.nu values must be positive")
        if self.parallel < 1:
            raise ValidationError("parallelism must be >= 1")

    @classmethod
    def from_text(cls, text, **kw):
        vals = resolved_values(parse_pairs(text))
        return cls(_float_list(vals["sweep.rho"], "sweep.rho"),
                   _float_list(vals["sweep.nu"], "sweep.nu"), text, **kw)

    def run_texts(self):
        """Per-run config documents, in a fixed (rho, nu) order."""
        pairs = parse_pairs(self.base_text)
        out = []
        for nu in sorted(self.nus):
            for rho in sorted(self.rhos):
                vals = {k: v for k, (v, _) in pairs.items() if not k.startswith("sweep.")}
                vals.update(self.overrides)
                vals["gravity.rho"] = repr(rho)
                vals["flow.nu"] = repr(nu)
                text = "".join(f"{k} = {vals[k]}\n" for k in sorted(vals))
                out.append((rho, nu, text))
        return out
