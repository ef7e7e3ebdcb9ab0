"""Run configuration: TOML parsing and validation into scenario presets.

Layout::

    omega0_rad_s = 3.0e14          # optional, only used for Kelvin/second inputs

    [output]
    directory = "out"
    emit = ["populations", "coherences", "tensor_slices", "equilibrium_report"]

    [sweep]                        # optional
    axis = "N"                     # N | n_max | quadrature_order
    factors = [1, 2, 4]

    [[preset]]
    label = "thermalization_low_T"
    initial_system = "Ground"
    n_max = 20
    time = { t_max = 500.0, points = 501 }   # or time = { values = [...] }
    tb = { kind = "OhmicDrude", gamma = 0.1, cutoff = 20.0, beta = 8.2724 }
    # second = { kind = "Blackbody", tau_bb = 1.872e-9, cutoff = 8.3e5, beta = 0.3884 }

Every quantity is in natural units (hbar = m = omega0 = 1). A bath takes its
temperature as ``beta`` (hbar omega0 / k_B T) or ``temperature_K``.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .baths import BathKind, DiscretizationScheme, NodeRule, SpectralDensitySpec
from .quadratic_model import SystemOscillator
from .scenarios import BathSetup, InitialSystem, ScenarioPreset
from .units import DEFAULT_OMEGA0_SI, HBAR_SI, K_B_SI

EMIT_KINDS = ("populations", "coherences", "tensor_slices", "equilibrium_report")
SWEEP_AXES = ("N", "n_max", "quadrature_order")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    factors: tuple[float, ...]


@dataclass(frozen=True)
class RunConfig:
    presets: tuple[ScenarioPreset, ...]
    output_dir: Path = Path("out")
    emit: frozenset = field(default_factory=lambda: frozenset(EMIT_KINDS))
    sweep: SweepSpec | None = None
    omega0_rad_s: float = DEFAULT_OMEGA0_SI

    def normalized(self) -> dict:
        """Plain-data echo of the parsed values, in natural units."""
        return {
            "omega0_rad_s": self.omega0_rad_s,
            "output_dir": str(self.output_dir),
            "emit": sorted(self.emit),
            "sweep": None if self.sweep is None else {"axis": self.sweep.axis,
                                                       "factors": list(self.sweep.factors)},
            "presets": [preset_summary(p) for p in self.presets],
        }


def _bath_summary(b: BathSetup) -> dict:
    s = b.spec
    strength = "gamma" if s.kind is BathKind.OHMIC_DRUDE else "tau_bb"
    return {
        "label": b.label,
        "kind": s.kind.value,
        strength: s.coupling_strength,
        "cutoff": s.cutoff,
        "mass": s.mass,
        "beta": b.beta,
        "node_rule": b.scheme.node_rule.value,
        "mode_count": int(b.scheme.mode_count),
        "omega_max": b.scheme.ceiling_for(s),
    }


def preset_summary(p: ScenarioPreset) -> dict:
    t = p.time_grid
    return {
        "label": p.label,
        "kind": p.kind,
        "initial_system": p.initial_system.value,
        "n_max": p.n_max,
        "quadrature_factor": p.quadrature_factor,
        "system": {"mass": p.system.mass, "frequency": p.system.frequency},
        "time": {"points": int(t.size), "t_max": float(t[-1])},
        "tb": _bath_summary(p.tb),
        "second": None if p.second is None else _bath_summary(p.second),
    }


class _Table:
    """Dict view that records which keys were read, so leftovers can be rejected."""

    def __init__(self, data, path: str):
        if not isinstance(data, dict):
            raise ConfigError(path, f"expected a table, got {type(data).__name__}")
        self.data = data
        self.path = path
        self._seen: set[str] = set()

    def sub(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def get(self, key, default=None, required=False):
        self._seen.add(key)
        if key not in self.data:
            if required:
                raise ConfigError(self.sub(key), "missing required key")
            return default
        return self.data[key]

    def number(self, key, default=None, required=False) -> float | None:
        v = self.get(key, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(self.sub(key), f"expected a number, got {v!r}")
        if not np.isfinite(v):
            raise ConfigError(self.sub(key), "must be finite")
        return float(v)

    def integer(self, key, default=None, required=False) -> int | None:
        v = self.get(key, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(self.sub(key), f"expected an integer, got {v!r}")
        return v

    def string(self, key, default=None, required=False) -> str | None:
        v = self.get(key, default, required)
        if v is not None and not isinstance(v, str):
            raise ConfigError(self.sub(key), f"expected a string, got {v!r}")
        return v

    def finish(self):
        extra = sorted(set(self.data) - self._seen)
        if extra:
            raise ConfigError(self.sub(extra[0]), "unknown key")


def _choice(value: str, enum_cls, path: str):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise ConfigError(path, f"unknown value {value!r} (allowed: {allowed})") from None


def _beta(t: _Table, omega0_si: float) -> float:
    beta = t.number("beta")
    kelvin = t.number("temperature_K")
    if (beta is None) == (kelvin is None):
        raise ConfigError(t.sub("beta"), "give exactly one of beta or temperature_K")
    if kelvin is not None:
        if kelvin <= 0:
            raise ConfigError(t.sub("temperature_K"), "temperature must be positive")
        return HBAR_SI * omega0_si / (K_B_SI * kelvin)
    if beta <= 0:
        raise ConfigError(t.sub("beta"), "inverse temperature must be positive")
    return beta


def _bath(raw, path: str, default_label: str, omega0_si: float, system_mass: float = 1.0) -> BathSetup:
    t = _Table(raw, path)
    kind = _choice(t.string("kind", required=True), BathKind, t.sub("kind"))
    label = t.string("label", default_label)
    mass = t.number("mass", system_mass)
    try:
        if kind is BathKind.OHMIC_DRUDE:
            spec = SpectralDensitySpec.ohmic_drude(t.number("gamma", required=True),
                                                   t.number("cutoff", required=True), mass)
        else:
            spec = SpectralDensitySpec.blackbody(t.number("tau_bb", required=True),
                                                 t.number("cutoff"), mass)
    except ConfigError:
        raise
    except ValueError as exc:
        msg = str(exc)
        strength = "gamma" if kind is BathKind.OHMIC_DRUDE else "tau_bb"
        field_name = "cutoff" if "cutoff" in msg else strength if "coupling" in msg else "mass"
        raise ConfigError(t.sub(field_name), str(exc)) from None
    beta = _beta(t, omega0_si)
    default_rule = NodeRule.HYBRID if kind is BathKind.OHMIC_DRUDE else NodeRule.LOGARITHMIC
    rule_name = t.string("node_rule")
    rule = default_rule if rule_name is None else _choice(rule_name, NodeRule, t.sub("node_rule"))
    try:
        scheme = DiscretizationScheme(rule, t.integer("mode_count", 2000), t.number("omega_max"),
                                      t.number("omega_min"), t.number("omega_knee"))
        scheme.ceiling_for(spec)
        if rule is NodeRule.HYBRID:
            knee = scheme.knee_for(spec)
            if not knee < scheme.ceiling_for(spec):
                raise ValueError("frequency knee must lie below the ceiling")
    except ValueError as exc:
        msg = str(exc)
        key = "mode_count" if "mode_count" in msg else "omega_knee" if "knee" in msg else "omega_max"
        raise ConfigError(t.sub(key), msg) from None
    t.finish()
    return BathSetup(spec, beta, scheme, label)


def _time_grid(raw, path: str) -> np.ndarray:
    t = _Table(raw, path)
    values = t.get("values")
    if values is not None:
        if t.get("t_max") is not None or t.get("points") is not None:
            raise ConfigError(path, "give either values or t_max/points")
        if not isinstance(values, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            raise ConfigError(t.sub("values"), "expected a list of numbers")
        grid = np.asarray(values, dtype=float)
    else:
        t_max = t.number("t_max", required=True)
        points = t.integer("points", required=True)
        if points < 2 or t_max <= 0:
            raise ConfigError(path, "need t_max > 0 and at least 2 points")
        grid = np.linspace(0.0, t_max, points)
    t.finish()
    if grid.size == 0 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0) or not np.all(np.isfinite(grid)):
        raise ConfigError(t.sub("values"), "time grid must start at 0 and be strictly increasing")
    return grid


def _preset(raw, path: str, omega0_si: float) -> ScenarioPreset:
    t = _Table(raw, path)
    label = t.string("label", required=True)
    if not label or any(c in label for c in "/\\") or label.startswith("."):
        raise ConfigError(t.sub("label"), f"label {label!r} is not usable as a directory name")
    sys_t = _Table(t.get("system", {}), t.sub("system"))
    try:
        system = SystemOscillator(sys_t.number("mass", 1.0), sys_t.number("frequency", 1.0))
    except ValueError as exc:
        raise ConfigError(sys_t.path, str(exc)) from None
    sys_t.finish()
    tb = _bath(t.get("tb", required=True), t.sub("tb"), "TB", omega0_si, system.mass)
    if tb.spec.kind is not BathKind.OHMIC_DRUDE:
        raise ConfigError(t.sub("tb.kind"), "the first bath must be OhmicDrude")
    second_raw = t.get("second")
    second = None if second_raw is None else _bath(second_raw, t.sub("second"), "BB" if (
        isinstance(second_raw, dict) and second_raw.get("kind") == BathKind.BLACKBODY.value) else "TB2",
        omega0_si, system.mass)
    grid = _time_grid(t.get("time", required=True), t.sub("time"))
    default_start = InitialSystem.GROUND if second is None else InitialSystem.EFFECTIVE_EQUILIBRIUM
    start_name = t.string("initial_system")
    start = default_start if start_name is None else _choice(start_name, InitialSystem, t.sub("initial_system"))
    n_max = t.integer("n_max", 20)
    q_factor = t.integer("quadrature_factor", 1)
    t.finish()
    try:
        return ScenarioPreset(label, tb, grid, second, start, n_max, q_factor, system)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<document>", f"not valid TOML: {exc}") from None
    top = _Table(data, "")
    omega0 = top.number("omega0_rad_s", DEFAULT_OMEGA0_SI)
    if omega0 <= 0:
        raise ConfigError("omega0_rad_s", "must be positive")

    out = _Table(top.get("output", {}), "output")
    directory = out.string("directory", "out")
    emit_raw = out.get("emit", list(EMIT_KINDS))
    if not isinstance(emit_raw, list):
        raise ConfigError("output.emit", "expected a list")
    for i, e in enumerate(emit_raw):
        if e not in EMIT_KINDS:
            raise ConfigError(f"output.emit[{i}]", f"unknown output kind {e!r}")
    out.finish()

    sweep = None
    if top.get("sweep") is not None:
        sw = _Table(top.get("sweep"), "sweep")
        axis = sw.string("axis", required=True)
        if axis not in SWEEP_AXES:
            raise ConfigError("sweep.axis", f"unknown axis {axis!r} (allowed: {', '.join(SWEEP_AXES)})")
        factors = sw.get("factors", [1, 2])
        sweep = _sweep(axis, factors, "sweep.factors")
        sw.finish()

    raw_presets = top.get("preset", required=True)
    if not isinstance(raw_presets, list) or not raw_presets:
        raise ConfigError("preset", "need at least one [[preset]] table")
    presets = []
    seen = set()
    for i, raw in enumerate(raw_presets):
        p = _preset(raw, f"preset[{i}]", omega0)
        if p.label in seen:
            raise ConfigError(f"preset[{i}].label", f"duplicate preset label {p.label!r}")
        seen.add(p.label)
        presets.append(p)
    top.finish()
    return RunConfig(tuple(presets), Path(directory), frozenset(emit_raw), sweep, omega0)


def _sweep(axis: str, factors, path: str) -> SweepSpec:
    if not isinstance(factors, (list, tuple)) or not factors:
        raise ConfigError(path, "expected a non-empty list of factors")
    out = []
    for i, f in enumerate(factors):
        if isinstance(f, bool) or not isinstance(f, (int, float)) or not f > 0:
            raise ConfigError(f"{path}[{i}]", f"factor must be a positive number, got {f!r}")
        if axis != "N" and float(f) != int(f):
            raise ConfigError(f"{path}[{i}]", f"axis {axis} needs integer factors")
        out.append(float(f))
    if len(set(out)) != len(out):
        raise ConfigError(path, "factors must be distinct")
    return SweepSpec(axis, tuple(out))


def sweep_from_cli(axis: str, factors: str) -> SweepSpec:
    if axis not in SWEEP_AXES:
        raise ConfigError("--axis", f"unknown axis {axis!r} (allowed: {', '.join(SWEEP_AXES)})")
    try:
        values = [float(x) for x in factors.split(",") if x.strip()]
    except ValueError:
        raise ConfigError("--factors", f"cannot parse {factors!r}") from None
    return _sweep(axis, values, "--factors")


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text())
