"""Run configuration: YAML loading, overrides and validation.

A config file is a nested mapping; every key is optional and missing keys
fall back to :data:`DEFAULTS` (merged with the per-command defaults in
:data:`COMMAND_DEFAULTS`).  Errors are reported as
``<file>:<line>: <dotted.key>: <message>`` where a line is known.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from scbell.bcs import MATERIALS, SUPERCONDUCTORS, MaterialParams, OperatingPoint, SuperconductorParams
from scbell.errors import ConfigurationError
from scbell.rates import bracket_zero_sum
from scbell.spectral import DEFAULT_LINEWIDTH, DEFAULT_TAIL_LAMBDA, DEFAULT_TAIL_LEVEL

AXES = (
    "temperature_over_tc",
    "detuning_over_delta0",
    "splitting_over_mun",
    "detuning_over_mun",
    "bandwidth_over_mun",
    "bandwidth_over_splitting",
)

DEFAULTS = {
    "material": {"preset": "InGaAs-QW", "overrides": {}},
    "superconductor": {"preset": "Nb", "overrides": {}},
    "operating_point": {
        "temperature_over_tc": 0.3,
        "w_sum": None,  # meV; null selects the heavy-hole bracket zero
        "detuning_over_delta0": 1.0,
        "B2": 1.0,
        "bandwidth_over_mun": 0.0,
    },
    "grid": None,
    "bandwidth": {"n_quad": 21, "linewidth": DEFAULT_LINEWIDTH},
    "spectrum": {
        "broadening": [0.3, 0.5, 1.0],
        "tail_level": DEFAULT_TAIL_LEVEL,
        "tail_lambda": DEFAULT_TAIL_LAMBDA,
        "linewidth": None,  # meV; null uses half the first broadening
        "range": [-4.0, 4.0, 401],
    },
    "oracle": {
        "n_k": 20000,
        "k_max": 8.0,
        "eta": None,
        "profile": "lorentzian",
        "temperatures_over_tc": [0.2, 0.35, 0.5, 0.65, 0.8],
        "one_photon_detunings": [2.5, 3.0, 3.5, 4.0, 5.0],
        "two_photon_detunings": [0.2, 0.55, 0.9, 1.25, 1.6],
        "tolerance": 0.02,
    },
    "bell": {"qwp_degrees": [45.0, -45.0], "arm": "mu", "hwp_degrees": [0.0, 45.0]},
    "output": {"path": None, "format": "csv"},
    "jobs": 1,
}

COMMAND_DEFAULTS = {
    "dp-map": {
        "grid": {
            "x": {"axis": "detuning_over_delta0", "range": [0.1, 4.0, 100]},
            "y": {"axis": "temperature_over_tc", "range": [0.05, 0.99, 100]},
        }
    },
    "bandwidth-map": {
        "grid": {
            "x": {"axis": "splitting_over_mun", "range": [0.2, 2.0, 10]},
            "y": {"axis": "bandwidth_over_mun", "range": [0.0, 2.0, 11]},
        }
    },
}

# --------------------------------------------------------------------------
# Loading
# --------------------------------------------------------------------------


def _line_index(node, path=(), out=None):
    """Map dotted key paths to 1-based source lines of a composed YAML node."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            sub = path + (str(key_node.value),)
            out[sub] = key_node.start_mark.line + 1
            _line_index(value_node, sub, out)
    return out


@dataclass
class Source:
    """Where configuration values came from, for error messages."""

    name: str = "<defaults>"
    lines: dict = field(default_factory=dict)
    overridden: set = field(default_factory=set)

    def where(self, path) -> str:
        path = tuple(path)
        dotted = ".".join(path)
        if path in self.overridden:
            return f"--set {dotted}"
        for n in range(len(path), 0, -1):
            if path[:n] in self.lines:
                return f"{self.name}:{self.lines[path[:n]]}: {dotted}"
        return f"{self.name}: {dotted}"


def parse_yaml(text: str, name: str = "<config>"):
    """Parse YAML text into ``(data, Source)``; syntax errors carry the line."""
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = f"{mark.line + 1}" if mark is not None else "?"
        raise ConfigurationError(f"{name}:{line}: {exc.problem}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{name}:1: top level must be a mapping")
    return data, Source(name, _line_index(node))


def load_file(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_yaml(text, path)


def recipe_names():
    files = resources.files("scbell").joinpath("recipes")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".yaml"))


def load_recipe(name: str):
    if name not in recipe_names():
        raise ConfigurationError(f"unknown recipe {name!r}; available: {', '.join(recipe_names())}")
    text = resources.files("scbell").joinpath("recipes", f"{name}.yaml").read_text(encoding="utf-8")
    return parse_yaml(text, f"recipe:{name}")


def merge(base, extra):
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def apply_override(data: dict, assignment: str, source: Source) -> dict:
    """Apply ``key.sub=value``; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigurationError(f"--set {assignment}: expected key=value")
    key, _, raw = assignment.partition("=")
    path = tuple(part for part in key.strip().split(".") if part)
    if not path:
        raise ConfigurationError(f"--set {assignment}: empty key")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        raise ConfigurationError(f"--set {key}: cannot parse value {raw!r}") from None
    data = copy.deepcopy(data)
    node = data
    for part in path[:-1]:
        if node.get(part) is None:
            node[part] = {}
        if not isinstance(node[part], dict):
            raise ConfigurationError(f"--set {key}: {part} is not a section")
        node = node[part]
    node[path[-1]] = value
    source.overridden.add(path)
    return data


def effective_config(command: str, data: dict) -> dict:
    """Defaults, then command defaults, then the user mapping."""
    base = merge(DEFAULTS, COMMAND_DEFAULTS.get(command, {}))
    return merge(base, data)


# --------------------------------------------------------------------------
# Validation into typed objects
# --------------------------------------------------------------------------


def _check_keys(section: dict, allowed, path, source):
    if not isinstance(section, dict):
        raise ConfigurationError(f"{source.where(path)}: expected a mapping")
    for key in section:
        if key not in allowed:
            raise ConfigurationError(f"{source.where(tuple(path) + (key,))}: unknown key")


def _number(value, path, source, positive=False, nonnegative=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{source.where(path)}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigurationError(f"{source.where(path)}: expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigurationError(f"{source.where(path)}: must be finite")
    if positive and not value > 0:
        raise ConfigurationError(f"{source.where(path)}: must be positive, got {value!r}")
    if nonnegative and not value >= 0:
        raise ConfigurationError(f"{source.where(path)}: must be non-negative, got {value!r}")
    return int(value) if integer else float(value)


def _build(cls, presets, section, path, source):
    _check_keys(section, ("preset", "overrides", *cls.__dataclass_fields__), path, source)
    preset = section.get("preset")
    overrides = dict(section.get("overrides") or {})
    inline = {k: v for k, v in section.items() if k not in ("preset", "overrides")}
    if preset is None:
        params = {}
    elif preset in presets:
        params = {k: getattr(presets[preset], k) for k in cls.__dataclass_fields__}
    else:
        raise ConfigurationError(f"{source.where(path + ('preset',))}: unknown preset {preset!r}")
    for key, value in {**inline, **overrides}.items():
        sub = path + (("overrides", key) if key in overrides else (key,))
        if key not in cls.__dataclass_fields__:
            raise ConfigurationError(f"{source.where(sub)}: unknown parameter")
        params[key] = _number(value, sub, source)
    missing = [k for k in cls.__dataclass_fields__ if k not in params]
    if missing:
        raise ConfigurationError(f"{source.where(path)}: missing {', '.join(missing)} (no preset given)")
    try:
        return cls(**params)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source.where(path)}: {exc}") from None


@dataclass(frozen=True)
class AxisSpec:
    axis: str
    lo: float
    hi: float
    n: int

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class SweepGrid:
    x: AxisSpec
    y: AxisSpec


def _axis(section, path, source) -> AxisSpec:
    _check_keys(section, ("axis", "range"), path, source)
    axis = section.get("axis")
    if axis not in AXES:
        raise ConfigurationError(f"{source.where(path + ('axis',))}: axis must be one of {', '.join(AXES)}")
    rng = section.get("range")
    if not isinstance(rng, list) or len(rng) != 3:
        raise ConfigurationError(f"{source.where(path + ('range',))}: expected [lo, hi, n]")
    lo = _number(rng[0], path + ("range",), source)
    hi = _number(rng[1], path + ("range",), source)
    n = _number(rng[2], path + ("range",), source, integer=True)
    if n < 2:
        raise ConfigurationError(f"{source.where(path + ('range',))}: n must be at least 2")
    if not lo < hi:
        raise ConfigurationError(f"{source.where(path + ('range',))}: lo must be below hi")
    return AxisSpec(axis, lo, hi, n)


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration for one CLI command."""

    command: str
    raw: dict
    material: MaterialParams
    superconductor: SuperconductorParams
    temperature_over_tc: float
    w_sum: float | None
    detuning_over_delta0: float
    B2: float
    bandwidth_over_mun: float
    grid: SweepGrid | None
    n_quad: int
    linewidth: float
    broadening: tuple
    tail_level: float
    tail_lambda: float
    spectrum_linewidth: float
    spectrum_range: AxisSpec
    oracle: dict
    qwp_degrees: tuple
    arm: str
    hwp_degrees: tuple
    out: str | None
    fmt: str
    jobs: int

    def pair_energy(self, mat: MaterialParams) -> float:
        return bracket_zero_sum(mat) if self.w_sum is None else self.w_sum

    def base_point(self) -> OperatingPoint:
        mat, sc = self.material, self.superconductor
        return OperatingPoint.from_sum(
            self.temperature_over_tc * sc.Tc,
            self.pair_energy(mat),
            self.detuning_over_delta0 * sc.delta0,
            self.B2,
            self.bandwidth_over_mun * mat.mu_n,
        )

    def dump(self) -> str:
        """Effective configuration as YAML; loading it reproduces this run."""
        return yaml.safe_dump(self.raw, sort_keys=False, default_flow_style=None)


def build_config(command: str, data: dict, source: Source | None = None) -> RunConfig:
    """Validate a merged mapping (see :func:`effective_config`)."""
    source = source or Source()
    raw = effective_config(command, data)
    _check_keys(raw, DEFAULTS.keys(), (), source)

    mat = _build(MaterialParams, MATERIALS, raw["material"], ("material",), source)
    sc = _build(SuperconductorParams, SUPERCONDUCTORS, raw["superconductor"], ("superconductor",), source)

    op = raw["operating_point"]
    _check_keys(op, DEFAULTS["operating_point"], ("operating_point",), source)
    opp = ("operating_point",)
    t = _number(op["temperature_over_tc"], opp + ("temperature_over_tc",), source, nonnegative=True)
    w_sum = None if op["w_sum"] is None else _number(op["w_sum"], opp + ("w_sum",), source, positive=True)
    detuning = _number(op["detuning_over_delta0"], opp + ("detuning_over_delta0",), source)
    B2 = _number(op["B2"], opp + ("B2",), source, positive=True)
    bw = _number(op["bandwidth_over_mun"], opp + ("bandwidth_over_mun",), source, nonnegative=True)

    grid = None
    if raw["grid"] is not None:
        _check_keys(raw["grid"], ("x", "y"), ("grid",), source)
        if "x" not in raw["grid"] or "y" not in raw["grid"]:
            raise ConfigurationError(f"{source.where(('grid',))}: both x and y axes are required")
        gx = _axis(raw["grid"]["x"], ("grid", "x"), source)
        gy = _axis(raw["grid"]["y"], ("grid", "y"), source)
        if gx.axis == gy.axis:
            raise ConfigurationError(f"{source.where(('grid', 'y', 'axis'))}: axes must be distinct")
        grid = SweepGrid(gx, gy)
    elif command in ("dp-map", "bandwidth-map"):
        raise ConfigurationError(f"{source.where(('grid',))}: {command} needs a grid")

    bwc = raw["bandwidth"]
    _check_keys(bwc, DEFAULTS["bandwidth"], ("bandwidth",), source)
    n_quad = _number(bwc["n_quad"], ("bandwidth", "n_quad"), source, integer=True)
    if n_quad < 9:
        raise ConfigurationError(f"{source.where(('bandwidth', 'n_quad'))}: must be at least 9")
    linewidth = _number(bwc["linewidth"], ("bandwidth", "linewidth"), source, positive=True)

    sp = raw["spectrum"]
    _check_keys(sp, DEFAULTS["spectrum"], ("spectrum",), source)
    broadening = sp["broadening"]
    if not isinstance(broadening, list) or not broadening:
        raise ConfigurationError(f"{source.where(('spectrum', 'broadening'))}: expected a non-empty list")
    broadening = tuple(
        _number(b, ("spectrum", "broadening"), source, nonnegative=True) for b in broadening
    )
    tail_level = _number(sp["tail_level"], ("spectrum", "tail_level"), source, nonnegative=True)
    if tail_level >= 1:
        raise ConfigurationError(f"{source.where(('spectrum', 'tail_level'))}: must be below 1")
    tail_lambda = _number(sp["tail_lambda"], ("spectrum", "tail_lambda"), source, positive=True)
    if sp["linewidth"] is None:
        sp_linewidth = 0.5 * broadening[0]
    else:
        sp_linewidth = _number(sp["linewidth"], ("spectrum", "linewidth"), source, nonnegative=True)
    sp_range = _axis({"axis": "detuning_over_delta0", "range": sp["range"]}, ("spectrum",), source)

    orc = raw["oracle"]
    _check_keys(orc, DEFAULTS["oracle"], ("oracle",), source)

    bell = raw["bell"]
    _check_keys(bell, DEFAULTS["bell"], ("bell",), source)
    qwp = bell["qwp_degrees"]
    if not isinstance(qwp, list) or len(qwp) != 2:
        raise ConfigurationError(f"{source.where(('bell', 'qwp_degrees'))}: expected two angles")
    qwp = tuple(_number(a, ("bell", "qwp_degrees"), source) for a in qwp)
    if bell["arm"] not in ("mu", "nu"):
        raise ConfigurationError(f"{source.where(('bell', 'arm'))}: must be mu or nu")
    hwp = tuple(_number(a, ("bell", "hwp_degrees"), source) for a in bell["hwp_degrees"])

    out = raw["output"]
    _check_keys(out, DEFAULTS["output"], ("output",), source)
    if out["format"] not in ("csv", "json"):
        raise ConfigurationError(f"{source.where(('output', 'format'))}: must be csv or json")
    jobs = _number(raw["jobs"], ("jobs",), source, integer=True)
    if jobs < 1:
        raise ConfigurationError(f"{source.where(('jobs',))}: must be at least 1")

    return RunConfig(
        command=command,
        raw=raw,
        material=mat,
        superconductor=sc,
        temperature_over_tc=t,
        w_sum=w_sum,
        detuning_over_delta0=detuning,
        B2=B2,
        bandwidth_over_mun=bw,
        grid=grid,
        n_quad=n_quad,
        linewidth=linewidth,
        broadening=broadening,
        tail_level=tail_level,
        tail_lambda=tail_lambda,
        spectrum_linewidth=sp_linewidth,
        spectrum_range=sp_range,
        oracle=dict(orc),
        qwp_degrees=qwp,
        arm=bell["arm"],
        hwp_degrees=hwp,
        out=out["path"],
        fmt=out["format"],
        jobs=jobs,
    )
