"""Scenario configuration: TOML documents with one ``[[scenario]]`` table each.

A minimal scenario::

    [[scenario]]
    name = "tracking"
    trials = 100000
    seed = 7

    [scenario.field]
    type = "constant"
    level = 1.0

    [[scenario.estimator]]
    kind = "delta_tracking"
    oracle = "delta_tracking"
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..density import (
    Constant,
    Fractal2DSlice,
    GaussianMix,
    Interval,
    LinearRamp,
    PiecewiseConstantGrid,
    SineSum,
    cell_means,
    exact_optical_depth,
    piecewise_pdf_warp,
)
from ..depth import DepthSamplerSpec
from ..estimators import EstimatorSpec
from ..roulette import RouletteSpec

__all__ = [
    "ConfigError",
    "EstimatorEntry",
    "ScenarioConfig",
    "SweepSpec",
    "SWEEP_PARAMS",
    "build_field",
    "load_config",
    "parse_config",
]

SWEEP_PARAMS = (
    "tau", "tau_c", "control", "c", "M", "majorant_scale", "control_thickness",
    "amplitude", "budget",
)
ORACLES = ("delta_tracking", "johnson", "rrt", "bk_uniform")


class ConfigError(ValueError):
    """Invalid configuration, located by field path and (for syntax) line."""

    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if path:
            where.append(path)
        super().__init__(f"{': '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class EstimatorEntry:
    spec: EstimatorSpec
    oracle: str | None = None
    # sizing policy for budget sweeps: "majorant" or "repeats" (p-series CMF only)
    policy: str | None = None
    warp_cells: int = 0
    # compare against the oracle in the exit-code gate (the value is always reported)
    gate: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    field: Any
    estimators: tuple[EstimatorEntry, ...]
    interval: Interval = Interval(0.0, 1.0)
    trials: int = 10_000
    max_trials: int | None = None
    seed: int = 0
    sweep: SweepSpec | None = None
    reference: str = "exact"
    slab: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.trials < 2:
            raise ConfigError("trials must be >= 2", f"{self.name}.trials")
        if self.max_trials is not None and self.max_trials < self.trials:
            raise ConfigError("max_trials must be >= trials", f"{self.name}.max_trials")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer", f"{self.name}.seed")
        if self.reference not in ("exact", "quadrature"):
            raise ConfigError("reference must be 'exact' or 'quadrature'", f"{self.name}.reference")
        labels = [e.spec.label for e in self.estimators]
        if len(set(labels)) != len(labels):
            raise ConfigError("estimator labels must be unique", f"{self.name}.estimator")
        if not self.estimators:
            raise ConfigError("at least one estimator is required", f"{self.name}.estimator")


_FIELD_BUILDERS = {
    "constant": lambda t: Constant(float(t["level"])),
    "linear_ramp": lambda t: LinearRamp(float(t["v0"]), float(t["v1"]),
                                        float(t.get("start", 0.0)), float(t.get("end", 1.0))),
    "sine_sum": lambda t: SineSum(tuple(tuple(x) for x in t["terms"]), float(t["offset"])),
    "gaussian_mix": lambda t: GaussianMix(tuple(tuple(x) for x in t["bumps"]),
                                          float(t.get("offset", 0.0))),
    "grid": lambda t: PiecewiseConstantGrid(tuple(t["cells"]), float(t["cell_width"]),
                                            float(t.get("origin", 0.0))),
    "fractal": lambda t: Fractal2DSlice(
        octaves=int(t.get("octaves", 6)), lacunarity=float(t.get("lacunarity", 2.0)),
        gain=float(t.get("gain", 0.5)), seed=int(t.get("seed", 0)),
        scale=float(t.get("scale", 1.0)), column=float(t.get("column", 0.5)),
        base_frequency=float(t.get("base_frequency", 4.0)),
    ),
}


def build_field(table: dict, interval: Interval, path: str = "field"):
    if not isinstance(table, dict):
        raise ConfigError("expected a table", path)
    kind = table.get("type")
    if kind not in _FIELD_BUILDERS:
        raise ConfigError(f"unknown field type {kind!r}; choose from {sorted(_FIELD_BUILDERS)}",
                          f"{path}.type")
    try:
        prof = _FIELD_BUILDERS[kind](table)
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}", path) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from None
    if "tau" in table:
        tau0 = exact_optical_depth(prof, interval)
        if tau0 <= 0:
            raise ConfigError("cannot rescale a vacuum field", f"{path}.tau")
        prof = prof.scaled(float(table["tau"]) / tau0)
    return prof


_EST_KEYS = {
    "kind", "label", "control", "majorant_scale", "majorant", "c", "K", "p_zero", "M",
    "pattern", "endpoint_matching", "epm_warped", "warp_cells", "epm", "johnson_n", "rate",
    "repeats", "control_thickness", "oracle", "policy", "gate",
}


def _estimator(table: dict, field_, interval: Interval, path: str) -> EstimatorEntry:
    if not isinstance(table, dict):
        raise ConfigError("expected a table", path)
    unknown = set(table) - _EST_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", path)
    if "kind" not in table:
        raise ConfigError("missing key 'kind'", path)
    try:
        roulette = None
        if "c" in table or "K" in table or "p_zero" in table:
            roulette = RouletteSpec(float(table.get("c", 2.0)), table.get("K"),
                                    float(table.get("p_zero", 0.0)))
        kind = str(table["kind"])
        marching = kind.lower().replace("_", "") in ("unbiasedraymarching", "urm",
                                                      "biasedraymarching", "brm")
        sampler = None
        warp_cells = int(table.get("warp_cells", 0))
        if any(k in table for k in ("pattern", "endpoint_matching", "warp_cells")) or (
            "M" in table and not marching
        ):
            warp = (piecewise_pdf_warp(cell_means(field_, interval, warp_cells), interval)
                    if warp_cells else None)
            sampler = DepthSamplerSpec(
                M=int(table.get("M", 1)) if not marching else 1,
                pattern=table.get("pattern", "equidistant" if marching else "iid"),
                endpoint_matching=bool(table.get("endpoint_matching", False)),
                warp=warp,
                epm_warped=bool(table.get("epm_warped", True)),
            )
        spec = EstimatorSpec(
            kind,
            label=table.get("label"),
            control=table.get("control"),
            majorant_scale=float(table.get("majorant_scale", 1.0)),
            majorant=table.get("majorant"),
            roulette=roulette,
            sampler=sampler,
            M=int(table["M"]) if marching and "M" in table else None,
            control_thickness=table.get("control_thickness"),
            epm=str(table.get("epm", "auto")),
            johnson_n=int(table.get("johnson_n", 1)),
            rate=table.get("rate"),
            repeats=int(table.get("repeats", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from None
    oracle = table.get("oracle")
    if oracle is not None and oracle not in ORACLES:
        raise ConfigError(f"unknown oracle {oracle!r}; choose from {ORACLES}", f"{path}.oracle")
    policy = table.get("policy")
    if policy not in (None, "majorant", "repeats"):
        raise ConfigError("policy must be 'majorant' or 'repeats'", f"{path}.policy")
    return EstimatorEntry(spec, oracle, policy, warp_cells, bool(table.get("gate", True)))


def _scenario(table: dict, idx: int) -> ScenarioConfig:
    path = f"scenario[{idx}]"
    if "name" not in table:
        raise ConfigError("missing key 'name'", path)
    name = str(table["name"])
    path = f"scenario[{idx}] ({name})"
    try:
        a, b = table.get("interval", [0.0, 1.0])
        interval = Interval(float(a), float(b))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad interval: {exc}", f"{path}.interval") from None
    slab = table.get("slab")
    if slab is not None and not isinstance(slab, dict):
        raise ConfigError("expected a table", f"{path}.slab")
    if "field" in table:
        field_ = build_field(table["field"], interval, f"{path}.field")
    elif slab is not None:
        # per-pixel fields are built by the slab runner
        field_ = Fractal2DSlice()
    else:
        raise ConfigError("missing table 'field'", path)
    ests = table.get("estimator", [])
    if not isinstance(ests, list):
        raise ConfigError("use [[scenario.estimator]] array tables", f"{path}.estimator")
    entries = tuple(
        _estimator(t, field_, interval, f"{path}.estimator[{i}]") for i, t in enumerate(ests)
    )
    sweep = None
    if "sweep" in table:
        sw = table["sweep"]
        param = sw.get("param")
        if param not in SWEEP_PARAMS:
            raise ConfigError(f"unknown sweep param {param!r}; choose from {SWEEP_PARAMS}",
                              f"{path}.sweep.param")
        values = sw.get("values")
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep values must be a nonempty list", f"{path}.sweep.values")
        sweep = SweepSpec(param, tuple(float(v) for v in values))
    try:
        return ScenarioConfig(
            name=name,
            field=field_,
            estimators=entries,
            interval=interval,
            trials=int(table.get("trials", 10_000)),
            max_trials=table.get("max_trials"),
            seed=int(table.get("seed", 0)),
            sweep=sweep,
            reference=str(table.get("reference", "exact")),
            slab=slab,
        )
    except ConfigError as exc:
        # ScenarioConfig locates errors as "<name>.<key>"; rebase onto the document path
        key = exc.path.split(".", 1)[1] if "." in exc.path else exc.path
        msg = str(exc).split(": ", 1)[1] if exc.path else str(exc)
        raise ConfigError(msg, f"{path}.{key}" if key else path) from None


def parse_config(text: str) -> list[ScenarioConfig]:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(exc.msg if hasattr(exc, "msg") else str(exc),
                          line=getattr(exc, "lineno", None)) from None
    scenarios = doc.get("scenario")
    if not isinstance(scenarios, list) or not scenarios:
        raise ConfigError("expected at least one [[scenario]] table", "scenario")
    out = [_scenario(t, i) for i, t in enumerate(scenarios)]
    names = [s.name for s in out]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise ConfigError(f"duplicate scenario names {sorted(dup)}", "scenario")
    return out


def load_config(path: str | Path) -> list[ScenarioConfig]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)
