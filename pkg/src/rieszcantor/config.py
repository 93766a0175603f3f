"""Experiment configuration: one TOML document describing a battery of runs.

A document has top-level settings, optional ``[kernel]``, ``[corona]``,
``[wolff]`` and ``[bench]`` tables, and one ``[[battery]]`` table per family of
configurations.  A battery table holds a ``spec`` (CantorSpec fields), a
``mass`` rule and optional ``depths`` and ``seeds`` lists; it expands to the
product of the two lists.  Seeds drive both the construction and a random mass
rule.

Errors are raised as :class:`ConfigError` with either the TOML line/column or a
dotted field path such as ``battery[1].spec.s``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import tomli

from .capacity import BatteryEntry, WolffParams
from .corona import CoronaParams
from .errors import ConfigError, SpecViolation
from .geometry import CantorSpec
from .measure import MassRule
from .riesz import KernelParams

__all__ = ["SCHEMA_VERSION", "BatterySpec", "ExperimentConfig", "load_config", "default_config_text"]

SCHEMA_VERSION = 1
_TOP = {"schema_version", "name", "output_dir", "formats", "threads", "kernel", "corona", "wolff", "bench", "battery"}
_FORMATS = ("json", "csv", "svg", "png")
_KERNEL_KEYS = {"epsilon", "mode", "theta_open", "tol", "max_order", "leaf_size", "direct_max"}
_WOLFF_KEYS = {"alpha", "p", "cutoff_factor", "mode", "theta_w", "exact_max"}
_BENCH_DEFAULT = {"spec": {"dimension": 2, "s": 1.5, "layout": "grid8", "ratio": 0.25}, "depths": [5],
                  "theta_open": 0.4, "random_specs": 10, "random_depth": 5,
                  "random_spec": {"dimension": 2, "s": 1.5, "layout": "random5", "ratio": "random",
                                  "ratio_bounds": [0.125, 0.2]}}


def default_config_text() -> str:
    return resources.files("rieszcantor").joinpath("data/default.toml").read_text()


@dataclass(frozen=True)
class BatterySpec:
    """One ``[[battery]]`` table before expansion."""

    name: str
    spec: dict
    mass: dict
    depths: tuple = ()
    seeds: tuple = ()

    def expand(self, kernel: dict, wolff: dict) -> list:
        out = []
        depths = self.depths or (self.spec.get("depth", 3),)
        seeds = self.seeds or (None,)
        for depth in depths:
            for seed in seeds:
                spec = dict(self.spec, depth=depth)
                mass = dict(self.mass)
                label = f"{self.name}-K{depth}"
                if seed is not None:
                    spec["seed"] = seed
                    mass.setdefault("seed", seed)
                    label += f"-s{seed}"
                cs = CantorSpec.from_dict(spec, f"battery.{self.name}.spec")
                out.append(BatteryEntry(cs, _mass_rule(mass, f"battery.{self.name}.mass"),
                                        KernelParams(cs.s, **kernel),
                                        _wolff_params(wolff, cs), label))
        return out


def _mass_rule(data: dict, where: str) -> MassRule:
    known = {f.name for f in fields(MassRule)} - {"table"}
    bad = sorted(set(data) - known)
    if bad:
        raise ConfigError(f"unknown field(s) {bad}", where)
    try:
        return MassRule(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), where) from None


def _wolff_params(data: dict, spec: CantorSpec) -> WolffParams:
    kw = dict(data)
    if "alpha" in kw:
        return WolffParams(**kw)
    return WolffParams.for_corollary(spec.dimension, spec.s, **{k: v for k, v in kw.items() if k != "p"})


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "default"
    output_dir: str = "rieszcantor-out"
    formats: tuple = ("json", "csv", "svg")
    threads: int = 1
    kernel: dict = field(default_factory=dict)
    corona: CoronaParams = CoronaParams()
    wolff: dict = field(default_factory=dict)
    bench: dict = field(default_factory=lambda: dict(_BENCH_DEFAULT))
    battery: tuple = ()
    source: str = ""

    def entries(self) -> list:
        out = []
        for b in self.battery:
            out.extend(b.expand(self.kernel, self.wolff))
        return out

    def kernel_params(self, s: float) -> KernelParams:
        return KernelParams(s, **self.kernel)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "output_dir": self.output_dir,
            "formats": list(self.formats),
            "threads": self.threads,
            "kernel": dict(sorted(self.kernel.items())),
            "corona": self.corona.to_dict(),
            "wolff": dict(sorted(self.wolff.items())),
            "bench": self.bench,
            "battery": [{"name": b.name, "spec": b.spec, "mass": b.mass, "depths": list(b.depths),
                         "seeds": list(b.seeds)} for b in self.battery],
        }

    def digest(self) -> str:
        """sha256 of the canonical JSON form (output location and threads excluded)."""
        data = self.to_dict()
        data.pop("output_dir")
        data.pop("threads")
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def overrides(self) -> dict:
        """Constants differing from the built-in defaults, as dotted keys."""
        out = {}
        base = CoronaParams().to_dict()
        for k, v in self.corona.to_dict().items():
            if base[k] != v:
                out[f"corona.{k}"] = v
        for k, v in self.kernel.items():
            out[f"kernel.{k}"] = v
        for k, v in self.wolff.items():
            out[f"wolff.{k}"] = v
        return out

    def with_overrides(self, seed: int | None = None, depth: int | None = None,
                       output_dir: str | None = None, threads: int | None = None,
                       formats: tuple | None = None) -> "ExperimentConfig":
        battery = []
        for b in self.battery:
            b2 = b
            if depth is not None:
                b2 = replace(b2, depths=(depth,))
            if seed is not None and b2.seeds:
                b2 = replace(b2, seeds=(seed,))
            battery.append(b2)
        bench = dict(self.bench)
        if depth is not None:
            bench["depths"] = [depth]
        kw = {"battery": tuple(battery), "bench": bench}
        if output_dir is not None:
            kw["output_dir"] = output_dir
        if threads is not None:
            kw["threads"] = threads
        if formats is not None:
            kw["formats"] = tuple(formats)
        return replace(self, **kw)


def _check_keys(data: dict, allowed: set, where: str):
    bad = sorted(set(data) - allowed)
    if bad:
        raise ConfigError(f"unknown field(s) {bad}", where)


def _battery(k: int, raw) -> BatterySpec:
    where = f"battery[{k}]"
    if not isinstance(raw, dict):
        raise ConfigError("expected a table", where)
    _check_keys(raw, {"name", "spec", "mass", "depths", "seeds"}, where)
    if "spec" not in raw:
        raise ConfigError("missing field 'spec'", where)
    spec = dict(raw["spec"])
    mass = dict(raw.get("mass", {"kind": "uniform"}))
    depths = tuple(raw.get("depths", ()))
    seeds = tuple(raw.get("seeds", ()))
    for j, d in enumerate(depths):
        if not isinstance(d, int) or d < 0:
            raise ConfigError(f"depth {d!r} must be a non-negative integer", f"{where}.depths[{j}]")
    if any(not isinstance(s, int) for s in seeds):
        raise ConfigError("seeds must be integers", f"{where}.seeds")
    b = BatterySpec(str(raw.get("name", f"battery{k}")), spec, mass, depths, seeds)
    try:
        probe = CantorSpec.from_dict(dict(spec, depth=0), f"{where}.spec")
    except SpecViolation as exc:
        raise ConfigError(str(exc), f"{where}.spec") from None
    _mass_rule(mass, f"{where}.mass")
    if (probe.is_random or mass.get("kind") == "random") and not seeds:
        raise ConfigError("randomised battery needs a non-empty 'seeds' list", f"{where}.seeds")
    return b


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        line, col = getattr(exc, "lineno", None), getattr(exc, "colno", None)
        where = f"{source}: line {line}, column {col}" if line is not None else source
        raise ConfigError(getattr(exc, "msg", str(exc)), where) from None
    _check_keys(data, _TOP, source)
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}", "schema_version")
    kernel = dict(data.get("kernel", {}))
    _check_keys(kernel, _KERNEL_KEYS, "kernel")
    wolff = dict(data.get("wolff", {}))
    _check_keys(wolff, _WOLFF_KEYS, "wolff")
    corona_raw = dict(data.get("corona", {}))
    _check_keys(corona_raw, {f.name for f in fields(CoronaParams)}, "corona")
    try:
        corona = CoronaParams(**corona_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "corona") from None
    try:
        KernelParams(1.5, **kernel)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "kernel") from None
    formats = tuple(data.get("formats", ("json", "csv", "svg")))
    for f in formats:
        if f not in _FORMATS:
            raise ConfigError(f"unknown format {f!r}; expected one of {_FORMATS}", "formats")
    threads = data.get("threads", 1)
    if not isinstance(threads, int) or threads < 1:
        raise ConfigError("threads must be a positive integer", "threads")
    bench = dict(_BENCH_DEFAULT, **data.get("bench", {}))
    _check_keys(bench, set(_BENCH_DEFAULT), "bench")
    battery = tuple(_battery(k, raw) for k, raw in enumerate(data.get("battery", [])))
    cfg = ExperimentConfig(str(data.get("name", "default")), str(data.get("output_dir", "rieszcantor-out")),
                           formats, threads, kernel, corona, wolff, bench, battery, source)
    for b in battery:
        try:
            b.expand(kernel, wolff)
        except (SpecViolation, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), f"battery.{b.name}") from None
    return cfg


def load_config(path=None) -> ExperimentConfig:
    """Read a config file, or the shipped default when ``path`` is None."""
    if path is None:
        return parse_config(default_config_text(), "<default>")
    p = Path(path)
    if not p.exists():
        raise ConfigError("file not found", str(p))
    return parse_config(p.read_text(), str(p))
