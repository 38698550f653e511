"""TOML run configuration with field-precise validation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli
import tomli_w

from .dynamics import IntegratorConfig
from .gas import GasState, LevelGrid, Statistics, random_state
from .kernel import RateSpec
from .qmath import QIndex


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


_MISSING = object()


class _Table:
    def __init__(self, data: dict, where: str, source: str):
        self.data, self.where, self.source = data, where, source
        self.used: set[str] = set()

    def _name(self, key):
        return f"{self.where}.{key}" if self.where else key

    def fail(self, key, msg):
        raise ConfigError(f"{self.source}: field '{self._name(key)}': {msg}")

    def get(self, key, kind, default=_MISSING):
        self.used.add(key)
        if key not in self.data:
            if default is _MISSING:
                self.fail(key, "required field is missing")
            return default
        value = self.data[key]
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                self.fail(key, f"expected a number, got {value!r}")
            value = float(value)
            if not math.isfinite(value):
                self.fail(key, "must be finite")
        elif kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(key, f"expected an integer, got {value!r}")
        elif kind is bool:
            if not isinstance(value, bool):
                self.fail(key, f"expected true/false, got {value!r}")
        elif kind is str:
            if not isinstance(value, str):
                self.fail(key, f"expected a string, got {value!r}")
        return value

    def table(self, key, required=True) -> _Table | None:
        self.used.add(key)
        if key not in self.data:
            if required:
                raise ConfigError(f"{self.source}: table [{key}] is missing")
            return None
        value = self.data[key]
        if not isinstance(value, dict):
            self.fail(key, "expected a table")
        return _Table(value, key, self.source)

    def finish(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            self.fail(extra[0], "unknown field")


def _float_list(t: _Table, key, length=None):
    value = t.data[key]
    t.used.add(key)
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        t.fail(key, "expected a list of numbers")
    if length is not None and len(value) != length:
        t.fail(key, f"expected {length} entries, got {len(value)}")
    return [float(v) for v in value]


@dataclass
class RunConfig:
    q: float
    statistics: Statistics
    levels: LevelGrid
    initial: dict[str, Any] | None = None
    kernel: RateSpec = field(default_factory=lambda: RateSpec.constant(1.0))
    integrator: IntegratorConfig | None = None
    equilibrium: dict[str, float] | None = None
    prefix: str | None = None
    deterministic_reduction: bool = True

    @property
    def qindex(self) -> QIndex:
        return QIndex(self.q)

    def initial_state(self) -> GasState:
        if self.initial is None:
            raise ConfigError("table [initial] is missing")
        if self.initial["kind"] == "explicit":
            return self.levels.state(self.initial["occupations"], self.statistics)
        return random_state(
            self.levels, self.initial["n_target"], self.initial["seed"], self.statistics
        )

    def to_dict(self) -> dict:
        lv = self.levels
        levels: dict[str, Any] = {"spacing": lv.spacing}
        if lv.lattice == tuple(range(len(lv))):
            levels["count"] = len(lv)
        else:
            levels["lattice"] = list(lv.lattice)
        deg = set(lv.degeneracy)
        levels["degeneracy"] = lv.degeneracy[0] if len(deg) == 1 else list(lv.degeneracy)
        out: dict[str, Any] = {
            "q": self.q,
            "statistics": self.statistics.value,
            "deterministic_reduction": self.deterministic_reduction,
            "levels": levels,
        }
        if self.initial is not None:
            out["initial"] = dict(self.initial)
        k = self.kernel
        out["kernel"] = (
            {"kind": "constant", "value": k.value}
            if k.kind == "constant"
            else {"kind": "random", "seed": k.seed, "min": k.min, "max": k.max}
        )
        if self.integrator is not None:
            ic = self.integrator
            out["integrator"] = {
                "dt": ic.dt,
                "t_end": ic.t_end,
                "sample_every": ic.sample_every,
                "max_halvings": ic.max_halvings,
                "converge_tol": ic.converge_tol,
                "converge_samples": ic.converge_samples,
            }
        if self.equilibrium is not None:
            out["equilibrium"] = dict(self.equilibrium)
        if self.prefix is not None:
            out["outputs"] = {"prefix": self.prefix}
        return out

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())


def parse_config(data: dict, source: str = "<config>") -> RunConfig:
    top = _Table(data, "", source)
    q = top.get("q", float)
    try:
        QIndex(q)
    except ValueError as exc:
        top.fail("q", str(exc))
    stats_raw = top.get("statistics", str)
    try:
        statistics = Statistics.parse(stats_raw)
    except ValueError as exc:
        top.fail("statistics", str(exc))
    det = top.get("deterministic_reduction", bool, True)

    lt = top.table("levels")
    spacing = lt.get("spacing", float, 1.0)
    if "lattice" in lt.data:
        lattice = lt.data["lattice"]
        lt.used.add("lattice")
        if not isinstance(lattice, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in lattice
        ):
            lt.fail("lattice", "expected a list of nonnegative integers")
        if "count" in lt.data and lt.get("count", int) != len(lattice):
            lt.fail("count", "does not match the lattice length")
    else:
        count = lt.get("count", int)
        if count < 1:
            lt.fail("count", "must be >= 1")
        lattice = list(range(count))
    if isinstance(lt.data.get("degeneracy"), list):
        degeneracy = _float_list(lt, "degeneracy", len(lattice))
    else:
        degeneracy = lt.get("degeneracy", float, 1.0)
    try:
        levels = LevelGrid(tuple(lattice), degeneracy, spacing)
    except ValueError as exc:
        raise ConfigError(f"{source}: table [levels]: {exc}") from None
    lt.finish()

    initial = None
    it = top.table("initial", required=False)
    if it is not None:
        kind = it.get("kind", str, "random")
        if kind == "random":
            initial = {
                "kind": "random",
                "seed": it.get("seed", int),
                "n_target": it.get("n_target", float),
            }
            if initial["n_target"] <= 0:
                it.fail("n_target", "must be positive")
        elif kind == "explicit":
            if "occupations" not in it.data:
                it.fail("occupations", "required field is missing")
            initial = {"kind": "explicit", "occupations": _float_list(it, "occupations", len(lattice))}
        else:
            it.fail("kind", "must be 'random' or 'explicit'")
        it.finish()

    kernel = RateSpec.constant(1.0)
    kt = top.table("kernel", required=False)
    if kt is not None:
        kind = kt.get("kind", str, "constant")
        try:
            if kind == "constant":
                kernel = RateSpec.constant(kt.get("value", float, 1.0))
            elif kind == "random":
                kernel = RateSpec.random(kt.get("seed", int), kt.get("min", float), kt.get("max", float))
            else:
                kt.fail("kind", "must be 'constant' or 'random'")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{source}: table [kernel]: {exc}") from None
        kt.finish()

    integrator = None
    gt = top.table("integrator", required=False)
    if gt is not None:
        vals = {
            "dt": gt.get("dt", float),
            "t_end": gt.get("t_end", float),
            "sample_every": gt.get("sample_every", int, 1),
            "max_halvings": gt.get("max_halvings", int, 30),
            "converge_tol": gt.get("converge_tol", float, 1e-12),
            "converge_samples": gt.get("converge_samples", int, 10),
        }
        for key, ok, msg in (
            ("dt", vals["dt"] > 0, "must be positive"),
            ("t_end", vals["t_end"] >= 0, "must be nonnegative"),
            ("sample_every", vals["sample_every"] >= 1, "must be >= 1"),
            ("max_halvings", 0 <= vals["max_halvings"] <= 60, "must be in [0, 60]"),
            ("converge_samples", vals["converge_samples"] >= 1, "must be >= 1"),
        ):
            if not ok:
                gt.fail(key, msg)
        integrator = IntegratorConfig(**vals)
        gt.finish()

    equilibrium = None
    et = top.table("equilibrium", required=False)
    if et is not None:
        equilibrium = {"n_target": et.get("n_target", float), "e_target": et.get("e_target", float)}
        if equilibrium["n_target"] <= 0:
            et.fail("n_target", "must be positive")
        et.finish()

    prefix = None
    ot = top.table("outputs", required=False)
    if ot is not None:
        prefix = ot.get("prefix", str)
        ot.finish()
    top.finish()
    return RunConfig(q, statistics, levels, initial, kernel, integrator, equilibrium, prefix, det)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read: {exc.strerror}") from None
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, str(path))
