"""Run configuration and its flat ``section.key = value`` text format.

Example::

    # comments and blank lines are ignored
    preset = nonlinear-smoke
    grid.N_h = 32
    run.T = 2.0
    init.amplitude = 5e-3

A ``preset`` line (anywhere in the file) selects the base configuration; every
other line overrides one field.  Errors carry the line number and the key.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import get_type_hints

from ..decay_analysis import COLUMNS
from ..spectral_core import GridSpec, build_grid
from .initial_data import InitialDataSpec

__all__ = [
    "ConfigError",
    "RunConfig",
    "GridConfig",
    "PhysicsConfig",
    "RatesConfig",
    "RunSection",
    "DuhamelSection",
    "OracleSection",
    "OutputConfig",
    "PRESETS",
    "parse_config",
    "load_config",
    "dump_config",
    "AMPLITUDE_WARN",
]

# Above this H^3 size the data are no longer "small" in any useful sense for
# the decay regime; runs still proceed.
AMPLITUDE_WARN = 0.1

RUN_MODES = ("linear", "nonlinear", "oracle")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field {key!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


@dataclass(frozen=True)
class GridConfig:
    N_h: int = 16
    N3: int = 16
    L_h: float = 2 * math.pi
    L3: float = math.pi
    dealias_fraction: str = "2/3"

    def build(self) -> GridSpec:
        return build_grid(self.L_h, self.N_h, self.L3, self.N3, self.dealias_fraction)


@dataclass(frozen=True)
class PhysicsConfig:
    nu: float = 1.0
    kappa: float = 1.0


@dataclass(frozen=True)
class RatesConfig:
    sigma: float = 0.95
    delta: float = 0.03


@dataclass(frozen=True)
class RunSection:
    """Time stepping and recording.

    ``linear`` runs evaluate the exact propagator at ``n_records`` times
    (log-spaced from ``t_first`` to ``T`` when ``log_times``, else uniform);
    ``nonlinear`` runs record every ``record_every`` steps.  ``check_every``
    sets the cadence of divergence and boundary-trace checks.
    """

    mode: str = "nonlinear"
    T: float = 1.0
    dt: float = 1e-2
    record_every: int = 1
    check_every: int = 10
    n_records: int = 40
    t_first: float = 0.1
    log_times: bool = True
    fit_start: float = 0.0
    fit_end: float = math.inf


@dataclass(frozen=True)
class DuhamelSection:
    K: int = 65
    picard_iters: int = 60


@dataclass(frozen=True)
class OracleSection:
    """Continuous-frequency oracle run; times are log-spaced."""

    t_min: float = 10.0
    t_max: float = 1e4
    n_times: int = 40
    seeded: tuple[str, ...] = ("u_h", "u3", "theta")


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    svg: bool = True
    plot_columns: tuple[str, ...] = ("u", "theta", "grad_h_u", "d3_u_h")


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    rates: RatesConfig = field(default_factory=RatesConfig)
    run: RunSection = field(default_factory=RunSection)
    duhamel: DuhamelSection = field(default_factory=DuhamelSection)
    init: InitialDataSpec = field(default_factory=InitialDataSpec)
    oracle: OracleSection = field(default_factory=OracleSection)
    output: OutputConfig = field(default_factory=OutputConfig)
    preset: str | None = None

    def with_overrides(self, **sections) -> "RunConfig":
        """``cfg.with_overrides(run={"T": 2.0})`` replaces individual fields."""
        out = self
        for name, changes in sections.items():
            out = replace(out, **{name: replace(getattr(out, name), **changes)})
        return out

    def validate(self) -> "RunConfig":
        try:
            self.grid.build()
        except ValueError as exc:
            raise ConfigError(str(exc), key="grid") from None
        if self.physics.nu <= 0 or self.physics.kappa <= 0:
            raise ConfigError("nu and kappa must be positive", key="physics")
        r = self.run
        if r.mode not in RUN_MODES:
            raise ConfigError(f"mode must be one of {RUN_MODES}", key="run.mode")
        if not r.T > 0:
            raise ConfigError("T must be positive", key="run.T")
        if not r.dt > 0:
            raise ConfigError("dt must be positive", key="run.dt")
        for name in ("record_every", "check_every", "n_records"):
            if getattr(r, name) < 1:
                raise ConfigError("must be at least 1", key=f"run.{name}")
        if r.log_times and not 0 < r.t_first < r.T:
            raise ConfigError("t_first must lie in (0, T) for log-spaced times", key="run.t_first")
        if not r.fit_start < r.fit_end:
            raise ConfigError("fit_start must be below fit_end", key="run.fit_start")
        o = self.oracle
        if not 0 < o.t_min < o.t_max:
            raise ConfigError("need 0 < t_min < t_max", key="oracle.t_min")
        if o.n_times < 12:
            raise ConfigError("need at least 12 times", key="oracle.n_times")
        bad = set(self.output.plot_columns) - set(COLUMNS[1:])
        if bad:
            raise ConfigError(f"unknown columns {sorted(bad)}", key="output.plot_columns")
        if self.init.amplitude > AMPLITUDE_WARN:
            warnings.warn(
                f"init.amplitude={self.init.amplitude:g} exceeds {AMPLITUDE_WARN}; "
                "small-data decay behaviour is not expected",
                UserWarning,
                stacklevel=2,
            )
        return self


def _preset_linear_heat_only() -> RunConfig:
    # toroidal velocity only: pure horizontal heat flow, norm ~ (1 + t)^-1 for a = 1
    return RunConfig(
        run=RunSection(mode="oracle", fit_start=10.0),
        init=InitialDataSpec(a=1.0, k0=1.0, components=("u_h",)),
        oracle=OracleSection(t_min=10.0, t_max=1e4, n_times=40, seeded=("u_h",)),
        output=OutputConfig(dir="out/linear-heat-only", plot_columns=("u", "grad_h_u")),
        preset="linear-heat-only",
    )


def _preset_nonlinear_smoke() -> RunConfig:
    return RunConfig(
        grid=GridConfig(N_h=16, N3=16),
        run=RunSection(mode="nonlinear", T=1.0, dt=1e-2, record_every=1, check_every=10),
        init=InitialDataSpec(a=1.0, k0=2.0, amplitude=1e-2, rng_seed=0),
        output=OutputConfig(dir="out/nonlinear-smoke"),
        preset="nonlinear-smoke",
    )


def _preset_linear_grid() -> RunConfig:
    return RunConfig(
        grid=GridConfig(N_h=64, N3=32, L_h=16 * math.pi),
        run=RunSection(mode="linear", T=50.0, t_first=0.5, n_records=40, fit_start=5.0),
        init=InitialDataSpec(a=1.0, k0=1.0, amplitude=1e-2),
        output=OutputConfig(dir="out/linear-grid"),
        preset="linear-grid",
    )


def _preset_oracle_full() -> RunConfig:
    return RunConfig(
        run=RunSection(mode="oracle", fit_start=10.0),
        oracle=OracleSection(),
        output=OutputConfig(dir="out/oracle"),
        preset="oracle",
    )


PRESETS = {
    "linear-heat-only": _preset_linear_heat_only,
    "nonlinear-smoke": _preset_nonlinear_smoke,
    "linear-grid": _preset_linear_grid,
    "oracle": _preset_oracle_full,
}


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(raw: str, hint):
    if hint is bool:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if hint is int:
        return int(raw)
    if hint is float:
        return float(raw)
    if hint == tuple[str, ...]:
        return tuple(p.strip() for p in raw.split(",") if p.strip())
    # str and str | None
    return None if raw.lower() == "none" else raw


def _tokenize(text: str):
    """Yield ``(line_no, key, value)`` for every assignment line."""
    for n, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", line=n)
        key, value = (p.strip() for p in stripped.split("=", 1))
        if not key:
            raise ConfigError("missing key", line=n)
        if not value:
            raise ConfigError("missing value", line=n, key=key)
        yield n, key, value


def parse_config(text: str) -> RunConfig:
    """Parse the flat key-value format into a validated :class:`RunConfig`."""
    entries = list(_tokenize(text))
    seen: dict[str, int] = {}
    for n, key, _ in entries:
        if key in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[key]})", line=n, key=key)
        seen[key] = n

    cfg = RunConfig()
    for n, key, value in entries:
        if key == "preset":
            if value not in PRESETS:
                raise ConfigError(
                    f"unknown preset {value!r}; choose from {sorted(PRESETS)}", line=n, key=key
                )
            cfg = PRESETS[value]()

    top_hints = get_type_hints(RunConfig)
    changes: dict[str, dict] = {}
    lines_of: dict[str, int] = {}
    for n, key, value in entries:
        if key == "preset":
            continue
        section, _, name = key.partition(".")
        if section not in top_hints or section == "preset" or not name:
            raise ConfigError("unknown key", line=n, key=key)
        sec_type = type(getattr(cfg, section))
        hints = get_type_hints(sec_type)
        if name not in hints or name.startswith("_"):
            raise ConfigError("unknown key", line=n, key=key)
        try:
            changes.setdefault(section, {})[name] = _convert(value, hints[name])
        except ValueError as exc:
            raise ConfigError(f"bad value {value!r}: {exc}", line=n, key=key) from None
        lines_of.setdefault(section, n)

    for section, kw in changes.items():
        try:
            cfg = replace(cfg, **{section: replace(getattr(cfg, section), **kw)})
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), line=lines_of[section], key=section) from None
    try:
        return cfg.validate()
    except ConfigError as exc:
        # point at the offending line when the user set that key or section
        line = seen.get(exc.key) or lines_of.get((exc.key or "").split(".")[0])
        if line is None:
            raise
        raise ConfigError(exc.args[0].split(": ", 1)[-1], line=line, key=exc.key) from None


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def dump_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config` (every field written explicitly)."""
    lines = []
    if cfg.preset is not None:
        lines.append(f"preset = {cfg.preset}")
    for f in fields(cfg):
        if f.name == "preset":
            continue
        section = getattr(cfg, f.name)
        for sf in fields(section):
            v = getattr(section, sf.name)
            if isinstance(v, tuple):
                v = ",".join(v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name}.{sf.name} = {v}")
    return "\n".join(lines) + "\n"

