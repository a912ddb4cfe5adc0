"""Experiment runners and their on-disk artifacts.

A run produces, inside its output directory:

* ``norms.csv``: one row per recorded time, 17 significant digits, preceded
  by ``#`` header lines that document every column;
* ``fit_summary.txt``: fitted exponents per column and run diagnostics as
  ``key = value`` lines;
* ``config.txt``: the fully expanded configuration;
* ``norms.svg`` when plots are enabled;
* ``final_state.npz`` for grid runs.

Only the first CSV line carries the package version, so identical configs
give byte-identical files apart from that line.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .. import __version__
from ..decay_analysis import (
    COLUMN_DOC,
    COLUMNS,
    FitResult,
    InadmissibleParameters,
    NormSeries,
    expected_rates,
    fit_power_law,
)
from ..freq_oracle import RadialProfile, continuous_norm
from ..linear_propagator import PropagatorCache, apply_semigroup
from ..nonlinear import Stepper, StepperConfig, boundary_trace_check
from ..spectral_core import COMPONENT_PARITY, MixedSpectralState, build_grid
from .config import ConfigError, RunConfig, dump_config
from .initial_data import generate_initial_data
from .svg import loglog_svg

__all__ = [
    "RunResult",
    "FitFailure",
    "run_experiment",
    "write_csv",
    "read_csv",
    "energy_balance_run",
    "EnergyBalance",
    "save_state",
    "load_state",
]

CSV_FORMAT = 1


class FitFailure(RuntimeError):
    """A requested decay fit could not be computed."""


@dataclass
class EnergyBalance:
    """Discrete ``||v(t)||^2 + 2 int_0^t D`` bookkeeping of a nonlinear run.

    ``residual`` is the largest relative deviation from ``||v(0)||^2``;
    ``increases`` counts recorded steps where ``||v||^2`` went up.
    """

    e0: float
    residual: float = 0.0
    increases: int = 0
    max_increase: float = 0.0
    max_divergence: float = 0.0
    max_trace: float = 0.0
    steps: int = 0
    energy: list = field(default_factory=list)


@dataclass
class RunResult:
    config: RunConfig
    series: NormSeries
    fits: dict
    diagnostics: dict
    paths: dict
    final_state: MixedSpectralState | None = None


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------


def _initial_state(cfg: RunConfig) -> MixedSpectralState:
    grid = cfg.grid.build()
    return generate_initial_data(cfg.init, grid, cfg.physics.nu, cfg.physics.kappa)


def _linear_times(cfg: RunConfig) -> np.ndarray:
    r = cfg.run
    if r.log_times:
        return np.concatenate([[0.0], np.geomspace(r.t_first, r.T, r.n_records)])
    return np.linspace(0.0, r.T, r.n_records + 1)


def _run_linear(cfg: RunConfig):
    s0 = _initial_state(cfg)
    cache = PropagatorCache(s0.grid, s0.nu, s0.kappa)
    series = NormSeries(cfg.rates.sigma)
    state = s0
    for t in _linear_times(cfg):
        state = apply_semigroup(s0, float(t), cache)
        series.add(state, float(t))
    return series, {}, state


class _EnergyMeter:
    """``||v||^2`` and the dissipation rate read off the stepper's own layout."""

    def __init__(self, stepper: Stepper, nu: float, kappa: float):
        g = stepper.grid
        shape = g.spectral_shape

        def lift(a):
            a = np.broadcast_to(a, shape)
            return a if stepper.box is None else stepper.box.gather(a)

        base = g.volume * g.hermitian_weight
        self.w_e = np.stack([lift(base * g.vertical_weight(p)) for p in COMPONENT_PARITY])
        rate = lift(np.where(g.horizontal_nyquist, 0.0, g.xi_h_sq))
        coef = np.array([nu, nu, nu, kappa]).reshape(4, 1, 1, 1)
        self.w_d = coef * self.w_e * rate

    def __call__(self, data: np.ndarray) -> tuple[float, float]:
        sq = data.real**2 + data.imag**2
        return float(np.sum(self.w_e * sq)), float(np.sum(self.w_d * sq))


def energy_balance_run(
    s0: MixedSpectralState,
    dt: float,
    T: float,
    record_every: int = 1,
    check_every: int = 10,
    sigma: float = 0.95,
    series: NormSeries | None = None,
    on_record=None,
) -> tuple[MixedSpectralState, EnergyBalance]:
    """Step from ``s0`` to ``T`` while auditing the L2 energy budget.

    Energy and dissipation are sampled every step; the dissipation integral
    uses cumulative Simpson quadrature so its error stays well below the
    stepper's.  Divergence and boundary traces are sampled every
    ``check_every`` steps and at the end.
    """
    cfg = StepperConfig(dt=dt, T=T, record_every=record_every)
    stepper = Stepper(s0.grid, cfg, s0.nu, s0.kappa)
    data = stepper.to_internal(s0.data)
    meter = _EnergyMeter(stepper, s0.nu, s0.kappa)
    e0, d0 = meter(data)
    bal = EnergyBalance(e0=e0, energy=[e0])
    times = [0.0]
    diss = [d0]
    if series is not None:
        series.add(s0, 0.0)
    t = 0.0
    state = s0
    n = cfg.n_steps
    for k in range(1, n + 1):
        h = min(dt, T - t) if k == n else dt
        data = stepper.advance(data, h)
        t = T if k == n else t + h
        e, d = meter(data)
        if e > bal.energy[-1]:
            bal.increases += 1
            bal.max_increase = max(bal.max_increase, (e - bal.energy[-1]) / max(e0, 1e-300))
        bal.energy.append(e)
        diss.append(d)
        times.append(t)
        recording = series is not None and (k % record_every == 0 or k == n)
        checking = k % check_every == 0 or k == n
        if recording or checking or on_record is not None:
            state = s0.with_data(stepper.to_full(data))
        if checking:
            bal.max_divergence = max(bal.max_divergence, state.divergence_residual())
            bal.max_trace = max(bal.max_trace, boundary_trace_check(state).max_trace)
        if recording:
            series.add(state, t)
        if on_record is not None:
            on_record(k, t, state)
    bal.steps = n
    if e0 > 0 and n > 0:
        dissipated = integrate.cumulative_simpson(np.array(diss), x=np.array(times), initial=0.0)
        bal.residual = float(np.max(np.abs(np.array(bal.energy) + 2.0 * dissipated - e0)) / e0)
    return state, bal


def _run_nonlinear(cfg: RunConfig):
    s0 = _initial_state(cfg)
    r = cfg.run
    series = NormSeries(cfg.rates.sigma)
    final, bal = energy_balance_run(
        s0, r.dt, r.T, r.record_every, r.check_every, cfg.rates.sigma, series
    )
    diag = {
        "energy_balance_residual": bal.residual,
        "energy_increases": bal.increases,
        "max_divergence_residual": bal.max_divergence,
        "max_boundary_trace": bal.max_trace,
        "steps": bal.steps,
    }
    return series, diag, final


_ORACLE_COLUMNS = {
    "u": ("u", "l2"),
    "theta": ("theta", "l2"),
    "grad_h_u": ("u", "grad_h"),
    "grad_h_theta": ("theta", "grad_h"),
    "d3_u_h": ("u_h", "d3"),
    "d3_theta": ("theta", "d3"),
    "d3_u3": ("u3", "d3"),
    "lam_u": ("u", "lambda"),
    "lam_theta": ("theta", "lambda"),
    "h3_u": ("u", "h3"),
    "h3_theta": ("theta", "h3"),
}


def _run_oracle(cfg: RunConfig):
    if cfg.physics.nu != cfg.physics.kappa:
        raise ConfigError("oracle runs need nu == kappa", key="physics.kappa")
    o = cfg.oracle
    try:
        profile = RadialProfile(a=cfg.init.a, k0=cfg.init.k0, seeded=o.seeded, nu=cfg.physics.nu)
        profile.check_admissible(cfg.rates.sigma)
    except ValueError as exc:
        raise ConfigError(str(exc), key="oracle.seeded") from None
    sigma = cfg.rates.sigma
    series = NormSeries(sigma)
    for t in np.geomspace(o.t_min, o.t_max, o.n_times):
        row = {"t": float(t)}
        for col, (comp, weight) in _ORACLE_COLUMNS.items():
            row[col] = continuous_norm(profile, float(t), comp, weight, sigma)
        series.append(row)
    return series, {"note": "h3 columns use the weight (1 + |xi|^2)^3"}, None


_RUNNERS = {"linear": _run_linear, "nonlinear": _run_nonlinear, "oracle": _run_oracle}


# ---------------------------------------------------------------------------
# fits and artifacts
# ---------------------------------------------------------------------------


def _fit_all(series: NormSeries, cfg: RunConfig) -> dict:
    t = series.t
    lo = cfg.run.fit_start
    hi = min(cfg.run.fit_end, float(t.max()))
    fits: dict[str, FitResult | None] = {}
    for col in COLUMNS[1:]:
        v = series.column(col)
        sel = (t >= lo) & (t <= hi)
        if not np.any(v[sel] > 0):
            fits[col] = None  # component absent from this run
            continue
        try:
            fits[col] = fit_power_law(t, v, (lo, hi))
        except ValueError as exc:
            raise FitFailure(f"fit of {col!r} on [{lo:g}, {hi:g}] failed: {exc}") from None
    return fits


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(series: NormSeries, cfg: RunConfig | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# halfspace-boussinesq norms csv format {CSV_FORMAT} version {__version__}\n")
    if cfg is not None:
        buf.write(f"# mode {cfg.run.mode} seed {cfg.init.rng_seed}\n")
    buf.write(f"# sigma {_fmt(series.sigma)}\n")
    for c in COLUMNS:
        buf.write(f"# column {c}: {COLUMN_DOC[c]}\n")
    buf.write(",".join(COLUMNS) + "\n")
    for row in series.rows:
        buf.write(",".join(_fmt(row[c]) for c in COLUMNS) + "\n")
    return buf.getvalue()


def read_csv(text: str) -> NormSeries:
    """Parse :func:`write_csv` output back into a :class:`NormSeries`."""
    sigma = None
    header = None
    series = None
    for line in text.splitlines():
        if line.startswith("# sigma "):
            sigma = float(line.split()[-1])
            continue
        if line.startswith("#") or not line.strip():
            continue
        if header is None:
            header = line.split(",")
            if tuple(header) != COLUMNS:
                raise ValueError(f"unexpected CSV columns {header}")
            series = NormSeries(sigma if sigma is not None else math.nan)
            continue
        series.append(dict(zip(header, (float(v) for v in line.split(",")))))
    if series is None:
        raise ValueError("no CSV header found")
    return series


def _summary(cfg: RunConfig, fits: dict, diag: dict, elapsed: float) -> str:
    lines = [
        f"# halfspace-boussinesq fit summary version {__version__}",
        f"mode = {cfg.run.mode}",
        f"preset = {cfg.preset}",
        f"sigma = {_fmt(cfg.rates.sigma)}",
        f"delta = {_fmt(cfg.rates.delta)}",
    ]
    try:
        rates = expected_rates(cfg.rates.sigma, cfg.rates.delta)
    except InadmissibleParameters as exc:
        rates = None
        lines.append(f"expected = inadmissible ({exc})")
    for col, f in fits.items():
        if f is None:
            lines.append(f"fit.{col} = absent")
            continue
        lines += [
            f"fit.{col}.exponent = {_fmt(f.exponent)}",
            f"fit.{col}.stderr = {_fmt(f.stderr)}",
            f"fit.{col}.r_squared = {_fmt(f.r_squared)}",
            f"fit.{col}.slope_drift = {_fmt(f.slope_drift)}",
            f"fit.{col}.window = {_fmt(f.window[0])} {_fmt(f.window[1])}",
        ]
        if rates is not None and col in rates.rates:
            lines.append(f"expected.{col} = {_fmt(rates[col])}")
    for k, v in diag.items():
        lines.append(f"diag.{k} = {v if isinstance(v, str) else _fmt(v)}")
    lines.append(f"elapsed_seconds = {elapsed:.3f}")
    return "\n".join(lines) + "\n"


def _plot(series: NormSeries, cfg: RunConfig) -> str | None:
    cols = [c for c in cfg.output.plot_columns if np.any(series.column(c) > 0)]
    if not cols:
        return None
    keep = series.t > 0 if cfg.run.mode != "oracle" else np.ones(len(series), bool)
    curves = {c: series.column(c)[keep] for c in cols}
    refs = {}
    try:
        rates = expected_rates(cfg.rates.sigma, cfg.rates.delta)
        for c in cols:
            if c in rates.rates:
                refs[f"{c} expected"] = (rates[c], c)
    except InadmissibleParameters:
        pass
    return loglog_svg(series.t[keep], curves, refs, title=f"{cfg.run.mode} run norms")


def run_experiment(
    cfg: RunConfig, out_dir: str | Path | None = None, write: bool = True
) -> RunResult:
    """Execute the run described by ``cfg`` and write its artifacts.

    Raises:
        ConfigError: inconsistent configuration.
        BlowUpError: non-finite state during a nonlinear run.
        FitFailure: a decay fit could not be formed.
        OSError: the output directory is not writable.
    """
    cfg.validate()
    start = time.perf_counter()
    series, diag, final = _RUNNERS[cfg.run.mode](cfg)
    fits = _fit_all(series, cfg)
    elapsed = time.perf_counter() - start
    paths = {}
    if write:
        out = Path(out_dir if out_dir is not None else cfg.output.dir)
        out.mkdir(parents=True, exist_ok=True)
        paths["csv"] = out / "norms.csv"
        paths["csv"].write_text(write_csv(series, cfg))
        paths["summary"] = out / "fit_summary.txt"
        paths["summary"].write_text(_summary(cfg, fits, diag, elapsed))
        paths["config"] = out / "config.txt"
        paths["config"].write_text(dump_config(cfg))
        if cfg.output.svg:
            svg = _plot(series, cfg)
            if svg is not None:
                paths["svg"] = out / "norms.svg"
                paths["svg"].write_text(svg)
        if final is not None:
            paths["state"] = out / "final_state.npz"
            save_state(paths["state"], final)
    return RunResult(cfg, series, fits, diag, paths, final)


def save_state(path: str | Path, state: MixedSpectralState):
    g = state.grid
    np.savez(
        path,
        data=state.data,
        L_h=g.L_h,
        N_h=g.N_h,
        L3=g.L3,
        N3=g.N3,
        dealias_fraction=str(g.dealias_fraction),
        nu=state.nu,
        kappa=state.kappa,
    )


def load_state(path: str | Path) -> MixedSpectralState:
    with np.load(path) as z:
        grid = build_grid(
            float(z["L_h"]), int(z["N_h"]), float(z["L3"]), int(z["N3"]), str(z["dealias_fraction"])
        )
        return MixedSpectralState(grid, z["data"], float(z["nu"]), float(z["kappa"]))

