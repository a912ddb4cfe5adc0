"""Norm time series, the running energy functional, and decay-exponent fits.

Decay exponents are slopes of ``log(value)`` against ``log(1 + t)``.  On a
periodic box the horizontal spectral gap ``(2 pi / L_h)^2`` eventually turns
algebraic decay exponential, so callers always choose the fit window and the
fit reports ``r_squared`` together with the drift of the local slope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import integrate, stats

from .spectral_core import (
    MixedSpectralState,
    Parity,
    SpectralScalar,
    d_vertical,
    lambda_h_pow,
    norm_l2,
    sobolev_norm,
)

__all__ = [
    "COLUMNS",
    "NormSeries",
    "FitResult",
    "RateTable",
    "InadmissibleParameters",
    "record",
    "h3_energy_terms",
    "energy_functional",
    "fit_power_law",
    "fit_decay",
    "expected_rates",
]

COLUMNS = (
    "t",
    "u",
    "theta",
    "grad_h_u",
    "grad_h_theta",
    "d3_u_h",
    "d3_theta",
    "d3_u3",
    "lam_u",
    "lam_theta",
    "h3_u",
    "h3_theta",
)

COLUMN_DOC = {
    "t": "time",
    "u": "||u||_L2",
    "theta": "||theta||_L2",
    "grad_h_u": "||grad_h u||_L2",
    "grad_h_theta": "||grad_h theta||_L2",
    "d3_u_h": "||d3 u_h||_L2",
    "d3_theta": "||d3 theta||_L2",
    "d3_u3": "||d3 u3||_L2",
    "lam_u": "||Lambda_h^-sigma u||_L2",
    "lam_theta": "||Lambda_h^-sigma theta||_L2",
    "h3_u": "||u||_H3",
    "h3_theta": "||theta||_H3",
}


def _rss(values) -> float:
    return math.sqrt(sum(v * v for v in values))


def _grad_h(s: SpectralScalar) -> float:
    return sobolev_norm(s, 0, of_grad_h=True)


def record(state: MixedSpectralState, t: float, sigma: float) -> dict:
    """One row of norms at time ``t``.

    ``Lambda_h^-sigma`` norms require zero horizontal-mean content.
    """
    if not 0 < sigma < 1:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    u1, u2, u3, th = state.components()
    vel = (u1, u2, u3)
    return {
        "t": float(t),
        "u": _rss(norm_l2(c) for c in vel),
        "theta": norm_l2(th),
        "grad_h_u": _rss(_grad_h(c) for c in vel),
        "grad_h_theta": _grad_h(th),
        "d3_u_h": _rss(norm_l2(d_vertical(c)) for c in (u1, u2)),
        "d3_theta": norm_l2(d_vertical(th)),
        "d3_u3": norm_l2(d_vertical(u3)),
        "lam_u": _rss(norm_l2(lambda_h_pow(c, -sigma)) for c in vel),
        "lam_theta": norm_l2(lambda_h_pow(th, -sigma)),
        "h3_u": _rss(sobolev_norm(c, 3) for c in vel),
        "h3_theta": sobolev_norm(th, 3),
    }


@dataclass
class NormSeries:
    """Time-stamped norm rows; ``t`` must be strictly increasing."""

    sigma: float
    rows: list = field(default_factory=list)

    def append(self, row: dict):
        if set(row) != set(COLUMNS):
            raise ValueError(f"row must have exactly the columns {COLUMNS}")
        if self.rows and not row["t"] > self.rows[-1]["t"]:
            raise ValueError("times must be strictly increasing")
        if any(row[c] < 0 for c in COLUMNS[1:]):
            raise ValueError("norms must be nonnegative")
        self.rows.append(row)

    def add(self, state: MixedSpectralState, t: float):
        self.append(record(state, t, self.sigma))

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        if name not in COLUMNS:
            raise KeyError(f"unknown column {name!r}")
        return np.array([r[name] for r in self.rows], dtype=float)

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    def as_array(self) -> np.ndarray:
        return np.array([[r[c] for c in COLUMNS] for r in self.rows], dtype=float)


def h3_energy_terms(state: MixedSpectralState) -> tuple[float, float]:
    """``(||u||_H3^2 + ||theta||_H3^2, ||grad_h u||_H3^2 + ||grad_h theta||_H3^2)``."""
    return sobolev_norm(state, 3) ** 2, sobolev_norm(state, 3, of_grad_h=True) ** 2


def energy_functional(t, h3_sq, grad_h3_sq) -> np.ndarray:
    """``max_{tau <= t} h3_sq(tau) + 2 int_0^t grad_h3_sq`` by the trapezoid rule."""
    t = np.asarray(t, dtype=float)
    h3_sq = np.asarray(h3_sq, dtype=float)
    grad_h3_sq = np.asarray(grad_h3_sq, dtype=float)
    if t.size == 0:
        raise ValueError("energy functional of an empty series")
    if not (t.shape == h3_sq.shape == grad_h3_sq.shape):
        raise ValueError("time and norm arrays must have equal length")
    running = np.maximum.accumulate(h3_sq)
    dissipated = integrate.cumulative_trapezoid(grad_h3_sq, t, initial=0.0)
    return running + 2.0 * dissipated


@dataclass(frozen=True)
class FitResult:
    """Least-squares power law ``value ~ (1 + t)^exponent``.

    ``slope_drift`` is the second-half slope minus the first-half slope; a
    clean power law has drift near zero.
    """

    exponent: float
    stderr: float
    window: tuple[float, float]
    r_squared: float
    n: int
    slope_drift: float
    intercept: float = 0.0

    @property
    def power_law_like(self) -> bool:
        scale = max(abs(self.exponent), 1e-12)
        return self.r_squared >= 0.999 and abs(self.slope_drift) <= 0.05 * scale


MIN_FIT_SAMPLES = 8


def fit_power_law(t, values, window: Sequence[float] | None = None) -> FitResult:
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if window is None:
        window = (float(t.min()), float(t.max()))
    t0, t1 = float(window[0]), float(window[1])
    if not t0 < t1:
        raise ValueError(f"empty fit window [{t0}, {t1}]")
    sel = (t >= t0) & (t <= t1)
    if sel.sum() < MIN_FIT_SAMPLES:
        raise ValueError(
            f"fit window [{t0}, {t1}] holds {int(sel.sum())} samples; need {MIN_FIT_SAMPLES}"
        )
    ts, ys = t[sel], y[sel]
    if np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise ValueError("fit values must be finite and strictly positive")
    x = np.log1p(ts)
    ly = np.log(ys)
    res = stats.linregress(x, ly)
    half = len(x) // 2
    first = stats.linregress(x[: half + 1], ly[: half + 1]).slope
    second = stats.linregress(x[half:], ly[half:]).slope
    r2 = float(res.rvalue**2) if np.ptp(ly) > 0 else 1.0
    return FitResult(
        exponent=float(res.slope),
        stderr=float(res.stderr),
        window=(t0, t1),
        r_squared=r2,
        n=int(sel.sum()),
        slope_drift=float(second - first),
        intercept=float(res.intercept),
    )


def fit_decay(series: NormSeries, column: str, window: Sequence[float]) -> FitResult:
    return fit_power_law(series.t, series.column(column), window)


# ---------------------------------------------------------------------------
# rate table
# ---------------------------------------------------------------------------


class InadmissibleParameters(ValueError):
    """``(sigma, delta)`` lies outside the admissible set of the rate table."""


@dataclass(frozen=True)
class RateTable:
    sigma: float
    delta: float
    rates: dict

    def __getitem__(self, key):
        return self.rates[key]


def _exact(x) -> Fraction:
    # repr gives the shortest decimal that round-trips, so 0.95 means 95/100
    return Fraction(repr(float(x))) if not isinstance(x, Fraction) else x


def admissible(sigma, delta) -> bool:
    s, d = _exact(sigma), _exact(delta)
    return Fraction(9, 10) < s < 1 and Fraction(1, 2) - s / 2 <= d < s / 8 - Fraction(1, 16)


def expected_rates(sigma, delta) -> RateTable:
    """Decay exponents of each norm for admissible ``(sigma, delta)``.

    Admissible means ``9/10 < sigma < 1`` and ``1/2 - sigma/2 <= delta < sigma/8 - 1/16``,
    compared in exact rational arithmetic on the decimal value of each input.
    """
    s, d = _exact(sigma), _exact(delta)
    if not Fraction(9, 10) < s < 1:
        raise InadmissibleParameters(f"sigma={sigma} outside (9/10, 1)")
    lo, hi = Fraction(1, 2) - s / 2, s / 8 - Fraction(1, 16)
    if not lo <= d < hi:
        raise InadmissibleParameters(
            f"delta={delta} outside [{float(lo):.6g}, {float(hi):.6g}) for sigma={sigma}"
        )
    slow = -s / 2 + d
    vert = -s / 2 + 3 * d
    fast = -(s + 1) / 2 + d
    exact = {
        "u": slow,
        "theta": slow,
        "d3_u_h": vert,
        "d3_theta": vert,
        "d3_u3": fast,
        "grad_h_u": fast,
        "grad_h_theta": fast,
        "linear_l2": -s / 2,
        "linear_grad_h": -(s + 1) / 2,
    }
    return RateTable(float(sigma), float(delta), {k: float(v) for k, v in exact.items()})
