"""Continuous-frequency norms of the exact linear solution on the half-space.

The initial spectrum is radial in ``xi_h`` with amplitude
``A = |xi_h|^a exp(-|xi|^2 / k0^2)``.  Writing ``rho = |xi|`` and
``beta`` for the angle from the vertical axis, ``|xi_h| = rho sin(beta)``,
``xi3 = rho cos(beta)`` and the rotation frequency is simply
``omega = sin(beta)``.  Every oscillatory factor of the solution then depends
on ``beta`` alone, and every ``rho`` integral is a Gaussian moment,

    int_0^inf rho^n exp(-C rho^2) d rho = Gamma((n + 1)/2) / (2 C^((n + 1)/2)),

with ``C = 2 / k0^2 + 2 nu t sin(beta)^2``.  What remains is a 1D integral over
``beta in [0, pi/2]`` done by composite Gauss-Legendre quadrature with panels
no wider than ``pi / t`` (one oscillation of ``sin(t sin(beta))``) and
geometric refinement toward ``beta = 0``.

Norms use the frequency-space measure ``2 pi |xi_h| d|xi_h| d xi3`` over
``(0, inf)^2``; the Plancherel constant is omitted since only ratios and
exponents are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .decay_analysis import FitResult, fit_power_law
from .linear_propagator import sinc

__all__ = [
    "RadialProfile",
    "QuadratureSpec",
    "QuadratureError",
    "continuous_norm",
    "oracle_decay_fit",
    "mode_amplitudes",
    "COMPONENT_CHOICES",
    "WEIGHT_CHOICES",
]

SEEDABLE = ("u_h", "u3", "theta")
COMPONENT_CHOICES = ("u_h", "u3", "theta", "u", "v")
WEIGHT_CHOICES = ("l2", "grad_h", "d3", "lambda", "h3")


class QuadratureError(RuntimeError):
    """Panel doubling failed to reach the requested tolerance."""


@dataclass(frozen=True)
class RadialProfile:
    """Initial spectrum ``|xi_h|^a exp(-|xi|^2/k0^2)`` on the seeded components.

    A seeded ``u_h`` is the toroidal (horizontally divergence-free) part.  A
    seeded ``u3`` comes with its poloidal horizontal partner
    ``i xi_h xi3 u3 / |xi_h|^2`` so the data are divergence-free.  ``u3`` and
    ``theta`` start in phase.
    """

    a: float = 1.0
    k0: float = 1.0
    seeded: tuple[str, ...] = SEEDABLE
    nu: float = 1.0

    def __post_init__(self):
        if self.k0 <= 0:
            raise ValueError("k0 must be positive")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        bad = set(self.seeded) - set(SEEDABLE)
        if bad:
            raise ValueError(f"unknown seeded components {sorted(bad)}")

    def check_admissible(self, sigma: float):
        """Finite ``Lambda_h^-sigma`` norm of the data.

        The poloidal partner of ``u3`` grows like ``|xi_h|^(a-1)`` at small
        ``|xi_h|``, which tightens the bound from ``a > sigma - 1`` to ``a > sigma``.
        """
        need = sigma if "u3" in self.seeded else sigma - 1.0
        if not self.a > need:
            raise ValueError(
                f"profile exponent a={self.a} must exceed {need:g} for a finite "
                f"Lambda_h^-{sigma} norm"
            )

    def zero(self) -> bool:
        return not self.seeded


@dataclass(frozen=True)
class QuadratureSpec:
    nodes_per_panel: int = 16
    max_panel_width: float = 0.1
    grading_levels: int = 30
    rtol: float = 1e-10
    check: bool = True


def mode_amplitudes(profile: RadialProfile, beta, t: float):
    """Squared angular factors of each component at unit Gaussian envelope.

    Returns a dict of arrays over ``beta`` for ``u_h, u3, theta``; multiply by
    ``A^2 exp(-2 nu |xi_h|^2 t)`` to get the squared modulus at a mode.
    """
    s_t = 1.0 if "u_h" in profile.seeded else 0.0
    s_u = 1.0 if "u3" in profile.seeded else 0.0
    s_th = 1.0 if "theta" in profile.seeded else 0.0
    sb = np.sin(beta)
    cb = np.cos(beta)
    phase = t * sb
    c = np.cos(phase)
    ts = t * sinc(phase)
    U3 = c * s_u + sb * sb * ts * s_th
    TH = -ts * s_u + c * s_th
    # poloidal horizontal velocity has modulus cot(beta) |u3|
    with np.errstate(divide="ignore", invalid="ignore"):
        cot2 = np.where(sb > 0, (cb / np.where(sb > 0, sb, 1.0)) ** 2, 0.0)
    pol = np.where(sb > 0, cot2 * U3 * U3, 0.0) if s_u else np.zeros_like(beta)
    return {"u_h": s_t * s_t + pol, "u3": U3 * U3, "theta": TH * TH}


def _component_factor(amps: dict, component: str) -> np.ndarray:
    if component in ("u_h", "u3", "theta"):
        return amps[component]
    vel = amps["u_h"] + amps["u3"]
    return vel if component == "u" else vel + amps["theta"]


def _breakpoints(t: float, spec: QuadratureSpec) -> np.ndarray:
    width = spec.max_panel_width
    if t > 0:
        width = min(width, math.pi / t)
    n = max(1, math.ceil((math.pi / 2) / width))
    uniform = np.linspace(0.0, math.pi / 2, n + 1)
    # geometric refinement of the first panel toward beta = 0
    first = uniform[1]
    geo = first * 0.5 ** np.arange(1, spec.grading_levels + 1)
    return np.unique(np.concatenate([[0.0], geo, uniform]))


def _gauss_panels(edges: np.ndarray, m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def _weight_terms(weight, sigma, sb, cb):
    """``(coefficient, extra rho power, angular factor)`` terms of the weight."""
    if weight == "l2":
        return [(1.0, 0.0, 1.0)]
    if weight == "grad_h":
        return [(1.0, 2.0, sb * sb)]
    if weight == "d3":
        return [(1.0, 2.0, cb * cb)]
    if weight == "h3":
        return [(float(math.comb(3, j)), 2.0 * j, 1.0) for j in range(4)]
    with np.errstate(divide="ignore"):
        ang = np.where(sb > 0, sb, np.inf) ** (-2 * sigma)
    return [(1.0, -2.0 * sigma, ang)]


def _integrand(profile, t, component, weight, sigma, beta):
    a, k0, nu = profile.a, profile.k0, profile.nu
    sb = np.sin(beta)
    cb = np.cos(beta)
    amps = _component_factor(mode_amplitudes(profile, beta, t), component)
    C = 2.0 / k0**2 + 2.0 * nu * t * sb * sb
    total = np.zeros_like(beta)
    for coef, extra, ang in _weight_terms(weight, sigma, sb, cb):
        # rho^(2a) from A^2 and rho^2 from the measure
        p = 0.5 * (2 * a + 2 + extra + 1)
        log_moment = gammaln(p) - math.log(2.0) - p * np.log(C)
        total = total + coef * ang * np.exp(log_moment)
    return 2.0 * math.pi * sb ** (2 * a + 1) * amps * total


def continuous_norm(
    profile: RadialProfile,
    t: float,
    component: str = "v",
    weight: str = "l2",
    sigma: float | None = None,
    quad: QuadratureSpec = QuadratureSpec(),
) -> float:
    """Frequency-space norm of ``component`` of the linear solution at time ``t``.

    ``weight`` multiplies the squared modulus by ``1``, ``|xi_h|^2``, ``xi3^2``,
    ``|xi_h|^(-2 sigma)`` or ``(1 + |xi|^2)^3``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if component not in COMPONENT_CHOICES:
        raise ValueError(f"component must be one of {COMPONENT_CHOICES}")
    if weight not in WEIGHT_CHOICES:
        raise ValueError(f"weight must be one of {WEIGHT_CHOICES}")
    if weight == "lambda":
        if sigma is None:
            raise ValueError("the lambda weight needs sigma")
        profile.check_admissible(sigma)
    if profile.zero():
        return 0.0
    edges = _breakpoints(t, quad)

    def integrate(e):
        nodes, weights = _gauss_panels(e, quad.nodes_per_panel)
        return float(np.dot(weights, _integrand(profile, t, component, weight, sigma, nodes)))

    value = integrate(edges)
    if quad.check:
        mids = 0.5 * (edges[:-1] + edges[1:])
        finer = integrate(np.sort(np.concatenate([edges, mids])))
        if abs(finer - value) > quad.rtol * max(abs(finer), 1e-300):
            raise QuadratureError(
                f"panel doubling changed the integral by {abs(finer - value) / abs(finer):.2e} "
                f"at t={t}"
            )
        value = finer
    return math.sqrt(max(value, 0.0))


def oracle_decay_fit(
    profile: RadialProfile,
    t_grid,
    component: str = "v",
    weight: str = "l2",
    sigma: float | None = None,
    quad: QuadratureSpec = QuadratureSpec(),
) -> FitResult:
    """Power-law fit of :func:`continuous_norm` over ``t_grid``."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 12:
        raise ValueError("the oracle fit needs at least 12 times")
    values = [continuous_norm(profile, t, component, weight, sigma, quad) for t in t_grid]
    return fit_power_law(t_grid, values)
