"""Advection, pressure projection and time integration of the full system.

Velocity forcing is ``-P(u . grad u)`` and temperature forcing is
``-u . grad theta``; the buoyancy and stratification couplings live in the
linear propagator.  Products are formed pseudo-spectrally with the 2/3 rule,
which on this basis makes every retained coefficient of a quadratic product
exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .linear_propagator import PropagatorCache, _rotation_factors, unrepresented_content
from .spectral_core import (
    GridSpec,
    MixedSpectralState,
    Parity,
    PhysicalState,
    SpectralScalar,
    TruncatedTransform,
    evaluate_at_height,
    norm_sq,
    to_physical,
    to_spectral_parity,
)

__all__ = [
    "BlowUpError",
    "NonContractionError",
    "NonlinearTerms",
    "StepperConfig",
    "DuhamelConfig",
    "BoundaryTraceReport",
    "ParityDiagnostic",
    "advect",
    "pressure_nonlinear",
    "leray_project",
    "forcing",
    "step",
    "Stepper",
    "evolve",
    "duhamel_solve",
    "boundary_trace_check",
    "dissipation",
    "parity_diagnostic",
]

_PARITIES = (Parity.COSINE, Parity.COSINE, Parity.SINE, Parity.SINE)


class BlowUpError(FloatingPointError):
    """Non-finite values appeared in a physical-space field."""


class NonContractionError(RuntimeError):
    """Picard iteration stopped contracting."""


@dataclass(frozen=True, eq=False)
class NonlinearTerms:
    """Transforms of ``(u.grad u)_1, (u.grad u)_2, (u.grad u)_3, u.grad theta``."""

    grid: GridSpec
    data: np.ndarray

    @classmethod
    def from_scalars(cls, adv_u1, adv_u2, adv_u3, adv_theta) -> "NonlinearTerms":
        comps = (adv_u1, adv_u2, adv_u3, adv_theta)
        for s, p in zip(comps, _PARITIES):
            if s.parity is not p:
                raise ValueError("nonlinear terms have parities (cos, cos, sin, sin)")
        return cls(adv_u1.grid, np.stack([s.coeffs for s in comps]))

    def _scalar(self, i):
        return SpectralScalar(self.grid, _PARITIES[i], self.data[i])

    adv_u1 = property(lambda self: self._scalar(0))
    adv_u2 = property(lambda self: self._scalar(1))
    adv_u3 = property(lambda self: self._scalar(2))
    adv_theta = property(lambda self: self._scalar(3))


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    T: float
    dealias: bool = True
    record_every: int = 1
    cfl_safety: float = 0.5

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.T < 0:
            raise ValueError(f"T must be nonnegative, got {self.T}")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")

    @property
    def n_steps(self) -> int:
        n = self.T / self.dt
        return int(round(n)) if math.isclose(n, round(n), rel_tol=1e-9) else math.ceil(n)


@dataclass(frozen=True)
class DuhamelConfig:
    T: float
    K: int = 65
    picard_iters: int = 60
    tol: float = 1e-13

    def __post_init__(self):
        if self.K < 3:
            raise ValueError("K must be at least 3")
        if not self.T > 0:
            raise ValueError("T must be positive")


# ---------------------------------------------------------------------------
# spectral helpers on raw coefficient stacks
# ---------------------------------------------------------------------------


def _safe_xi_sq(g: GridSpec) -> np.ndarray:
    return np.where(g.xi_sq == 0.0, 1.0, g.xi_sq)


def _dx3_sine_to_cos(g: GridSpec, b: np.ndarray) -> np.ndarray:
    out = g.xi3 * b
    out[..., -1] = 0.0
    return out


def _check_finite(phys: np.ndarray):
    if not np.isfinite(phys).all():
        raise BlowUpError("non-finite value in physical fields")


def _advect_flux(data: np.ndarray, g: GridSpec) -> tuple[np.ndarray, float]:
    """Divergence form ``div(u (x) f)``: 4 inverse and 9 forward transforms."""
    phys = to_physical(data, g)
    _check_finite(phys)
    u1, u2, u3, th = phys
    cos_prod = np.stack([u1 * u1, u1 * u2, u2 * u2, u3 * u3, u3 * th])
    sin_prod = np.stack([u1 * u3, u2 * u3, u1 * th, u2 * th])
    C = to_spectral_parity(cos_prod, g, Parity.COSINE)
    S = to_spectral_parity(sin_prod, g, Parity.SINE)
    i1, i2, x3 = 1j * g.xi1, 1j * g.xi2, g.xi3
    out = np.empty_like(data)
    out[0] = i1 * C[0] + i2 * C[1] + _dx3_sine_to_cos(g, S[0])
    out[1] = i1 * C[1] + i2 * C[2] + _dx3_sine_to_cos(g, S[1])
    out[2] = i1 * S[0] + i2 * S[1] - x3 * C[3]
    out[3] = i1 * S[2] + i2 * S[3] - x3 * C[4]
    out[2:, ..., 0] = 0.0
    umax = float(np.sqrt(u1 * u1 + u2 * u2 + u3 * u3).max())
    return out, umax


def _advect_advective(data: np.ndarray, g: GridSpec) -> tuple[np.ndarray, float]:
    """Advective form ``u . grad f``: 16 inverse and 4 forward transforms."""
    nyq = g.horizontal_nyquist
    d1 = np.where(nyq, 0.0, 1j * g.xi1) * data
    d2 = np.where(nyq, 0.0, 1j * g.xi2) * data
    d3 = np.empty_like(data)
    d3[:2] = -g.xi3 * data[:2]  # cosine -> sine
    d3[2:] = _dx3_sine_to_cos(g, data[2:].copy())  # sine -> cosine
    flipped = tuple(p.flipped for p in _PARITIES)
    phys = to_physical(data, g)
    _check_finite(phys)
    g1 = to_physical(d1, g)
    g2 = to_physical(d2, g)
    g3 = to_physical(d3, g, parities=flipped)
    u1, u2, u3 = phys[0], phys[1], phys[2]
    prod = u1 * g1 + u2 * g2 + u3 * g3
    out = np.empty_like(data)
    out[:2] = to_spectral_parity(prod[:2], g, Parity.COSINE)
    out[2:] = to_spectral_parity(prod[2:], g, Parity.SINE)
    umax = float(np.sqrt(u1 * u1 + u2 * u2 + u3 * u3).max())
    return out, umax


_FORMS = {"advective": _advect_advective, "flux": _advect_flux}


def advect(
    state: MixedSpectralState, dealias: bool = True, form: str = "advective"
) -> NonlinearTerms:
    """Transforms of ``u . grad u`` and ``u . grad theta``.

    ``form="flux"`` evaluates ``div(u (x) u)`` instead, which is cheaper and
    coincides with the advective form for divergence-free, dealiased input.
    """
    try:
        fn = _FORMS[form]
    except KeyError:
        raise ValueError(f"unknown advection form {form!r}") from None
    out, _ = fn(state.data, state.grid)
    if dealias:
        out *= state.grid.dealias_mask
    return NonlinearTerms(state.grid, out)


def _divergence_symbol(w: np.ndarray, g: GridSpec) -> np.ndarray:
    return 1j * g.xi1 * w[0] + 1j * g.xi2 * w[1] + g.xi3 * w[2]


def pressure_nonlinear(n: NonlinearTerms) -> SpectralScalar:
    """``psi`` with ``Delta psi = div(u . grad u)`` and ``d3 psi = 0`` at the wall."""
    g = n.grid
    psi = -_divergence_symbol(n.data, g) / _safe_xi_sq(g)
    psi[..., -1] = 0.0
    return SpectralScalar(g, Parity.COSINE, psi)


def _project(w: np.ndarray, g: GridSpec) -> np.ndarray:
    """``w + grad_symbol * D(w) / |xi|^2`` on the first three rows of ``w``, in place."""
    phi = _divergence_symbol(w, g) / _safe_xi_sq(g)
    w[0] += 1j * g.xi1 * phi
    w[1] += 1j * g.xi2 * phi
    w[2] -= g.xi3 * phi
    return w


def leray_project(n: NonlinearTerms) -> NonlinearTerms:
    """Remove the Neumann-pressure gradient from the momentum terms.

    The temperature row passes through unchanged.
    """
    return NonlinearTerms(n.grid, _project(n.data.copy(), n.grid))


# ---------------------------------------------------------------------------
# forcing and stepping
# ---------------------------------------------------------------------------


class _Forcing:
    """``N(W) = -(P(u . grad u), u . grad theta)`` with zero horizontal mean, full layout."""

    def __init__(self, grid: GridSpec, dealias: bool = True, form: str = "flux"):
        self.grid = grid
        self.fn = _FORMS[form]
        mask = np.ones(grid.spectral_shape, dtype=bool)
        if dealias:
            mask &= grid.dealias_mask
        mask &= ~grid.horizontal_mean
        mask &= ~grid.horizontal_nyquist
        mask[..., -1] = False
        self.mask = mask
        self.last_umax = 0.0

    def __call__(self, data: np.ndarray) -> np.ndarray:
        out, self.last_umax = self.fn(data, self.grid)
        out *= self.mask
        _project(out, self.grid)
        np.negative(out, out=out)
        return out


class _BoxForcing:
    """The same forcing on the compact dealiasing box (flux form)."""

    def __init__(self, tt: TruncatedTransform):
        self.tt = tt
        self.grid = tt.grid
        self.i1 = 1j * tt.xi1
        self.i2 = 1j * tt.xi2
        self.x3 = tt.xi3
        xi_sq = tt.xi1**2 + tt.xi2**2 + tt.xi3**2
        self.inv_xi_sq = 1.0 / np.where(xi_sq == 0.0, 1.0, xi_sq)
        shape = self.grid.shape
        self._cos_prod = np.empty((5,) + shape)
        self._sin_prod = np.empty((4,) + shape)
        # the peak speed only feeds the advisory CFL warning, so sample it sparsely
        self.peak_every = 16
        self._calls = 0
        self.last_umax = 0.0

    def __call__(self, c: np.ndarray) -> np.ndarray:
        tt = self.tt
        u1, u2 = tt.to_physical(c[:2], Parity.COSINE)
        u3, th = tt.to_physical(c[2:], Parity.SINE)
        self._calls += 1
        if self._calls % self.peak_every == 1:
            self.last_umax = math.sqrt(sum(float(np.abs(f).max()) ** 2 for f in (u1, u2, u3)))
        cp, sp = self._cos_prod, self._sin_prod
        for k, (a, b) in enumerate(((u1, u1), (u1, u2), (u2, u2), (u3, u3), (u3, th))):
            np.multiply(a, b, out=cp[k])
        for k, (a, b) in enumerate(((u1, u3), (u2, u3), (u1, th), (u2, th))):
            np.multiply(a, b, out=sp[k])
        C = tt.to_spectral(cp, Parity.COSINE)
        S = tt.to_spectral(sp, Parity.SINE)
        i1, i2, x3 = self.i1, self.i2, self.x3
        out = np.empty_like(c)
        out[0] = i1 * C[0] + i2 * C[1] + x3 * S[0]
        out[1] = i1 * C[1] + i2 * C[2] + x3 * S[1]
        out[2] = i1 * S[0] + i2 * S[1] - x3 * C[3]
        out[3] = i1 * S[2] + i2 * S[3] - x3 * C[4]
        out[2:, ..., 0] = 0.0
        out[:, 0, 0, :] = 0.0  # horizontal mean
        phi = (i1 * out[0] + i2 * out[1] + x3 * out[2]) * self.inv_xi_sq
        out[0] += i1 * phi
        out[1] += i2 * phi
        out[2] -= x3 * phi
        np.negative(out, out=out)
        if not np.isfinite(out).all():
            raise BlowUpError("non-finite value in the nonlinear forcing")
        return out


def forcing(state: MixedSpectralState, dealias: bool = True) -> MixedSpectralState:
    """The nonlinear right-hand side as a state-shaped stack."""
    return state.with_data(_Forcing(state.grid, dealias)(state.data))


class Stepper:
    """Integrating-factor Heun scheme on the exact linear propagator.

    Per step: ``SW = S(W)``, ``SN = S(N(W))``, predictor ``W* = SW + dt SN``,
    corrector ``SW + dt/2 (SN + N(W*))``.  Two forcing evaluations and two
    propagator applications.

    With dealiasing on and the flux form, states are held on the compact
    dealiasing box; :meth:`to_internal` and :meth:`to_full` convert.
    """

    def __init__(self, grid: GridSpec, cfg: StepperConfig, nu: float = 1.0, kappa: float = 1.0,
                 form: str = "flux"):
        self.grid = grid
        self.cfg = cfg
        self.nu, self.kappa = nu, kappa
        self.box = None
        if cfg.dealias and form == "flux" and grid.dealias_fraction < 1:
            self.box = TruncatedTransform(grid)
            self.cache = PropagatorCache(grid, nu, kappa, box=self.box)
            self.N = _BoxForcing(self.box)
        else:
            self.cache = PropagatorCache(grid, nu, kappa)
            self.N = _Forcing(grid, cfg.dealias, form)
        self.dx = min(grid.L_h / grid.N_h, grid.L3 / grid.N3)
        self._warned = False

    def to_internal(self, data: np.ndarray) -> np.ndarray:
        if self.box is None:
            return data.copy()
        outside = np.abs(data * ~self.grid.dealias_mask).max(initial=0.0)
        if outside > 1e-12 * np.abs(data).max(initial=0.0):
            raise ValueError("state has content outside the dealiasing box; dealias it first")
        return self.box.gather(data)

    def to_full(self, data: np.ndarray) -> np.ndarray:
        return data.copy() if self.box is None else self.box.scatter(data)

    def _cfl(self, dt: float):
        umax = self.N.last_umax
        if not self._warned and umax > 0 and dt > self.cfg.cfl_safety * self.dx / umax:
            warnings.warn(
                f"dt={dt:g} exceeds the advective CFL bound "
                f"{self.cfg.cfl_safety * self.dx / umax:.3g}",
                RuntimeWarning,
                stacklevel=3,
            )
            self._warned = True

    def advance(self, data: np.ndarray, dt: float | None = None) -> np.ndarray:
        """One step on internal-layout data."""
        dt = self.cfg.dt if dt is None else dt
        S = self.cache.apply
        NW = self.N(data)
        self._cfl(dt)
        SW = S(data, dt)
        SN = S(NW, dt)
        pred = SW + dt * SN
        out = SW + (0.5 * dt) * (SN + self.N(pred))
        if not np.isfinite(out).all():
            raise BlowUpError("non-finite spectral coefficients after a step")
        return out


def _check_representable(state: MixedSpectralState):
    scale = float(np.abs(state.data).max(initial=0.0))
    if unrepresented_content(state) > 1e-12 * scale:
        raise ValueError("state has content on unrepresented modes; dealias it first")


def step(state: MixedSpectralState, cfg: StepperConfig, stepper: Stepper | None = None):
    """Advance ``state`` by one step of size ``cfg.dt``."""
    _check_representable(state)
    if stepper is None:
        stepper = Stepper(state.grid, cfg, state.nu, state.kappa)
    out = stepper.advance(stepper.to_internal(state.data))
    return state.with_data(stepper.to_full(out))


def evolve(
    state: MixedSpectralState, cfg: StepperConfig, t0: float = 0.0
) -> Iterator[tuple[float, MixedSpectralState]]:
    """Yield ``(t, state)`` at ``t0`` and every ``record_every`` steps up to ``T``.

    The last step is shortened to land on ``T`` exactly, and the final state
    is always yielded.
    """
    _check_representable(state)
    stepper = Stepper(state.grid, cfg, state.nu, state.kappa)
    data = stepper.to_internal(state.data)
    t = t0
    yield t, state.with_data(state.data.copy())
    n = cfg.n_steps
    for k in range(1, n + 1):
        dt = min(cfg.dt, cfg.T - (t - t0)) if k == n else cfg.dt
        data = stepper.advance(data, dt)
        t = t0 + cfg.T if k == n else t + dt
        if k % cfg.record_every == 0 or k == n:
            yield t, state.with_data(stepper.to_full(data))


# ---------------------------------------------------------------------------
# Duhamel / Picard oracle
# ---------------------------------------------------------------------------


class _Kernels:
    """Propagator pieces applied to raw (unprojected) forcing, by time lag.

    The lag factors are built here from ``omega`` directly rather than taken
    from :class:`PropagatorCache`, so this path stays independent of the
    stepper's propagator.
    """

    def __init__(self, grid: GridSpec, nu: float):
        g = grid
        self.g = g
        self.nu = nu
        xi2 = _safe_xi_sq(g)
        self.inv_xi2 = 1.0 / xi2
        self.omega2 = g.xi_h_sq / xi2
        self.ih = (1j * g.xi1, 1j * g.xi2)
        self._memo = {}

    def _factors(self, lag: float):
        hit = self._memo.get(lag)
        if hit is None:
            c, ts, q = _rotation_factors(self.omega2, lag)
            E = np.exp(-self.nu * self.g.xi_h_sq * lag)
            hit = self._memo[lag] = (E, c, ts, q)
        return hit

    def projected(self, w: np.ndarray):
        """Horizontal (literal component form) and vertical projected momentum terms."""
        g = self.g
        inv = self.inv_xi2
        xh_dot = g.xi1 * w[0] + g.xi2 * w[1]
        ph = [
            w[0] - g.xi1 * xh_dot * inv + 1j * g.xi1 * g.xi3 * w[2] * inv,
            w[1] - g.xi2 * xh_dot * inv + 1j * g.xi2 * g.xi3 * w[2] * inv,
        ]
        p3 = self.omega2 * w[2] - 1j * g.xi3 * xh_dot * inv
        return ph, p3

    def apply(self, ph, p3, tth, lag: float):
        """``exp(A lag)`` applied to ``-(P_h, P_3, T_theta)`` as the seven kernel terms."""
        E, c, ts, q = self._factors(lag)
        coup = self.g.xi3 * self.inv_xi2
        J1 = [E * ph[0], E * ph[1]]
        # (cos - 1) i xi_h xi3 / |xi_h|^2 = -q i xi_h xi3 / |xi|^2
        J2 = [-(E * q * coup) * ih * p3 for ih in self.ih]
        J3 = [(E * ts * coup) * ih * tth for ih in self.ih]
        J4 = E * c * p3
        J5 = E * self.omega2 * ts * tth
        J6 = E * ts * p3
        J7 = E * c * tth
        out = np.empty((4,) + p3.shape, dtype=complex)
        out[0] = -J1[0] - J2[0] - J3[0]
        out[1] = -J1[1] - J2[1] - J3[1]
        out[2] = -J4 - J5
        out[3] = J6 - J7
        return out


def duhamel_solve(
    v0: MixedSpectralState,
    cfg: DuhamelConfig,
    dealias: bool = True,
    nonlinear: bool = True,
    return_info: bool = False,
):
    """Solve on ``[0, T]`` by Picard iteration of the Duhamel representation.

    The time integral uses the composite trapezoid rule on ``K`` equispaced
    nodes.  Each kernel acts on the raw advection terms, with the projection
    folded into the kernel algebra.
    """
    if v0.nu != v0.kappa:
        raise ValueError("the kernel representation assumes nu == kappa")
    g = v0.grid
    cache = PropagatorCache(g, v0.nu, v0.kappa)
    kern = _Kernels(g, v0.nu)
    times = np.linspace(0.0, cfg.T, cfg.K)
    h = times[1] - times[0]
    lin = np.stack([cache.apply(v0.data, t) for t in times])
    if not nonlinear:
        final = v0.with_data(lin[-1])
        return (final, {"iterations": 0, "residuals": []}) if return_info else final

    mask = np.ones(g.spectral_shape, dtype=bool)
    if dealias:
        mask &= g.dealias_mask
    mask &= ~g.horizontal_mean & ~g.horizontal_nyquist
    mask[..., -1] = False

    scale = math.sqrt(max(norm_sq(v0), 1e-300))
    W = lin.copy()
    residuals = []
    for it in range(cfg.picard_iters):
        terms = []
        for j in range(cfg.K):
            w, _ = _advect_flux(W[j], g)
            w *= mask
            ph, p3 = kern.projected(w)
            terms.append((ph, p3, w[3]))
        new = lin.copy()
        for k in range(1, cfg.K):
            acc = np.zeros_like(lin[0])
            for j in range(k + 1):
                wt = 0.5 if j in (0, k) else 1.0
                acc += wt * kern.apply(*terms[j], times[k] - times[j])
            new[k] += h * acc
        res = max(math.sqrt(norm_sq(v0.with_data(new[k] - W[k]))) for k in range(cfg.K)) / scale
        residuals.append(res)
        W = new
        if res < cfg.tol:
            break
        if len(residuals) >= 3 and res > residuals[-2]:
            raise NonContractionError(
                f"Picard residual grew from {residuals[-2]:.3e} to {res:.3e}; reduce T"
            )
    final = v0.with_data(W[-1])
    info = {"iterations": len(residuals), "residuals": residuals, "times": times}
    return (final, info) if return_info else final


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def dissipation(state: MixedSpectralState) -> float:
    """``nu ||grad_h u||^2 + kappa ||grad_h theta||^2``, the L2 energy loss rate."""
    g = state.grid
    w = g.hermitian_weight * np.where(g.horizontal_nyquist, 0.0, g.xi_h_sq)
    total = 0.0
    for i, p in enumerate(_PARITIES):
        c = state.data[i]
        coef = state.nu if i < 3 else state.kappa
        total += coef * float(np.sum(w * g.vertical_weight(p) * (c.real**2 + c.imag**2)))
    return g.volume * total


@dataclass(frozen=True)
class BoundaryTraceReport:
    u3: float
    theta: float
    d3_u1: float
    d3_u2: float
    d33_theta: float
    scale: float

    @property
    def max_trace(self) -> float:
        return max(self.u3, self.theta, self.d3_u1, self.d3_u2, self.d33_theta)

    @property
    def relative(self) -> float:
        return self.max_trace / self.scale if self.scale > 0 else 0.0


def boundary_trace_check(state: MixedSpectralState) -> BoundaryTraceReport:
    """Wall values implied by the parity expansions, evaluated at ``x3 = 0``."""
    def trace(i, m):
        return float(np.abs(evaluate_at_height(state.component(i), 0.0, m)).max())

    phys = to_physical(state.data, state.grid)
    return BoundaryTraceReport(
        u3=trace(2, 0),
        theta=trace(3, 0),
        d3_u1=trace(0, 1),
        d3_u2=trace(1, 1),
        d33_theta=trace(3, 2),
        scale=float(np.abs(phys).max(initial=0.0)),
    )


@dataclass(frozen=True)
class ParityDiagnostic:
    opposite_parity_fraction: float
    dealias_truncated_fraction: float


def parity_diagnostic(state: MixedSpectralState) -> ParityDiagnostic:
    """How far quadratic products are from the parity class they are stored in.

    The opposite-parity fraction is measured on the reflected domain
    ``[-L3, L3]``; the truncated fraction is the share of product energy the
    2/3 rule discards.
    """
    ext = PhysicalState.from_spectral(state).extended()
    u = (ext.u1, ext.u2, ext.u3)
    # expected parity of each product component on the reflected slab: +1 even, -1 odd
    prods = [
        (u[0] * u[0], 1), (u[0] * u[1], 1), (u[1] * u[1], 1), (u[2] * u[2], 1),
        (u[0] * u[2], -1), (u[1] * u[2], -1), (u[0] * ext.theta, -1),
        (u[1] * ext.theta, -1), (u[2] * ext.theta, 1),
    ]
    wrong = total = 0.0
    for f, sign in prods:
        mirrored = f[..., ::-1]
        bad = 0.5 * (f - sign * mirrored)
        wrong += float(np.sum(bad * bad))
        total += float(np.sum(f * f))
    full, _ = _advect_flux(state.data, state.grid)
    kept = norm_sq(state.with_data(full * state.grid.dealias_mask))
    allsq = norm_sq(state.with_data(full))
    return ParityDiagnostic(
        opposite_parity_fraction=math.sqrt(wrong / total) if total else 0.0,
        dealias_truncated_fraction=math.sqrt(max(allsq - kept, 0.0) / allsq) if allsq else 0.0,
    )
