"""Exact mode-wise evolution of the linearised perturbation system.

For each wavevector the linear system couples the four transformed unknowns
``(u1, u2, u3, theta)`` through a constant 4x4 generator.  The ``(u3, theta)``
pair forms a closed damped rotation with frequency ``omega = |xi_h| / |xi|``;
the horizontal velocity is slaved to it through the divergence constraint.

All singular-looking factors are evaluated in bounded form:

* ``(|xi| / |xi_h|) sin(omega t)`` becomes ``t * sinc(omega t)``;
* ``(cos(omega t) - 1) / |xi_h|^2`` becomes ``-q / |xi|^2`` with
  ``q = (1 - cos(omega t)) / omega^2 = (t^2 / 2) sinc(omega t / 2)^2``.

With ``nu == kappa`` (and ``E = exp(-nu |xi_h|^2 t)``) the propagator reads::

    u3(t)    = E (cos(omega t) u3 + omega^2 ts theta)
    theta(t) = E (-ts u3 + cos(omega t) theta)
    u_h(t)   = E (u_h + i xi_h xi3 / |xi|^2 (ts theta - q u3))

where ``ts = t sinc(omega t)``.  Unequal diffusivities use the same structure
with a shifted rotation frequency; see :meth:`PropagatorCache.factors`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .spectral_core import (
    GridSpec,
    MixedSpectralState,
    Parity,
    SpectralScalar,
    TruncatedTransform,
)

__all__ = [
    "sinc",
    "exprel",
    "PropagatorCache",
    "PropagatorFactors",
    "pressure_linear",
    "generator",
    "apply_semigroup",
    "semigroup_oracle",
    "propagate_modes",
    "mode_factors",
    "unrepresented_content",
]

_TAYLOR_CUTOFF = 1e-4


def sinc(x):
    """``sin(x) / x`` with a Taylor branch for ``|x| < 1e-4``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _TAYLOR_CUTOFF
    safe = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(safe) / safe)


def sinhc(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _TAYLOR_CUTOFF
    safe = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 + x2 / 6.0 + x2 * x2 / 120.0, np.sinh(safe) / safe)


def exprel(x):
    """``(exp(x) - 1) / x`` with the removable singularity filled."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _TAYLOR_CUTOFF
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x / 2.0 + x * x / 6.0, np.expm1(safe) / safe)


def _rotation_factors(mu_sq, t, rate=0.0, rate_sq_plus_mu_sq=None):
    """``cos(mu t)``, ``t sinc(mu t)`` and ``(1 - cos(mu t)) / mu^2`` times ``exp(-rate t)``.

    Negative ``mu^2`` (overdamped modes) continue analytically to the
    hyperbolic functions.  For those modes ``sqrt(-mu^2) < rate`` and the
    envelope is combined with the growing exponentials before evaluation so
    nothing overflows.  ``rate_sq_plus_mu_sq`` lets the caller supply
    ``rate^2 + mu^2`` free of cancellation; it fixes the slow decay rate
    ``rate - sqrt(-mu^2)``.
    """
    mu_sq = np.asarray(mu_sq, dtype=float)
    env = np.exp(-np.asarray(rate, dtype=float) * t)
    pos = mu_sq >= 0
    mu = np.sqrt(np.abs(mu_sq))
    x = mu * t
    half = 0.5 * x
    c = np.where(pos, np.cos(x), np.cosh(np.minimum(x, 1.0)))
    s = t * np.where(pos, sinc(x), sinhc(np.minimum(x, 1.0)))
    # (1 - cos x)/mu^2 = (t^2/2) sinc(x/2)^2, and (t^2/2) sinhc(x/2)^2 when mu^2 < 0
    q = 0.5 * t * t * np.where(pos, sinc(half), sinhc(np.minimum(half, 0.5))) ** 2
    c, s, q = env * c, env * s, env * q
    big = ~pos & (x > 1.0)
    if np.any(big):
        g = np.broadcast_to(mu, big.shape)[big]
        r = np.broadcast_to(np.asarray(rate, dtype=float), big.shape)[big]
        if rate_sq_plus_mu_sq is None:
            slow = r - g
        else:
            slow = np.broadcast_to(rate_sq_plus_mu_sq, big.shape)[big] / (r + g)
        up = np.exp(-slow * t)
        down = np.exp(-(g + r) * t)
        c, s, q = (np.array(np.broadcast_to(v, big.shape)) for v in (c, s, q))
        c[big] = 0.5 * (up + down)
        s[big] = 0.5 * (up - down) / g
        q[big] = (0.5 * (up + down) - np.exp(-r * t)) / (g * g)
    return c, s, q


def _enveloped_exprel(delta, rate, t):
    """``exp(-rate t) t exprel(delta t)`` without overflow for ``delta < rate``."""
    delta = np.asarray(delta, dtype=float)
    rate = np.asarray(rate, dtype=float)
    x = delta * t
    small = np.abs(x) < 1.0
    safe = np.where(small, 1.0, delta)
    direct = np.exp(-rate * t) * t * exprel(np.where(small, x, 0.0))
    split = (np.exp((delta - rate) * t) - np.exp(-rate * t)) / safe
    return np.where(small, direct, split)


@dataclass(frozen=True)
class PropagatorFactors:
    """Per-mode multipliers of the propagator at one time ``t``.

    The rotation envelope ``exp(-(nu + kappa)/2 |xi_h|^2 t)`` is folded into
    every coupled entry.
    """

    t: float
    decay_h: np.ndarray  # exp(-nu |xi_h|^2 t): horizontal velocity self-term
    uu: np.ndarray  # u3 <- u3
    ut: np.ndarray  # u3 <- theta
    tu: np.ndarray  # theta <- u3
    tt: np.ndarray  # theta <- theta
    hu: np.ndarray  # u_h <- i xi_h xi3 * u3
    ht: np.ndarray  # u_h <- i xi_h xi3 * theta


def mode_factors(r2, xi2, t: float, nu: float = 1.0, kappa: float = 1.0) -> PropagatorFactors:
    """Propagator multipliers from ``|xi_h|^2`` and ``|xi|^2`` (nonzero) arrays."""
    r2 = np.asarray(r2, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    w2 = r2 / xi2
    half_gap = 0.5 * (kappa - nu)
    delta = half_gap * r2
    rate = 0.5 * (nu + kappa) * r2
    # rate^2 + mu^2 = nu kappa |xi_h|^4 + omega^2 exactly
    c, s, q = _rotation_factors(w2 - delta * delta, t, rate, nu * kappa * r2 * r2 + w2)
    decay_h = np.exp(-nu * r2 * t)
    # u_h(t) - decay_h u_h0 = i xi_h xi3 (u3(t) - decay_h u3_0) / |xi_h|^2,
    # rewritten without the 1/|xi_h|^2.
    hu = -q / xi2
    if half_gap != 0.0:
        hu = hu + half_gap**2 * r2 * q + half_gap * (s - _enveloped_exprel(delta, rate, t))
    return PropagatorFactors(
        t,
        decay_h=decay_h,
        uu=c + delta * s,
        ut=w2 * s,
        tu=-s,
        tt=c - delta * s,
        hu=hu,
        ht=s / xi2,
    )


def _apply_factors(f: PropagatorFactors, coupling, data: np.ndarray) -> np.ndarray:
    u3, th = data[2], data[3]
    out = np.empty(np.broadcast_shapes(data.shape, (4,) + np.shape(f.uu)), dtype=complex)
    out[2] = f.uu * u3 + f.ut * th
    out[3] = f.tu * u3 + f.tt * th
    drive = f.hu * u3 + f.ht * th
    out[0] = f.decay_h * data[0] + coupling[0] * drive
    out[1] = f.decay_h * data[1] + coupling[1] * drive
    return out


def propagate_modes(xi, t: float, v, nu: float = 1.0, kappa: float = 1.0) -> np.ndarray:
    """Closed-form propagator at arbitrary wavevectors.

    ``xi`` has shape ``(3, ...)`` and ``v`` shape ``(4, ...)``; no grid needed.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    xi1, xi2, xi3 = (np.asarray(c, dtype=float) for c in xi)
    r2 = xi1**2 + xi2**2
    k2 = r2 + xi3**2
    if np.any(k2 == 0.0):
        raise ValueError("propagator undefined at the zero wavevector")
    f = mode_factors(r2, k2, t, nu, kappa)
    return _apply_factors(f, (1j * xi1 * xi3, 1j * xi2 * xi3), np.asarray(v, dtype=complex))


@dataclass(eq=False)
class PropagatorCache:
    """Per-mode invariants of the linear generator on a grid.

    ``lambda1 = -nu |xi_h|^2`` and ``omega = |xi_h| / |xi|``.  The ``xi = 0``
    mode (horizontal mean, ``k3 = 0``) is given ``omega = 0`` and ``|xi|^2 = 1``
    as placeholders; it carries no velocity coupling because ``xi3 = 0`` there.

    With ``box`` set, all tables live on the compact dealiasing box of a
    :class:`~halfspace_boussinesq.spectral_core.TruncatedTransform`.
    """

    grid: GridSpec
    nu: float = 1.0
    kappa: float = 1.0
    box: TruncatedTransform | None = None
    memo_bytes: int = 256 * 2**20
    _memo: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.nu < 0 or self.kappa < 0:
            raise ValueError("nu and kappa must be nonnegative")
        src = self.grid if self.box is None else self.box
        xi1, xi2, xi3 = src.xi1, src.xi2, src.xi3
        self.xi_h_sq = xi1**2 + xi2**2
        self.xi3 = xi3
        xi_sq = self.xi_h_sq + xi3**2
        self.xi_sq_safe = np.where(xi_sq == 0.0, 1.0, xi_sq)
        self.lambda1 = -self.nu * self.xi_h_sq
        self.omega = np.sqrt(self.xi_h_sq / self.xi_sq_safe)
        self.coupling = (1j * xi1 * xi3, 1j * xi2 * xi3)

    def factors(self, t: float) -> PropagatorFactors:
        t = float(t)
        if t < 0:
            raise ValueError(f"propagator time must be nonnegative, got {t}")
        hit = self._memo.get(t)
        if hit is not None:
            return hit
        f = mode_factors(self.xi_h_sq, self.xi_sq_safe, t, self.nu, self.kappa)
        entry_bytes = 7 * f.uu.nbytes
        if len(self._memo) >= max(4, self.memo_bytes // entry_bytes):
            self._memo.clear()
        self._memo[t] = f
        return f

    def apply(self, data: np.ndarray, t: float) -> np.ndarray:
        """Propagate a raw ``(4, ...)`` coefficient stack; no validation."""
        return _apply_factors(self.factors(t), self.coupling, data)


def unrepresented_content(state: MixedSpectralState) -> float:
    """Largest coefficient on modes the coupled dynamics cannot carry.

    These are the horizontal Nyquist planes (where ``i xi`` multipliers break
    reality) and the sine slot ``k3 = N3`` (which has no cosine partner).
    """
    g = state.grid
    bad = g.horizontal_nyquist | (g.k3 == g.N3)[None, None, :]
    return float(np.abs(state.data[:, np.broadcast_to(bad, g.spectral_shape)]).max(initial=0.0))


def pressure_linear(theta: SpectralScalar) -> SpectralScalar:
    """Pressure solving ``-Delta phi + d3 theta = 0`` with ``d3 phi = 0`` at the wall."""
    if theta.parity is not Parity.SINE:
        raise ValueError("temperature must be a sine-parity scalar")
    g = theta.grid
    xi_sq = np.where(g.xi_sq == 0.0, 1.0, g.xi_sq)
    out = -g.xi3 * theta.coeffs / xi_sq
    out[..., -1] = 0.0
    return SpectralScalar(g, Parity.COSINE, out)


def generator(xi, nu: float = 1.0, kappa: float = 1.0) -> np.ndarray:
    """The 4x4 generator of the linear system at wavevector ``xi``."""
    xi1, xi2, xi3 = (float(v) for v in xi)
    r2 = xi1 * xi1 + xi2 * xi2
    k2 = r2 + xi3 * xi3
    if k2 == 0.0:
        raise ValueError("generator undefined at the zero wavevector")
    A = np.zeros((4, 4), dtype=complex)
    A[0, 0] = A[1, 1] = A[2, 2] = -nu * r2
    A[3, 3] = -kappa * r2
    A[0, 3] = 1j * xi1 * xi3 / k2
    A[1, 3] = 1j * xi2 * xi3 / k2
    A[2, 3] = r2 / k2
    A[3, 2] = -1.0
    return A


def semigroup_oracle(xi, t: float, v, nu: float = 1.0, kappa: float = 1.0) -> np.ndarray:
    """``expm(A(xi) t) @ v`` by dense Pade scaling-and-squaring."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return scipy.linalg.expm(generator(xi, nu, kappa) * t) @ np.asarray(v, dtype=complex)


def apply_semigroup(
    state: MixedSpectralState,
    t: float,
    cache: PropagatorCache | None = None,
    check: bool = True,
) -> MixedSpectralState:
    """Evolve ``state`` by the exact linear flow for time ``t``.

    ``u_h - i xi_h xi3 u3 / |xi_h|^2`` obeys pure horizontal heat flow, which
    gives the horizontal update without assuming the divergence constraint;
    divergence-free input therefore stays divergence-free.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if cache is None:
        cache = PropagatorCache(state.grid, state.nu, state.kappa)
    elif cache.grid != state.grid or (cache.nu, cache.kappa) != (state.nu, state.kappa):
        raise ValueError("propagator cache does not match the state")
    if check:
        scale = float(np.abs(state.data).max(initial=0.0))
        if unrepresented_content(state) > 1e-12 * scale:
            raise ValueError(
                "state has content on horizontal Nyquist planes or the top sine mode; "
                "dealias it first"
            )
    return state.with_data(cache.apply(state.data, t))
