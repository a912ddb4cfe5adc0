"""Mixed Fourier / cosine / sine discretisation of the truncated half-space.

The horizontal directions are periodic with side ``L_h`` and are handled by a
real FFT (half spectrum along the second axis).  The vertical direction is the
slab ``[0, L3]`` sampled on the half-sample grid ``x3_j = (j + 1/2) L3 / N3``,
where fields are expanded either in cosines (Neumann class: ``u1``, ``u2``,
pressure) or sines (Dirichlet class: ``u3``, ``theta``).

Coefficients are *amplitudes*: a cosine-class field is
``sum c[k1, k2, k3] exp(i xi_h . x_h) cos(xi3 x3)``, and likewise with ``sin``.
Both parities share one vertical index ``k3 = 0..N3`` with ``xi3 = k3 pi / L3``;
the cosine class never populates ``k3 = N3`` and the sine class never
populates ``k3 = 0``.  Sharing the index means every vertical operation is a
pointwise multiplier, including ``d/dx3`` which swaps the parity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Parity",
    "GridSpec",
    "SpectralScalar",
    "MixedSpectralState",
    "PhysicalState",
    "HermitianSymmetryError",
    "build_grid",
    "forward_mixed",
    "inverse_mixed",
    "d_horizontal",
    "d_vertical",
    "lambda_h_pow",
    "norm_l2",
    "sobolev_norm",
    "dealias",
    "evaluate_at_height",
    "norm_sq",
    "to_spectral",
    "to_physical",
    "to_spectral_parity",
    "to_physical_parity",
    "hermitian_defect",
    "TruncatedTransform",
    "COMPONENT_PARITY",
]


class HermitianSymmetryError(ValueError):
    """Coefficients do not describe a real-valued field."""


class Parity(enum.Enum):
    COSINE = "cosine"
    SINE = "sine"

    @property
    def flipped(self) -> "Parity":
        return Parity.SINE if self is Parity.COSINE else Parity.COSINE


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class GridSpec:
    """Truncated computational domain and its wavenumber tables.

    Use :func:`build_grid` to construct one; it validates the arguments.
    """

    L_h: float
    N_h: int
    L3: float
    N3: int
    dealias_fraction: Fraction = Fraction(2, 3)

    # -- physical nodes ---------------------------------------------------
    @cached_property
    def x_h(self) -> np.ndarray:
        return self.L_h * np.arange(self.N_h) / self.N_h

    @cached_property
    def x3(self) -> np.ndarray:
        return (np.arange(self.N3) + 0.5) * self.L3 / self.N3

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(self.x_h, self.x_h, self.x3, indexing="ij")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.N_h, self.N_h, self.N3)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.N_h, self.N_h // 2 + 1, self.N3 + 1)

    @property
    def volume(self) -> float:
        return self.L_h * self.L_h * self.L3

    # -- integer wavenumbers ---------------------------------------------
    @cached_property
    def k1(self) -> np.ndarray:
        """Signed index along axis 0, FFT ordering, in ``[-N_h/2, N_h/2)``."""
        return np.fft.fftfreq(self.N_h, 1.0 / self.N_h).astype(int)

    @cached_property
    def k2(self) -> np.ndarray:
        """Non-negative index along the half-spectrum axis, ``0..N_h/2``."""
        return np.arange(self.N_h // 2 + 1)

    @cached_property
    def k3(self) -> np.ndarray:
        return np.arange(self.N3 + 1)

    # -- physical wavenumbers --------------------------------------------
    @cached_property
    def xi_h_values(self) -> np.ndarray:
        """Horizontal wavenumbers ``2 pi k / L_h`` for ``k = -N_h/2..N_h/2-1``."""
        k = np.arange(-self.N_h // 2, self.N_h // 2)
        return 2.0 * np.pi * k / self.L_h

    @cached_property
    def xi3_cosine(self) -> np.ndarray:
        return np.pi * np.arange(self.N3) / self.L3

    @cached_property
    def xi3_sine(self) -> np.ndarray:
        return np.pi * np.arange(1, self.N3 + 1) / self.L3

    @cached_property
    def xi1(self) -> np.ndarray:
        return (2.0 * np.pi / self.L_h * self.k1)[:, None, None]

    @cached_property
    def xi2(self) -> np.ndarray:
        return (2.0 * np.pi / self.L_h * self.k2)[None, :, None]

    @cached_property
    def xi3(self) -> np.ndarray:
        return (np.pi / self.L3 * self.k3)[None, None, :]

    @cached_property
    def xi_h_sq(self) -> np.ndarray:
        return self.xi1**2 + self.xi2**2

    @cached_property
    def xi_h_abs(self) -> np.ndarray:
        return np.sqrt(self.xi_h_sq)

    @cached_property
    def xi_sq(self) -> np.ndarray:
        return self.xi_h_sq + self.xi3**2

    @cached_property
    def horizontal_mean(self) -> np.ndarray:
        """Boolean mask of the ``xi_h = 0`` column."""
        return (self.xi_h_sq == 0.0)

    @cached_property
    def horizontal_nyquist(self) -> np.ndarray:
        """Modes on the horizontal Nyquist planes, where odd derivatives vanish."""
        return (np.abs(self.k1) == self.N_h // 2)[:, None, None] | (
            self.k2 == self.N_h // 2
        )[None, :, None]

    # -- quadrature weights ----------------------------------------------
    @cached_property
    def hermitian_weight(self) -> np.ndarray:
        """Multiplicity of each half-spectrum column in the full spectrum."""
        w = np.full(self.N_h // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w[None, :, None]

    def vertical_weight(self, parity: Parity) -> np.ndarray:
        """Mean-square weight of each vertical basis function on the slab."""
        w = np.full(self.N3 + 1, 0.5)
        if parity is Parity.COSINE:
            w[0] = 1.0
            w[-1] = 0.0
        else:
            w[0] = 0.0
            w[-1] = 1.0
        return w[None, None, :]

    def parity_slots(self, parity: Parity) -> np.ndarray:
        """Boolean mask over ``k3`` of the slots a parity class may populate."""
        ok = np.ones(self.N3 + 1, dtype=bool)
        ok[-1 if parity is Parity.COSINE else 0] = False
        return ok[None, None, :]

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        f = Fraction(self.dealias_fraction)
        # |k| > f * Nyquist is removed; integer arithmetic keeps the boundary exact.
        keep1 = np.abs(self.k1) * f.denominator <= f.numerator * (self.N_h // 2)
        keep2 = self.k2 * f.denominator <= f.numerator * (self.N_h // 2)
        keep3 = self.k3 * f.denominator <= f.numerator * self.N3
        return keep1[:, None, None] & keep2[None, :, None] & keep3[None, None, :]


def build_grid(
    L_h: float,
    N_h: int,
    L3: float,
    N3: int,
    dealias_fraction: Fraction | float | str = Fraction(2, 3),
) -> GridSpec:
    if not (L_h > 0 and L3 > 0):
        raise ValueError(f"domain lengths must be positive, got L_h={L_h}, L3={L3}")
    for name, n in (("N_h", N_h), ("N3", N3)):
        if int(n) != n or not _is_power_of_two(int(n)) or n < 8:
            raise ValueError(f"{name} must be a power of two >= 8, got {n}")
    frac = Fraction(dealias_fraction).limit_denominator(1000)
    if not (0 < frac <= 1):
        raise ValueError(f"dealias_fraction must lie in (0, 1], got {dealias_fraction}")
    return GridSpec(float(L_h), int(N_h), float(L3), int(N3), frac)


# ---------------------------------------------------------------------------
# scalars and states
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralScalar:
    grid: GridSpec
    parity: Parity
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != self.grid.spectral_shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match grid "
                f"{self.grid.spectral_shape}"
            )

    @classmethod
    def zeros(cls, grid: GridSpec, parity: Parity) -> "SpectralScalar":
        return cls(grid, parity, np.zeros(grid.spectral_shape, dtype=complex))

    def with_coeffs(self, coeffs: np.ndarray, parity: Parity | None = None):
        return SpectralScalar(self.grid, parity or self.parity, coeffs)

    def full_spectrum(self) -> np.ndarray:
        """Coefficients over all ``(k1, k2)``, indexed in FFT order.

        Returned with the parity's own ``k3`` range (``N3`` entries).
        """
        g = self.grid
        n = g.N_h
        half = self.coeffs
        full = np.empty((n, n, g.N3 + 1), dtype=complex)
        full[:, : n // 2 + 1] = half
        # c(k1, -k2) = conj(c(-k1, k2))
        neg_k1 = (-np.arange(n)) % n
        k2_missing = np.arange(n // 2 + 1, n)
        full[:, k2_missing] = np.conj(half[neg_k1][:, n - k2_missing])
        if self.parity is Parity.COSINE:
            return full[..., : g.N3]
        return full[..., 1:]


def _check_parity_slots(s: SpectralScalar):
    bad = ~s.grid.parity_slots(s.parity)
    leak = np.abs(s.coeffs[..., bad[0, 0]]).max(initial=0.0)
    if leak > 0.0:
        raise ValueError(f"{s.parity.value} scalar populates a forbidden k3 slot")


COMPONENT_PARITY = (Parity.COSINE, Parity.COSINE, Parity.SINE, Parity.SINE)
COMPONENT_NAMES = ("u1", "u2", "u3", "theta")


@dataclass(frozen=True, eq=False)
class MixedSpectralState:
    """The frequency-space unknown ``(Fc u1, Fc u2, Fs u3, Fs theta)``.

    ``data`` has shape ``(4,) + grid.spectral_shape``.
    """

    grid: GridSpec
    data: np.ndarray
    nu: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.data.shape != (4,) + self.grid.spectral_shape:
            raise ValueError(f"state data has shape {self.data.shape}")

    @classmethod
    def zeros(cls, grid: GridSpec, nu: float = 1.0, kappa: float = 1.0):
        return cls(grid, np.zeros((4,) + grid.spectral_shape, dtype=complex), nu, kappa)

    @classmethod
    def from_components(
        cls,
        u1: SpectralScalar,
        u2: SpectralScalar,
        u3: SpectralScalar,
        theta: SpectralScalar,
        nu: float = 1.0,
        kappa: float = 1.0,
    ) -> "MixedSpectralState":
        comps = (u1, u2, u3, theta)
        for name, s, parity in zip(COMPONENT_NAMES, comps, COMPONENT_PARITY):
            if s.parity is not parity:
                raise ValueError(f"{name} must have {parity.value} parity")
        return cls(u1.grid, np.stack([s.coeffs for s in comps]), nu, kappa)

    def with_data(self, data: np.ndarray) -> "MixedSpectralState":
        return MixedSpectralState(self.grid, data, self.nu, self.kappa)

    def component(self, i: int) -> SpectralScalar:
        return SpectralScalar(self.grid, COMPONENT_PARITY[i], self.data[i])

    u1 = property(lambda self: self.component(0))
    u2 = property(lambda self: self.component(1))
    u3 = property(lambda self: self.component(2))
    theta = property(lambda self: self.component(3))

    def components(self) -> list[SpectralScalar]:
        return [self.component(i) for i in range(4)]

    def divergence(self) -> np.ndarray:
        """``i xi1 u1 + i xi2 u2 + xi3 u3`` at every mode (the transformed div u)."""
        g = self.grid
        d = self.data
        return 1j * g.xi1 * d[0] + 1j * g.xi2 * d[1] + g.xi3 * d[2]

    def divergence_residual(self) -> float:
        """Max |divergence symbol| relative to ``max|xi| * max|u|``."""
        scale = np.sqrt(self.grid.xi_sq.max()) * np.abs(self.data[:3]).max()
        if scale == 0.0:
            return 0.0
        return float(np.abs(self.divergence()).max() / scale)

    def horizontal_mean_content(self) -> float:
        return float(np.abs(self.data[:, self.grid.horizontal_mean[..., 0]]).max(initial=0.0))


@dataclass(frozen=True, eq=False)
class PhysicalState:
    grid: GridSpec
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    theta: np.ndarray

    @classmethod
    def from_spectral(cls, state: MixedSpectralState) -> "PhysicalState":
        phys = to_physical(state.data, state.grid)
        return cls(state.grid, *phys)

    def to_spectral(self, nu: float = 1.0, kappa: float = 1.0) -> MixedSpectralState:
        data = to_spectral(np.stack([self.u1, self.u2, self.u3, self.theta]), self.grid)
        return MixedSpectralState(self.grid, data, nu, kappa)

    def extended(self) -> "PhysicalState":
        """Reflect onto ``[-L3, L3]``: cosine fields evenly, sine fields oddly.

        The result lives on ``2 N3`` half-sample nodes and is periodic in x3,
        which is what the boundary conditions amount to on the discrete slab.
        """
        def even(f):
            return np.concatenate([f[..., ::-1], f], axis=-1)

        def odd(f):
            return np.concatenate([-f[..., ::-1], f], axis=-1)

        return PhysicalState(self.grid, even(self.u1), even(self.u2), odd(self.u3), odd(self.theta))


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def _vertical_scales(n3: int):
    # Forward: unnormalised DCT-II / DST-II -> amplitudes.  Inverse: amplitudes ->
    # input of unnormalised DCT-III / DST-III.
    fwd_c = np.full(n3, 1.0 / n3)
    fwd_c[0] = 0.5 / n3
    inv_c = np.full(n3, 0.5)
    inv_c[0] = 1.0
    fwd_s = np.full(n3, 1.0 / n3)
    fwd_s[-1] = 0.5 / n3
    inv_s = np.full(n3, 0.5)
    inv_s[-1] = 1.0
    return fwd_c, inv_c, fwd_s, inv_s


def _transform_split(parities: Iterable[Parity]):
    cos_idx, sin_idx = [], []
    for i, p in enumerate(parities):
        (cos_idx if p is Parity.COSINE else sin_idx).append(i)
    return cos_idx, sin_idx


def to_spectral_parity(fields: np.ndarray, grid: GridSpec, parity: Parity) -> np.ndarray:
    """Forward transform of a stack ``(..., N_h, N_h, N3)`` of one parity class."""
    fwd_c, _, fwd_s, _ = _vertical_scales(grid.N3)
    out = np.zeros(fields.shape[:-3] + grid.spectral_shape, dtype=complex)
    if parity is Parity.COSINE:
        vert = sfft.dct(fields, type=2, axis=-1) * fwd_c
        out[..., : grid.N3] = sfft.rfftn(vert, axes=(-3, -2), norm="forward")
    else:
        vert = sfft.dst(fields, type=2, axis=-1) * fwd_s
        out[..., 1:] = sfft.rfftn(vert, axes=(-3, -2), norm="forward")
    return out


def to_physical_parity(coeffs: np.ndarray, grid: GridSpec, parity: Parity) -> np.ndarray:
    """Inverse of :func:`to_spectral_parity`; no symmetry checks."""
    _, inv_c, _, inv_s = _vertical_scales(grid.N3)
    n = grid.N_h
    if parity is Parity.COSINE:
        horiz = sfft.irfftn(coeffs[..., : grid.N3], s=(n, n), axes=(-3, -2), norm="forward")
        return sfft.dct(horiz * inv_c, type=3, axis=-1)
    horiz = sfft.irfftn(coeffs[..., 1:], s=(n, n), axes=(-3, -2), norm="forward")
    return sfft.dst(horiz * inv_s, type=3, axis=-1)


def to_spectral(fields: np.ndarray, grid: GridSpec, parities=COMPONENT_PARITY) -> np.ndarray:
    out = np.empty(fields.shape[:-3] + grid.spectral_shape, dtype=complex)
    cos_idx, sin_idx = _transform_split(parities)
    if cos_idx:
        out[cos_idx] = to_spectral_parity(fields[cos_idx], grid, Parity.COSINE)
    if sin_idx:
        out[sin_idx] = to_spectral_parity(fields[sin_idx], grid, Parity.SINE)
    return out


def to_physical(coeffs: np.ndarray, grid: GridSpec, parities=COMPONENT_PARITY) -> np.ndarray:
    out = np.empty(coeffs.shape[:-3] + grid.shape)
    cos_idx, sin_idx = _transform_split(parities)
    if cos_idx:
        out[cos_idx] = to_physical_parity(coeffs[cos_idx], grid, Parity.COSINE)
    if sin_idx:
        out[sin_idx] = to_physical_parity(coeffs[sin_idx], grid, Parity.SINE)
    return out


class TruncatedTransform:
    """Transforms between physical fields and the compact dealiasing box.

    The box keeps ``|k1| <= K``, ``k2 <= K`` and ``k3 <= K3`` and is stored
    contiguously with shape ``(2K + 1, K + 1, K3 + 1)``; rows are ordered as
    ``k1 = 0..K, -K..-1``.  Working in the box cuts the cost of every
    spectral-space operation in the time stepper, whose states never leave it.
    Requires a dealiasing fraction below 1.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        f = Fraction(grid.dealias_fraction)
        self.K = (f.numerator * (grid.N_h // 2)) // f.denominator
        self.K3 = (f.numerator * grid.N3) // f.denominator
        if self.K >= grid.N_h // 2 or self.K3 >= grid.N3:
            raise ValueError("the compact box needs a dealiasing fraction below 1")
        n = grid.N_h
        self.rows = np.r_[0 : self.K + 1, n - self.K : n]
        self.shape = (2 * self.K + 1, self.K + 1, self.K3 + 1)
        self.xi1 = grid.xi1[self.rows]
        self.xi2 = grid.xi2[:, : self.K + 1]
        self.xi3 = grid.xi3[..., : self.K3 + 1]
        fwd_c, inv_c, fwd_s, inv_s = _vertical_scales(grid.N3)
        # compact slot s holds k3 = s; DCT index m is k3 = m, DST index m is k3 = m + 1
        self._inv_c = inv_c[: self.K3 + 1]
        self._fwd_c = fwd_c[: self.K3 + 1]
        self._inv_s = inv_s[: self.K3]
        self._fwd_s = fwd_s[: self.K3]
        self._buffers = {}

    def gather(self, full: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(full[..., self.rows, : self.K + 1, : self.K3 + 1])

    def scatter(self, compact: np.ndarray) -> np.ndarray:
        g = self.grid
        out = np.zeros(compact.shape[:-3] + g.spectral_shape, dtype=complex)
        out[..., self.rows, : self.K + 1, : self.K3 + 1] = compact
        return out

    def to_physical(self, compact: np.ndarray, parity: Parity) -> np.ndarray:
        g = self.grid
        n = g.N_h
        if parity is Parity.COSINE:
            v = compact * self._inv_c
        else:
            v = compact[..., 1:] * self._inv_s
        key = (compact.shape[:-3], parity)
        buf = self._buffers.get(key)
        if buf is None:
            # entries outside the box are never written, so they stay zero
            buf = np.zeros(compact.shape[:-3] + (n, n // 2 + 1, v.shape[-1]), dtype=complex)
            self._buffers[key] = buf
        buf[..., self.rows, : self.K + 1, :] = v
        h = sfft.irfftn(buf, s=(n, n), axes=(-3, -2), norm="forward")
        if parity is Parity.COSINE:
            return sfft.dct(h, type=3, n=g.N3, axis=-1, overwrite_x=True)
        return sfft.dst(h, type=3, n=g.N3, axis=-1, overwrite_x=True)

    def to_spectral(self, fields: np.ndarray, parity: Parity) -> np.ndarray:
        out = np.zeros(fields.shape[:-3] + self.shape, dtype=complex)
        if parity is Parity.COSINE:
            v = sfft.dct(fields, type=2, axis=-1)[..., : self.K3 + 1]
            scale, target = self._fwd_c, out
        else:
            v = sfft.dst(fields, type=2, axis=-1)[..., : self.K3]
            scale, target = self._fwd_s, out[..., 1:]
        h = sfft.rfftn(np.ascontiguousarray(v), axes=(-3, -2), norm="forward")
        np.multiply(h[..., self.rows, : self.K + 1, :], scale, out=target)
        return out


def forward_mixed(field: np.ndarray, parity: Parity, grid: GridSpec) -> SpectralScalar:
    field = np.asarray(field)
    if field.shape != grid.shape:
        raise ValueError(f"field shape {field.shape} does not match grid {grid.shape}")
    if np.iscomplexobj(field):
        raise TypeError("forward_mixed expects a real-valued field")
    return SpectralScalar(grid, parity, to_spectral_parity(field, grid, parity))


def hermitian_defect(s: SpectralScalar) -> float:
    """Largest violation of ``c(-k1, k2) = conj(c(k1, k2))`` on self-paired planes."""
    n = s.grid.N_h
    neg = (-np.arange(n)) % n
    worst = 0.0
    for col in (0, n // 2):
        plane = s.coeffs[:, col]
        worst = max(worst, float(np.abs(plane - np.conj(plane[neg])).max()))
    return worst


def inverse_mixed(s: SpectralScalar, rtol: float = 1e-12) -> np.ndarray:
    _check_parity_slots(s)
    scale = float(np.abs(s.coeffs).max(initial=0.0))
    if hermitian_defect(s) > rtol * scale:
        raise HermitianSymmetryError(
            "coefficients violate Hermitian symmetry; the field would not be real"
        )
    return to_physical_parity(s.coeffs, s.grid, s.parity)


def evaluate_at_height(s: SpectralScalar, x3: float, derivative: int = 0) -> np.ndarray:
    """Evaluate ``d^m/dx3^m`` of the vertical expansion at height ``x3``.

    Returns the horizontal field on the collocation grid.  At ``x3 = 0`` this
    is the boundary trace implied by the parity class.
    """
    g = s.grid
    xi3 = g.xi3[0, 0]
    phase = xi3 * x3 + derivative * np.pi / 2
    basis = np.cos(phase) if s.parity is Parity.COSINE else np.sin(phase)
    basis = basis * xi3**derivative
    column = (s.coeffs * basis).sum(axis=-1)
    n = g.N_h
    return sfft.irfftn(column, s=(n, n), axes=(0, 1), norm="forward")


# ---------------------------------------------------------------------------
# multipliers
# ---------------------------------------------------------------------------


def d_horizontal(s: SpectralScalar, axis: int) -> SpectralScalar:
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    g = s.grid
    xi = g.xi1 if axis == 1 else g.xi2
    # Odd derivatives of the Nyquist mode are not representable by a real field.
    mult = np.where(g.horizontal_nyquist, 0.0, 1j * xi)
    return s.with_coeffs(s.coeffs * mult)


def d_vertical(s: SpectralScalar) -> SpectralScalar:
    g = s.grid
    if s.parity is Parity.COSINE:
        out = -g.xi3 * s.coeffs
    else:
        out = g.xi3 * s.coeffs
        # cos(N3 pi x3 / L3) vanishes on every node: the derivative of the sine
        # Nyquist mode has no cosine-class representative.
        out[..., -1] = 0.0
    return s.with_coeffs(out, s.parity.flipped)


def lambda_h_pow(s: SpectralScalar, power: float, rtol: float = 1e-12) -> SpectralScalar:
    """Multiply by ``|xi_h|**power``; zero horizontal-mean modes unless ``power == 0``."""
    if power == 0:
        return s.with_coeffs(s.coeffs.copy())
    g = s.grid
    mean = g.horizontal_mean[..., 0]
    if power < 0:
        scale = float(np.abs(s.coeffs).max(initial=0.0))
        if np.abs(s.coeffs[mean]).max(initial=0.0) > rtol * scale:
            raise ValueError(
                "negative horizontal power of a field with horizontal-mean content"
            )
    with np.errstate(divide="ignore"):
        mult = np.where(g.horizontal_mean, 0.0, g.xi_h_abs ** float(power))
    return s.with_coeffs(s.coeffs * mult)


def dealias(s: SpectralScalar) -> SpectralScalar:
    return s.with_coeffs(s.coeffs * s.grid.dealias_mask)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def _weighted_sq(coeffs: np.ndarray, grid: GridSpec, parity: Parity) -> float:
    w = grid.hermitian_weight * grid.vertical_weight(parity)
    return float(grid.volume * np.sum(w * (coeffs.real**2 + coeffs.imag**2)))


def norm_sq(obj) -> float:
    if isinstance(obj, SpectralScalar):
        return _weighted_sq(obj.coeffs, obj.grid, obj.parity)
    if isinstance(obj, MixedSpectralState):
        return sum(_weighted_sq(obj.data[i], obj.grid, p) for i, p in enumerate(COMPONENT_PARITY))
    raise TypeError(f"cannot take the norm of {type(obj).__name__}")


def norm_l2(obj) -> float:
    """L2 norm over the truncated slab; equals the rectangle rule on the nodes."""
    return float(np.sqrt(norm_sq(obj)))


def _multi_indices(order: int, flavor: str):
    if flavor == "full":
        return [(a, b, order - a - b) for a in range(order + 1) for b in range(order + 1 - a)]
    if flavor == "horizontal":
        return [(a, order - a, 0) for a in range(order + 1)]
    if flavor == "vertical":
        return [(0, 0, order)]
    raise ValueError(f"unknown Sobolev flavor {flavor!r}")


def _sobolev_sq_scalar(
    coeffs: np.ndarray, grid: GridSpec, parity: Parity, s: int, flavor: str, extra=None
):
    g = grid
    amp = g.hermitian_weight * (coeffs.real**2 + coeffs.imag**2)
    if extra is not None:
        amp = amp * extra
    x1, x2, x3 = g.xi1**2, g.xi2**2, g.xi3**2
    # Odd horizontal derivative orders drop the Nyquist planes, as d_horizontal does.
    nyq = g.horizontal_nyquist
    total = 0.0
    for order in range(s + 1):
        for a, b, c in _multi_indices(order, flavor):
            mult = x1**a * x2**b * x3**c
            if a % 2 or b % 2:
                mult = np.where(nyq, 0.0, mult)
            p = parity if c % 2 == 0 else parity.flipped
            total += float(np.sum(amp * mult * g.vertical_weight(p)))
    return g.volume * total


def sobolev_norm(obj, s: int, flavor: str = "full", of_grad_h: bool = False) -> float:
    """``(sum_{|alpha| <= s} ||d^alpha f||^2)^(1/2)`` with alpha restricted by flavor.

    With ``of_grad_h`` the norm is taken of ``grad_h f`` instead of ``f``.
    """
    if not 0 <= s <= 3:
        raise ValueError("Sobolev order must be between 0 and 3")
    if isinstance(obj, (SpectralScalar, MixedSpectralState)):
        g = obj.grid
        extra = np.where(g.horizontal_nyquist, 0.0, g.xi_h_sq) if of_grad_h else None
    if isinstance(obj, SpectralScalar):
        return float(np.sqrt(_sobolev_sq_scalar(obj.coeffs, g, obj.parity, s, flavor, extra)))
    if isinstance(obj, MixedSpectralState):
        sq = sum(
            _sobolev_sq_scalar(obj.data[i], g, p, s, flavor, extra)
            for i, p in enumerate(COMPONENT_PARITY)
        )
        return float(np.sqrt(sq))
    raise TypeError(f"cannot take the norm of {type(obj).__name__}")
