import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halfspace_boussinesq.decay_analysis import energy_functional, h3_energy_terms
from halfspace_boussinesq.harness.acceptance import linear_energy_defect
from halfspace_boussinesq.harness.initial_data import InitialDataSpec, generate_initial_data
from halfspace_boussinesq.linear_propagator import (
    PropagatorCache,
    apply_semigroup,
    exprel,
    generator,
    mode_factors,
    pressure_linear,
    propagate_modes,
    semigroup_oracle,
    sinc,
    unrepresented_content,
)
from halfspace_boussinesq.spectral_core import (
    MixedSpectralState,
    Parity,
    SpectralScalar,
    build_grid,
)

finite = dict(allow_nan=False, allow_infinity=False)


def divergence_consistent(xi, rng):
    """Random (u1, u2, u3, theta) with i xi_h . u_h + xi3 u3 = 0."""
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    xi1, xi2, xi3 = xi
    r2 = xi1**2 + xi2**2
    if r2 > 0:
        # fix the horizontal part along xi_h to cancel xi3 u3
        along = 1j * xi3 * v[2] / r2
        perp = v[0] * xi2 - v[1] * xi1
        v[0] = along * xi1 + perp * xi2 / r2
        v[1] = along * xi2 - perp * xi1 / r2
    else:
        v[2] = 0.0
    return v


class TestScalarHelpers:
    def test_sinc_taylor_branch_matches_series(self):
        x = np.array([1e-8, 5e-5, 9.9e-5])
        np.testing.assert_allclose(sinc(x), 1 - x**2 / 6 + x**4 / 120, rtol=1e-16)

    def test_sinc_continuous_at_cutoff(self):
        below, above = sinc(np.nextafter(1e-4, 0)), sinc(1e-4)
        assert below == pytest.approx(above, rel=1e-15)

    def test_exprel(self):
        x = np.array([-3.0, -1e-9, 0.0, 2e-6, 1.5])
        ref = np.where(x == 0, 1.0, np.expm1(x) / np.where(x == 0, 1.0, x))
        np.testing.assert_allclose(exprel(x), ref, rtol=1e-12)


class TestGenerator:
    def test_pure_horizontal_wavevector(self):
        A = generator((1.0, 0.0, 0.0))
        np.testing.assert_allclose(np.diag(A), [-1, -1, -1, -1])
        assert A[2, 3] == 1.0 and A[3, 2] == -1.0
        assert A[0, 3] == 0.0 and A[1, 3] == 0.0

    def test_pure_vertical_wavevector(self):
        A = generator((0.0, 0.0, 1.0))
        np.testing.assert_array_equal(np.diag(A), 0.0)
        assert A[2, 3] == 0.0 and A[3, 2] == -1.0 and A[0, 3] == 0.0

    def test_eigenvalues_at_unit_diagonal(self):
        eig = np.linalg.eigvals(generator((1.0, 1.0, 1.0)))
        eig = eig[np.argsort(eig.imag)]
        w = math.sqrt(2.0 / 3.0)
        np.testing.assert_allclose(eig, [-2 - 1j * w, -2, -2, -2 + 1j * w], atol=1e-14)

    def test_zero_wavevector_rejected(self):
        with pytest.raises(ValueError):
            generator((0.0, 0.0, 0.0))


class TestOracle:
    def test_time_zero(self):
        v = np.array([1, 2j, 3, -1])
        np.testing.assert_allclose(semigroup_oracle((0.3, 0.2, 1.0), 0.0, v), v)

    def test_decoupled_heat_mode(self):
        for t in (0.5, 2.0):
            out = semigroup_oracle((1.0, 0.0, 0.0), t, [1, 0, 0, 0])
            np.testing.assert_allclose(out, [math.exp(-t), 0, 0, 0], atol=1e-15)

    def test_vertical_wavevector_secular_growth(self):
        # no horizontal frequency: theta' = -u3 with u3 frozen
        for t in (0.0, 1.0, 3.5):
            out = propagate_modes(np.array([0.0, 0.0, 1.0]), t, np.array([0, 0, 1, 0], complex))
            np.testing.assert_allclose(out, [0, 0, 1, -t], atol=1e-15)

    def test_negative_time(self):
        with pytest.raises(ValueError):
            semigroup_oracle((1, 0, 0), -1.0, np.zeros(4))


class TestClosedForm:
    @given(
        xi=st.tuples(*[st.floats(-30, 30, **finite)] * 3),
        t=st.floats(0, 10, **finite),
        seed=st.integers(0, 2**31),
        diff=st.sampled_from([(1.0, 1.0), (1.0, 0.3), (0.2, 2.0)]),
    )
    @settings(max_examples=200, deadline=None)
    def test_matches_matrix_exponential(self, xi, t, seed, diff):
        xi = np.where(np.abs(xi) < 1e-3, 0.0, xi)
        if not xi.any():
            xi = xi + np.array([0.0, 0.0, 1.0])
        v = divergence_consistent(xi, np.random.default_rng(seed))
        v /= np.linalg.norm(v)
        nu, kappa = diff
        ours = propagate_modes(xi, t, v, nu, kappa)
        ref = semigroup_oracle(xi, t, v, nu, kappa)
        assert np.abs(ours - ref).max() <= 1e-10

    def test_stiff_overdamped_mode_is_finite(self):
        # |xi_h|^2 t large and unequal diffusivities: must not overflow
        xi = np.array([40.0, 0.0, 3.0])
        v = divergence_consistent(xi, np.random.default_rng(1))
        out = propagate_modes(xi, 50.0, v, 1.0, 1e-5)
        ref = semigroup_oracle(xi, 50.0, v, 1.0, 1e-5)
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, ref, atol=1e-14)

    def test_equal_diffusivity_factors(self):
        # with nu == kappa, the (u3, u3) factor is E cos(omega t)
        r2, k2, t = np.array([2.0]), np.array([3.0]), 1.7
        f = mode_factors(r2, k2, t)
        w = math.sqrt(2.0 / 3.0)
        assert f.uu[0] == pytest.approx(math.exp(-2 * t) * math.cos(w * t), rel=1e-14)


class TestPropagatorCache:
    def test_invariants(self, grid16):
        c = PropagatorCache(grid16)
        assert np.all((c.lambda1 == 0) == grid16.horizontal_mean)
        assert c.omega.min() >= 0 and c.omega.max() <= 1
        omega = np.broadcast_to(c.omega, grid16.spectral_shape)
        mean = np.broadcast_to(grid16.horizontal_mean, grid16.spectral_shape)
        assert np.all((omega == 0) == mean)

    def test_negative_parameters(self, grid8):
        with pytest.raises(ValueError):
            PropagatorCache(grid8, nu=-1.0)

    def test_negative_time(self, grid8):
        with pytest.raises(ValueError):
            PropagatorCache(grid8).factors(-0.1)


class TestApplySemigroup:
    def test_identity_at_zero(self, smooth_state):
        out = apply_semigroup(smooth_state, 0.0)
        np.testing.assert_allclose(out.data, smooth_state.data, atol=1e-18)

    def test_heat_only_data(self, grid16):
        s0 = generate_initial_data(InitialDataSpec(components=("u_h",), rng_seed=2), grid16)
        assert np.abs(s0.data[2:]).max() == 0.0
        t = 0.8
        out = apply_semigroup(s0, t)
        expected = s0.data[:2] * np.exp(-grid16.xi_h_sq * t)
        np.testing.assert_allclose(out.data[:2], expected, atol=1e-18)
        assert np.abs(out.data[2:]).max() == 0.0

    def test_semigroup_property(self, smooth_state):
        cache = PropagatorCache(smooth_state.grid)
        a = apply_semigroup(smooth_state, 1.3, cache).data
        b = apply_semigroup(apply_semigroup(smooth_state, 0.4, cache), 0.9, cache).data
        np.testing.assert_allclose(a, b, atol=1e-12 * np.abs(smooth_state.data).max())

    def test_preserves_divergence(self, smooth_state):
        for t in (0.1, 1.0, 10.0):
            assert apply_semigroup(smooth_state, t).divergence_residual() <= 1e-13

    def test_rejects_negative_time(self, smooth_state):
        with pytest.raises(ValueError):
            apply_semigroup(smooth_state, -1.0)

    def test_rejects_unrepresented_content(self, grid8):
        s = MixedSpectralState.zeros(grid8)
        d = s.data.copy()
        d[3, 0, 0, -1] = 1.0
        bad = s.with_data(d)
        assert unrepresented_content(bad) == 1.0
        with pytest.raises(ValueError):
            apply_semigroup(bad, 0.1)

    def test_mismatched_cache(self, smooth_state, grid8):
        with pytest.raises(ValueError):
            apply_semigroup(smooth_state, 0.1, PropagatorCache(grid8))

    def test_linear_energy_identity(self, smooth_state):
        assert linear_energy_defect(smooth_state, T=2.0, panels=20, nodes=8) <= 1e-10

    def test_h3_energy_functional_tracks_dissipation(self, grid8):
        # each Fourier mode obeys its own energy identity, so the H^3 version holds too
        s0 = generate_initial_data(InitialDataSpec(k0=1.0, rng_seed=3), grid8)
        cache = PropagatorCache(grid8)
        t = np.linspace(0.0, 1.0, 4001)
        terms = np.array([h3_energy_terms(apply_semigroup(s0, s, cache)) for s in t])
        E = energy_functional(t, terms[:, 0], terms[:, 1])
        lost = terms[0, 0] - terms[:, 0]
        assert np.abs((E - E[0]) - lost).max() <= 1e-6 * terms[0, 0]


class TestPressureLinear:
    def test_zero(self, grid8):
        out = pressure_linear(SpectralScalar.zeros(grid8, Parity.SINE))
        assert out.parity is Parity.COSINE and not np.any(out.coeffs)

    def test_single_mode(self, grid8):
        c = np.zeros(grid8.spectral_shape, complex)
        c[1, 0, 1] = 1.0
        out = pressure_linear(SpectralScalar(grid8, Parity.SINE, c))
        assert out.coeffs[1, 0, 1] == pytest.approx(-0.5)

    def test_parity_checked(self, grid8):
        with pytest.raises(ValueError):
            pressure_linear(SpectralScalar.zeros(grid8, Parity.COSINE))


def test_unequal_diffusivity_grid_matches_modes():
    g = build_grid(2 * math.pi, 8, math.pi, 8)
    s0 = generate_initial_data(InitialDataSpec(amplitude=1.0, rng_seed=4), g, nu=1.0, kappa=0.25)
    out = apply_semigroup(s0, 1.5)
    k = (2, 1, 3)
    xi = np.array([g.xi1[k[0], 0, 0], g.xi2[0, k[1], 0], g.xi3[0, 0, k[2]]])
    ref = semigroup_oracle(xi, 1.5, s0.data[(slice(None),) + k], 1.0, 0.25)
    np.testing.assert_allclose(out.data[(slice(None),) + k], ref, atol=1e-14)
