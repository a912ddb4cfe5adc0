import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halfspace_boussinesq.spectral_core import (
    HermitianSymmetryError,
    MixedSpectralState,
    Parity,
    PhysicalState,
    SpectralScalar,
    TruncatedTransform,
    build_grid,
    d_horizontal,
    d_vertical,
    dealias,
    evaluate_at_height,
    forward_mixed,
    hermitian_defect,
    inverse_mixed,
    lambda_h_pow,
    norm_l2,
    norm_sq,
    sobolev_norm,
)

PARITIES = [Parity.COSINE, Parity.SINE]


def brute_coefficients(field, grid, parity):
    """Direct summation of the mixed transform, O(N^6)."""
    n, n3 = grid.N_h, grid.N3
    x1, x2, x3 = grid.mesh()
    out = np.zeros(grid.spectral_shape, dtype=complex)
    k3_range = range(n3) if parity is Parity.COSINE else range(1, n3 + 1)
    basis_fn = np.cos if parity is Parity.COSINE else np.sin
    for k1 in range(n):
        s1 = k1 if k1 < n // 2 else k1 - n
        for k2 in range(n // 2 + 1):
            phase = np.exp(-1j * 2 * np.pi / grid.L_h * (s1 * x1 + k2 * x2))
            for k3 in k3_range:
                b = basis_fn(np.pi * k3 / grid.L3 * x3)
                w = 1.0 if k3 in (0, n3) else 2.0
                out[k1, k2, k3] = w * np.sum(field * phase * b) / (n * n * n3)
    return out


def random_scalar_field(grid, seed):
    return np.random.default_rng(seed).standard_normal(grid.shape)


class TestBuildGrid:
    def test_wavenumber_tables(self):
        g = build_grid(2 * math.pi, 8, math.pi, 8, Fraction(2, 3))
        np.testing.assert_array_equal(g.xi_h_values, np.arange(-4, 4))
        np.testing.assert_array_equal(g.xi3_cosine, np.arange(0, 8))
        np.testing.assert_array_equal(g.xi3_sine, np.arange(1, 9))

    @pytest.mark.parametrize("n_h, n3", [(7, 8), (8, 12), (4, 8)])
    def test_rejects_bad_sizes(self, n_h, n3):
        with pytest.raises(ValueError):
            build_grid(2 * math.pi, n_h, math.pi, n3)

    def test_smallest_horizontal_wavenumber(self):
        g = build_grid(4 * math.pi, 16, 2 * math.pi, 16)
        nonzero = np.abs(g.xi_h_values[g.xi_h_values != 0])
        assert nonzero.min() == pytest.approx(0.5)

    @pytest.mark.parametrize("kwargs", [dict(L_h=-1.0), dict(L3=0.0), dict(dealias_fraction=0)])
    def test_rejects_bad_parameters(self, kwargs):
        args = dict(L_h=2 * math.pi, N_h=8, L3=math.pi, N3=8, dealias_fraction="2/3")
        args.update(kwargs)
        with pytest.raises(ValueError):
            build_grid(**args)

    def test_half_sample_nodes(self, grid8):
        np.testing.assert_allclose(grid8.x3, (np.arange(8) + 0.5) * math.pi / 8)


class TestForwardMixed:
    def test_single_cosine_mode(self, grid8):
        x1, _, x3 = grid8.mesh()
        s = forward_mixed(np.cos(x1) * np.cos(np.pi * x3 / grid8.L3), Parity.COSINE, grid8)
        big = np.argwhere(np.abs(s.coeffs) > 1e-12)
        assert {tuple(i) for i in big} == {(1, 0, 1), (7, 0, 1)}
        assert s.coeffs[1, 0, 1] == pytest.approx(0.5)
        assert s.coeffs[7, 0, 1] == pytest.approx(0.5)

    def test_zero_field(self, grid8):
        s = forward_mixed(np.zeros(grid8.shape), Parity.SINE, grid8)
        assert not np.any(s.coeffs)

    @pytest.mark.parametrize("parity", PARITIES)
    def test_matches_direct_summation(self, grid8, parity):
        f = random_scalar_field(grid8, 11)
        s = forward_mixed(f, parity, grid8)
        np.testing.assert_allclose(s.coeffs, brute_coefficients(f, grid8, parity), atol=1e-13)
        assert hermitian_defect(s) <= 1e-13

    def test_rejects_complex_and_misshaped(self, grid8):
        with pytest.raises(TypeError):
            forward_mixed(np.zeros(grid8.shape, complex), Parity.COSINE, grid8)
        with pytest.raises(ValueError):
            forward_mixed(np.zeros((8, 8, 4)), Parity.COSINE, grid8)


class TestInverseMixed:
    @pytest.mark.parametrize("parity", PARITIES)
    def test_round_trip(self, grid16, parity):
        f = random_scalar_field(grid16, 3)
        back = inverse_mixed(forward_mixed(f, parity, grid16))
        assert np.abs(back - f).max() <= 1e-12 * np.abs(f).max()

    def test_sine_basis_function(self, grid8):
        s = SpectralScalar.zeros(grid8, Parity.SINE)
        c = s.coeffs.copy()
        c[1, 0, 2] = 1.0
        c[-1, 0, 2] = 1.0
        f = inverse_mixed(s.with_coeffs(c))
        x1, _, x3 = grid8.mesh()
        np.testing.assert_allclose(f, 2 * np.cos(x1) * np.sin(2 * np.pi * x3 / grid8.L3), atol=1e-14)
        assert np.isrealobj(f)

    def test_broken_symmetry_raises(self, grid8):
        c = np.zeros(grid8.spectral_shape, complex)
        c[1, 0, 1] = 1.0
        with pytest.raises(HermitianSymmetryError):
            inverse_mixed(SpectralScalar(grid8, Parity.COSINE, c))

    def test_forbidden_slot_raises(self, grid8):
        c = np.zeros(grid8.spectral_shape, complex)
        c[0, 0, 0] = 1.0
        with pytest.raises(ValueError):
            inverse_mixed(SpectralScalar(grid8, Parity.SINE, c))


class TestDerivatives:
    def test_horizontal_derivative_of_unit_mode(self, grid8):
        c = np.zeros(grid8.spectral_shape, complex)
        c[1, 0, 1] = 1.0
        out = d_horizontal(SpectralScalar(grid8, Parity.COSINE, c), 1)
        assert out.coeffs[1, 0, 1] == pytest.approx(1j)

    def test_horizontal_mean_is_annihilated(self, grid8):
        c = np.zeros(grid8.spectral_shape, complex)
        c[0, 0, 3] = 1.0
        s = SpectralScalar(grid8, Parity.SINE, c)
        assert not np.any(d_horizontal(s, 1).coeffs)
        assert not np.any(d_horizontal(s, 2).coeffs)

    def test_bad_axis(self, grid8):
        with pytest.raises(ValueError):
            d_horizontal(SpectralScalar.zeros(grid8, Parity.COSINE), 3)

    def test_vertical_derivative_of_cosine(self, grid8):
        x3 = grid8.mesh()[2]
        k = np.pi / grid8.L3
        s = forward_mixed(np.cos(k * x3), Parity.COSINE, grid8)
        d = d_vertical(s)
        assert d.parity is Parity.SINE
        np.testing.assert_allclose(inverse_mixed(d), -k * np.sin(k * x3), atol=1e-13)

    def test_vertical_derivative_of_sine(self, grid8):
        x3 = grid8.mesh()[2]
        k = 2 * np.pi / grid8.L3
        d = d_vertical(forward_mixed(np.sin(k * x3), Parity.SINE, grid8))
        assert d.parity is Parity.COSINE
        np.testing.assert_allclose(inverse_mixed(d), k * np.cos(k * x3), atol=1e-12)

    @pytest.mark.parametrize("parity", PARITIES)
    def test_second_derivative_is_minus_xi3_squared(self, grid8, parity):
        f = random_scalar_field(grid8, 4)
        s = forward_mixed(f, parity, grid8)
        c = s.coeffs.copy()
        c[..., -1] = 0.0
        s = s.with_coeffs(c)
        dd = d_vertical(d_vertical(s))
        assert dd.parity is parity
        np.testing.assert_allclose(dd.coeffs, -(grid8.xi3**2) * s.coeffs, atol=1e-14)


class TestLambda:
    def _mean_free(self, grid, seed):
        s = forward_mixed(random_scalar_field(grid, seed), Parity.COSINE, grid)
        return s.with_coeffs(np.where(grid.horizontal_mean, 0.0, s.coeffs))

    def test_zero_power_is_identity(self, grid8):
        s = forward_mixed(random_scalar_field(grid8, 1), Parity.COSINE, grid8)
        np.testing.assert_array_equal(lambda_h_pow(s, 0).coeffs, s.coeffs)

    def test_unit_wavenumber_unchanged(self, grid8):
        c = np.zeros(grid8.spectral_shape, complex)
        c[0, 1, 2] = 0.7
        out = lambda_h_pow(SpectralScalar(grid8, Parity.SINE, c), -0.95)
        assert out.coeffs[0, 1, 2] == pytest.approx(0.7)

    def test_negative_power_with_mean_content_raises(self, grid8):
        c = np.zeros(grid8.spectral_shape, complex)
        c[0, 0, 1] = 1.0
        with pytest.raises(ValueError):
            lambda_h_pow(SpectralScalar(grid8, Parity.SINE, c), -0.5)

    def test_power_two_is_minus_horizontal_laplacian(self, grid8):
        s = self._mean_free(grid8, 2)
        lap = d_horizontal(d_horizontal(s, 1), 1).coeffs + d_horizontal(d_horizontal(s, 2), 2).coeffs
        inner = ~grid8.horizontal_nyquist
        np.testing.assert_allclose((lambda_h_pow(s, 2).coeffs)[np.broadcast_to(inner, lap.shape)],
                                   -lap[np.broadcast_to(inner, lap.shape)], atol=1e-13)

    @given(a=st.floats(-2, 2), b=st.floats(-2, 2))
    @settings(max_examples=40, deadline=None)
    def test_composition(self, a, b):
        g = build_grid(2 * math.pi, 8, math.pi, 8)
        s = self._mean_free(g, 9)
        lhs = lambda_h_pow(lambda_h_pow(s, a), b).coeffs
        rhs = lambda_h_pow(s, a + b).coeffs
        scale = np.abs(rhs).max()
        assert np.abs(lhs - rhs).max() <= 1e-13 * max(scale, 1.0)


class TestNorms:
    def test_zero(self, grid8):
        assert norm_l2(SpectralScalar.zeros(grid8, Parity.COSINE)) == 0.0
        assert norm_l2(MixedSpectralState.zeros(grid8)) == 0.0

    def test_single_mode_closed_form(self, grid8):
        # c = 1 at (k1, k2, k3) = (0, 1, 1) is the field 2 cos(x2) cos(x3)
        c = np.zeros(grid8.spectral_shape, complex)
        c[0, 1, 1] = 1.0
        s = SpectralScalar(grid8, Parity.COSINE, c)
        f = inverse_mixed(s)
        quad = grid8.volume * np.mean(f**2)
        assert norm_sq(s) == pytest.approx(quad, rel=1e-14)
        assert norm_sq(s) == pytest.approx(grid8.volume, rel=1e-14)

    @pytest.mark.parametrize("parity", PARITIES)
    def test_parseval(self, grid16, parity):
        f = random_scalar_field(grid16, 8)
        s = forward_mixed(f, parity, grid16)
        quad = grid16.volume * np.mean(f**2)
        assert norm_sq(s) == pytest.approx(quad, rel=1e-12)

    def test_sobolev_order_zero_is_l2(self, smooth_state):
        assert sobolev_norm(smooth_state, 0) == pytest.approx(norm_l2(smooth_state), rel=1e-14)

    def test_single_mode_h1(self, grid8):
        # xi = (1, 0, 1): |alpha| <= 1 multipliers sum to 1 + 1 + 1
        c = np.zeros(grid8.spectral_shape, complex)
        c[1, 0, 1] = c[-1, 0, 1] = 1.0
        s = SpectralScalar(grid8, Parity.COSINE, c)
        assert sobolev_norm(s, 1) ** 2 == pytest.approx(3 * norm_sq(s), rel=1e-14)

    def test_flavors(self, grid8):
        c = np.zeros(grid8.spectral_shape, complex)
        c[0, 2, 1] = 1.0
        s = SpectralScalar(grid8, Parity.SINE, c)
        n0 = norm_sq(s)
        assert sobolev_norm(s, 1, "horizontal") ** 2 == pytest.approx(5 * n0)
        assert sobolev_norm(s, 1, "vertical") ** 2 == pytest.approx(2 * n0)
        assert sobolev_norm(s, 1, of_grad_h=True) ** 2 == pytest.approx(4 * 6 * n0)
        with pytest.raises(ValueError):
            sobolev_norm(s, 1, "diagonal")
        with pytest.raises(ValueError):
            sobolev_norm(s, 4)

    def test_norm_ordering(self, smooth_state):
        assert sobolev_norm(smooth_state, 3) >= norm_l2(smooth_state)
        assert sobolev_norm(smooth_state, 0, of_grad_h=True) <= sobolev_norm(
            smooth_state, 1, "horizontal"
        )


class TestDealias:
    def test_fraction_one_is_identity(self):
        g = build_grid(2 * math.pi, 8, math.pi, 8, 1)
        s = forward_mixed(random_scalar_field(g, 5), Parity.COSINE, g)
        np.testing.assert_array_equal(dealias(s).coeffs, s.coeffs)

    def test_two_thirds_on_eight_points(self, grid8):
        m = grid8.dealias_mask
        kept_k1 = sorted(set(grid8.k1[m.any(axis=(1, 2))]))
        assert kept_k1 == [-2, -1, 0, 1, 2]
        assert list(grid8.k2[m.any(axis=(0, 2))]) == [0, 1, 2]
        # vertical: k3 <= floor(2/3 * 8) = 5
        assert list(grid8.k3[m.any(axis=(0, 1))]) == [0, 1, 2, 3, 4, 5]

    def test_idempotent(self, grid16):
        s = forward_mixed(random_scalar_field(grid16, 6), Parity.SINE, grid16)
        once = dealias(s)
        np.testing.assert_array_equal(dealias(once).coeffs, once.coeffs)


class TestStates:
    def test_physical_round_trip(self, smooth_state):
        phys = PhysicalState.from_spectral(smooth_state)
        back = phys.to_spectral()
        np.testing.assert_allclose(back.data, smooth_state.data, atol=1e-16)

    def test_divergence_free_initial_data(self, smooth_state):
        assert smooth_state.divergence_residual() <= 1e-14
        assert smooth_state.horizontal_mean_content() == 0.0

    def test_component_parity_checked(self, grid8):
        c = SpectralScalar.zeros(grid8, Parity.COSINE)
        with pytest.raises(ValueError):
            MixedSpectralState.from_components(c, c, c, c)

    def test_extension_parities(self, smooth_state):
        ext = PhysicalState.from_spectral(smooth_state).extended()
        np.testing.assert_allclose(ext.u1, ext.u1[..., ::-1])
        np.testing.assert_allclose(ext.theta, -ext.theta[..., ::-1])

    def test_boundary_traces(self, smooth_state):
        scale = np.abs(PhysicalState.from_spectral(smooth_state).u1).max()
        assert np.abs(evaluate_at_height(smooth_state.u3, 0.0)).max() <= 1e-15 * max(scale, 1)
        assert np.abs(evaluate_at_height(smooth_state.u1, 0.0, derivative=1)).max() <= 1e-15

    def test_constant_cosine_has_zero_slope_at_wall(self, grid8):
        c = np.zeros(grid8.spectral_shape, complex)
        c[0, 1, 0] = 1.0
        s = SpectralScalar(grid8, Parity.COSINE, c)
        assert np.all(evaluate_at_height(s, 0.0, derivative=1) == 0.0)


class TestTruncatedTransform:
    @pytest.mark.parametrize("parity", PARITIES)
    def test_matches_full_transform_in_box(self, grid16, parity):
        tt = TruncatedTransform(grid16)
        f = random_scalar_field(grid16, 12)
        full = forward_mixed(f, parity, grid16).coeffs
        box = tt.to_spectral(f, parity)
        np.testing.assert_allclose(box, tt.gather(full * grid16.dealias_mask), atol=1e-15)
        back = tt.to_physical(box, parity)
        ref = inverse_mixed(SpectralScalar(grid16, parity, full * grid16.dealias_mask))
        np.testing.assert_allclose(back, ref, atol=1e-14)

    def test_requires_truncation(self):
        with pytest.raises(ValueError):
            TruncatedTransform(build_grid(2 * math.pi, 8, math.pi, 8, 1))


@given(seed=st.integers(0, 2**32 - 1), parity=st.sampled_from(PARITIES),
       n_h=st.sampled_from([8, 16]), n3=st.sampled_from([8, 16]))
@settings(max_examples=30, deadline=None)
def test_round_trip_and_reality_property(seed, parity, n_h, n3):
    g = build_grid(2 * math.pi, n_h, 1.7, n3)
    f = random_scalar_field(g, seed)
    s = forward_mixed(f, parity, g)
    assert hermitian_defect(s) <= 1e-13 * np.abs(s.coeffs).max()
    back = inverse_mixed(s)
    assert np.abs(back - f).max() <= 1e-12 * np.abs(f).max()
    assert norm_sq(s) == pytest.approx(g.volume * np.mean(f**2), rel=1e-12)
