import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from dwrls.errors import InputError
from dwrls.harmonics import (BandLimited, HarmonicIndex, dim_harmonic, dim_polynomials,
                             eval_bandlimited, eval_real_sph_harmonics, legendre,
                             legendre_all, legendre_series, sph_harmonics_matrix,
                             sphere_volume)

from conftest import random_sphere


def gegenbauer_normalized(k, d, t):
    """Independent oracle: Gegenbauer C_k^{(d-1)/2} scaled to 1 at t = 1."""
    if d == 1:
        return np.cos(k * np.arccos(t))
    lam = (d - 1) / 2.0
    return special.eval_gegenbauer(k, lam, t) / special.eval_gegenbauer(k, lam, 1.0)


def monomial_harmonic_dim(k, d):
    """dim of harmonic polynomials of degree k in d+1 variables, by counting."""
    def count(deg, nvars):
        return sum(1 for c in itertools.product(range(deg + 1), repeat=nvars) if sum(c) == deg)
    return count(k, d + 1) - (count(k - 2, d + 1) if k >= 2 else 0)


class TestDimensions:
    def test_examples(self):
        assert dim_harmonic(0, 2) == 1
        assert dim_harmonic(1, 2) == 3
        assert sum(dim_harmonic(k, 2) for k in range(46)) == 2116 == 46**2

    @pytest.mark.parametrize("k,d", [(k, d) for k in range(7) for d in range(1, 4)])
    def test_matches_monomial_count(self, k, d):
        assert dim_harmonic(k, d) == monomial_harmonic_dim(k, d)

    def test_polynomial_dimension_on_s2(self):
        assert dim_polynomials(12, 2) == 169

    def test_overflow_is_an_error(self):
        with pytest.raises(OverflowError):
            dim_harmonic(10**6, 40)

    def test_invalid(self):
        with pytest.raises(InputError):
            dim_harmonic(-1, 2)
        with pytest.raises(InputError):
            dim_harmonic(1, 0)

    def test_sphere_volume(self):
        assert sphere_volume(2) == pytest.approx(4 * math.pi)
        assert sphere_volume(1) == pytest.approx(2 * math.pi)
        assert sphere_volume(3) == pytest.approx(2 * math.pi**2)


class TestLegendre:
    def test_examples(self):
        for k, d in [(0, 2), (5, 2), (9, 3), (13, 4)]:
            assert legendre(k, d, 1.0) == pytest.approx(1.0, abs=1e-14)
        assert legendre(2, 2, 0.0) == -0.5
        v = legendre(7, 4, 0.3)
        assert abs(v) <= 1
        assert v == pytest.approx(gegenbauer_normalized(7, 4, 0.3), abs=1e-14)

    @pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
    def test_against_gegenbauer(self, d):
        t = np.linspace(-1, 1, 201)
        P = legendre_all(30, d, t)
        for k in (0, 1, 2, 7, 18, 30):
            assert np.allclose(P[k], gegenbauer_normalized(k, d, t), atol=1e-12)

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_bounded(self, d):
        P = legendre_all(60, d, np.linspace(-1, 1, 1001))
        assert np.max(np.abs(P)) <= 1 + 1e-12

    def test_clamps_with_warning(self):
        with pytest.warns(RuntimeWarning):
            assert legendre(3, 2, 1.5) == pytest.approx(1.0)

    @given(st.lists(st.floats(-2, 2), min_size=1, max_size=25), st.integers(1, 5))
    def test_series_equals_direct_sum(self, coeffs, d):
        t = np.linspace(-1, 1, 33)
        direct = np.asarray(coeffs) @ legendre_all(len(coeffs) - 1, d, t)
        assert np.allclose(legendre_series(coeffs, d, t), direct, atol=1e-12)


class TestRealHarmonics:
    def test_constant_harmonic(self):
        Y = sph_harmonics_matrix(random_sphere(10), 0)
        assert np.allclose(Y, 1 / math.sqrt(4 * math.pi))

    def test_against_scipy_complex_harmonics(self):
        x = random_sphere(25, 3)
        Y = sph_harmonics_matrix(x, 6)
        theta = np.arccos(x[:, 2])
        phi = np.arctan2(x[:, 1], x[:, 0])
        for k in range(7):
            for m in range(-k, k + 1):
                # scipy includes the Condon-Shortley phase; undo it
                Z = special.sph_harm_y(k, abs(m), theta, phi) * (-1) ** abs(m)
                if m == 0:
                    ref = Z.real
                elif m > 0:
                    ref = math.sqrt(2) * Z.real
                else:
                    ref = math.sqrt(2) * Z.imag
                col = k * k + m + k
                assert np.allclose(Y[:, col], ref, atol=1e-12), (k, m)

    def test_addition_formula_diagonal(self):
        y = eval_real_sph_harmonics([0.3, -0.2, 0.9], 3)
        for k in range(4):
            assert np.sum(y[k * k:(k + 1) ** 2] ** 2) == pytest.approx((2 * k + 1) / (4 * math.pi))

    def test_addition_formula_pairs(self):
        x, y = random_sphere(20, 1), random_sphere(20, 2)
        Yx, Yy = sph_harmonics_matrix(x, 10), sph_harmonics_matrix(y, 10)
        t = np.sum(x * y, axis=1)
        for k in range(11):
            sl = slice(k * k, (k + 1) ** 2)
            lhs = np.sum(Yx[:, sl] * Yy[:, sl], axis=1)
            rhs = (2 * k + 1) / (4 * math.pi) * legendre(k, 2, t)
            assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_gram_over_design_is_identity(self, design_points):
        Y = sph_harmonics_matrix(design_points.coords, 22)
        G = (4 * math.pi / len(design_points)) * Y.T @ Y
        assert np.max(np.abs(G - np.eye(G.shape[0]))) < 1e-8

    def test_s2_only(self):
        with pytest.raises(InputError):
            sph_harmonics_matrix(random_sphere(3, d=3), 2)

    def test_high_degree_stays_finite(self):
        Y = sph_harmonics_matrix(np.array([[0, 0, 1.0], [1, 0, 0]]), 120)
        assert np.all(np.isfinite(Y))
        # at the pole only the zonal harmonics survive
        zonal = [k * k + k for k in range(121)]
        assert np.allclose(np.delete(Y[0], zonal), 0)
        assert np.allclose(Y[0, zonal], np.sqrt((2 * np.arange(121) + 1) / (4 * math.pi)))


class TestBandLimited:
    def test_examples(self):
        x = random_sphere(5)
        assert np.array_equal(eval_bandlimited(BandLimited(2, 3, {}), x), np.zeros(5))
        one = BandLimited(2, 0, {(0, 1): math.sqrt(4 * math.pi)})
        assert np.allclose(one(x), 1.0)

    def test_unit_norm_by_quadrature(self, design_points):
        f = BandLimited(2, 2, {HarmonicIndex(2, 1): 1.0})
        v = f(design_points.coords)
        assert (4 * math.pi / len(design_points)) * np.sum(v * v) == pytest.approx(1, abs=1e-12)

    def test_scalar_evaluation(self):
        f = BandLimited(2, 1, {(1, 2): 2.0})
        assert isinstance(f([0, 0, 1]), float)

    def test_invalid_indices(self):
        with pytest.raises(InputError):
            BandLimited(2, 1, {(2, 1): 1.0})
        with pytest.raises(InputError):
            BandLimited(2, 2, {(1, 4): 1.0})
        with pytest.raises(InputError):
            HarmonicIndex(0, 2)

    @given(st.lists(st.floats(-5, 5), min_size=16, max_size=16))
    def test_json_and_vector_round_trip(self, vals):
        f = BandLimited.from_vector(vals)
        g = BandLimited.from_json(f.to_json())
        assert g == f
        assert np.array_equal(g.as_vector(3), np.asarray(vals))

    def test_malformed_json(self):
        with pytest.raises(InputError):
            BandLimited.from_json('{"d": 2}')

    def test_difference_and_energy(self):
        f = BandLimited(2, 1, {(0, 1): 1.0, (1, 1): 2.0})
        g = BandLimited(2, 1, {(1, 1): 1.0, (1, 3): 1.0})
        h = f - g
        assert h.degree_energy() == {0: 1.0, 1: 2.0}
