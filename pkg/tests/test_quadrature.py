import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from dwrls.errors import InputError, NoPositiveRule
from dwrls.geometry import PointSet, fibonacci_points
from dwrls.harmonics import BandLimited, sph_harmonics_matrix
from dwrls.quadrature import (QuadratureRule, build_quadrature, default_degree,
                              least_distance_nnls, load_rule, max_buildable_degree,
                              mz_ratio, save_rule, verify_exactness)

from conftest import random_sphere

FOUR_PI = 4 * math.pi


def lp_feasible(x, s):
    """Independent oracle: is {w >= 0, moments exact to degree s} nonempty?"""
    A = sph_harmonics_matrix(x, s).T
    b = np.zeros(A.shape[0])
    b[0] = math.sqrt(FOUR_PI)
    res = optimize.linprog(np.zeros(len(x)), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    return res.status == 0


@pytest.fixture(scope="module")
def fib400_rule():
    return build_quadrature(fibonacci_points(400), 12)


class TestRuleType:
    def test_equal_weights(self):
        r = QuadratureRule.equal_weights(fibonacci_points(10))
        assert r.weights.sum() == pytest.approx(FOUR_PI)
        assert r.c1_observed == pytest.approx(1.0)
        assert not r.weights.flags.writeable

    @pytest.mark.parametrize("w", [[-1.0, 4 * math.pi + 1.0], [1.0, 1.0], [np.nan, 1.0],
                                   [FOUR_PI]])
    def test_invalid_weights(self, w):
        with pytest.raises(InputError):
            QuadratureRule(PointSet([[0, 0, 1], [1, 0, 0]]), w, degree=0)

    def test_no_subset(self):
        r = QuadratureRule.equal_weights(fibonacci_points(10))
        with pytest.raises(NotImplementedError):
            r.subset([0, 1])


class TestDegrees:
    @pytest.mark.parametrize("n,s", [(1, 0), (8, 1), (18, 2), (1038, 21), (10380, 71)])
    def test_default(self, n, s):
        assert default_degree(n) == s
        assert (s + 1) ** 2 <= n / 2 or s == 0

    @pytest.mark.parametrize("n,s", [(1, 0), (4, 1), (400, 19), (1038, 31)])
    def test_buildable(self, n, s):
        assert max_buildable_degree(n) == s


class TestBuild:
    def test_degree_zero(self):
        r = build_quadrature(PointSet(random_sphere(7)), 0)
        assert np.allclose(r.weights, FOUR_PI / 7)
        assert abs(r.weights.sum() - FOUR_PI) < 1e-12

    def test_fibonacci_400(self, fib400_rule):
        r = fib400_rule
        assert r.degree == 12 and r.residual < 1e-8
        assert np.all(r.weights >= 0)
        assert r.weights.max() <= 4 * FOUR_PI / 400
        assert r.c1_observed < 1.1
        assert verify_exactness(r, 0) < 1e-8
        assert verify_exactness(r, 12) < 1e-8

    def test_defect_past_design_degree_is_reported(self, fib400_rule):
        assert verify_exactness(fib400_rule, 24) > 1e-8

    def test_design_file_recovers_equal_weights(self, design_points):
        r = build_quadrature(design_points, 45)
        assert r.residual < 1e-8
        assert np.max(np.abs(r.weights / (FOUR_PI / 1038) - 1)) < 0.01

    def test_nnls_method(self):
        r = build_quadrature(fibonacci_points(300), 10, method="nnls")
        assert r.residual < 1e-8 and np.all(r.weights >= 0)
        with pytest.raises(InputError):
            build_quadrature(fibonacci_points(30), 2, method="simplex")

    @pytest.mark.parametrize("n", [200, 400, 1000])
    def test_weight_bound_sweep(self, n):
        s = int(math.isqrt(n) // 2)
        r = build_quadrature(fibonacci_points(n), s)
        assert r.c1_observed <= 8

    def test_up_front_count_error(self):
        with pytest.raises(NoPositiveRule) as exc:
            build_quadrature(fibonacci_points(20), 10)
        assert exc.value.residual == float("inf")
        assert exc.value.to_dict()["code"] == "no_positive_rule"

    @pytest.mark.parametrize("n,s", [(400, 14), (300, 16)])
    def test_infeasible_agrees_with_lp(self, n, s):
        x = random_sphere(n, 0)
        assert not lp_feasible(x, s)
        with pytest.raises(NoPositiveRule):
            build_quadrature(PointSet(x), s)

    @pytest.mark.parametrize("s", [8, 10])
    def test_feasible_random_nodes_agree_with_lp(self, s):
        x = random_sphere(400, 0)
        assert lp_feasible(x, s)
        r = build_quadrature(PointSet(x), s)
        assert r.residual < 1e-8 and np.all(r.weights >= 0)

    def test_ldp_is_closest_to_uniform(self):
        # the LDP answer is no farther from 4 pi / n than the NNLS answer
        P = fibonacci_points(250)
        a = build_quadrature(P, 10)
        b = build_quadrature(P, 10, method="nnls")
        w0 = FOUR_PI / 250
        assert np.linalg.norm(a.weights - w0) <= np.linalg.norm(b.weights - w0) + 1e-12

    def test_d3_rejected(self):
        with pytest.raises(InputError):
            build_quadrature(PointSet(random_sphere(30, d=3)), 2)


class TestLeastDistance:
    def test_simple(self):
        # min ||x|| s.t. x1 + x2 >= 2  ->  (1, 1)
        x = least_distance_nnls(np.array([[1.0, 1.0]]), np.array([2.0]))
        assert np.allclose(x, [1, 1])

    def test_infeasible(self):
        G = np.array([[1.0], [-1.0]])
        assert least_distance_nnls(G, np.array([1.0, 1.0])) is None

    @given(st.integers(0, 10_000))
    def test_matches_slsqp(self, seed):
        rng = np.random.default_rng(seed)
        G = rng.normal(size=(4, 3))
        h = rng.normal(size=4)
        x = least_distance_nnls(G, h)
        if x is None:
            return
        assert np.all(G @ x >= h - 1e-9)
        ref = optimize.minimize(lambda z: z @ z, np.zeros(3), jac=lambda z: 2 * z,
                                constraints=[{"type": "ineq", "fun": lambda z: G @ z - h,
                                              "jac": lambda z: G}],
                                method="SLSQP", options={"ftol": 1e-14})
        if ref.success:
            assert x @ x <= ref.x @ ref.x + 1e-7


class TestMZ:
    def test_constant(self, fib400_rule):
        p = BandLimited(2, 0, {(0, 1): 2.0})
        assert mz_ratio(fib400_rule, p)[2] == pytest.approx(1, abs=1e-8)

    @given(st.lists(st.floats(-1, 1), min_size=49, max_size=49).filter(
        lambda v: np.linalg.norm(v) > 0.1))
    def test_exact_for_half_degree(self, fib400_rule, vals):
        p = BandLimited.from_vector(vals)
        disc, cont, ratio = mz_ratio(fib400_rule, p)
        assert ratio == pytest.approx(1, abs=1e-8)

    def test_double_degree_bounds(self):
        P = fibonacci_points(1000)
        for s in (10, 15, 21):
            r = build_quadrature(P, s)
            for seed in range(5):
                v = np.random.default_rng(seed).normal(size=(2 * s + 1) ** 2)
                ratio = mz_ratio(r, BandLimited.from_vector(v))[2]
                assert 0.25 < ratio < 4

    def test_zero_polynomial(self, fib400_rule):
        with pytest.raises(InputError):
            mz_ratio(fib400_rule, BandLimited(2, 0, {}))


class TestFiles:
    def test_round_trip(self, tmp_path, fib400_rule):
        save_rule(fib400_rule, tmp_path / "r.csv")
        meta = json.loads((tmp_path / "r.json").read_text())
        assert meta["degree"] == 12
        assert meta["c1_observed"] == pytest.approx(fib400_rule.c1_observed)
        r = load_rule(tmp_path / "r.csv")
        assert np.array_equal(r.weights, fib400_rule.weights)
        assert np.array_equal(r.nodes.coords, fib400_rule.nodes.coords)
        assert r.degree == 12 and r.residual == fib400_rule.residual

    @pytest.mark.parametrize("text", ["x0,x1,x2\n0,0,1\n", "x0,x1,x2,w\n",
                                      "x0,x1,x2,w\n0,0,1,abc\n",
                                      "x0,x1,x2,w\n0,0,1,1.0\n1,0,0,1.0\n"])
    def test_malformed(self, tmp_path, text):
        f = tmp_path / "r.csv"
        f.write_text(text)
        with pytest.raises(InputError):
            load_rule(f)

    def test_missing(self, tmp_path):
        with pytest.raises(InputError):
            load_rule(tmp_path / "none.csv")
