import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lapcast import kernels as K
from lapcast.backend import use_backend
from lapcast.errors import ShapeError


def naive_matmul(a, b):
    m, k = a.shape
    k2, n = b.shape
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for p in range(k):
                acc += a[i, p] * b[p, j]
            out[i, j] = acc
    return out


class TestMatmul:
    def test_identity(self, rng):
        m = rng.standard_normal((3, 3))
        assert np.array_equal(K.matmul(np.eye(3), m), m)

    def test_one_by_one(self):
        assert K.matmul(np.array([[2.0]]), np.array([[3.0]]))[0, 0] == 6.0

    def test_matches_triple_loop_oracle(self, rng):
        a = rng.standard_normal((7, 5))
        b = rng.standard_normal((5, 4))
        assert np.max(np.abs(K.matmul(a, b) - naive_matmul(a, b))) < 1e-12

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ShapeError):
            K.matmul(rng.standard_normal((2, 3)), rng.standard_normal((2, 3)))

    def test_rejects_non_matrix(self):
        with pytest.raises(ShapeError):
            K.matmul(np.zeros(3), np.zeros((3, 1)))

    def test_associativity_against_oracle(self, rng):
        for _ in range(5):
            a = rng.standard_normal((6, 8))
            b = rng.standard_normal((8, 5))
            c = rng.standard_normal((5, 7))
            lhs = K.matmul(K.matmul(a, b), c)
            rhs = K.matmul(a, K.matmul(b, c))
            assert np.max(np.abs(lhs - rhs)) < 1e-9


class TestElementwise:
    def test_hadamard_ones_identity(self, rng):
        m = rng.standard_normal((4, 5))
        assert np.array_equal(K.hadamard(m, np.ones_like(m)), m)

    def test_add_zeros_identity(self, rng):
        m = rng.standard_normal((4, 5))
        assert np.array_equal(K.add(m, np.zeros_like(m)), m)

    def test_sub(self):
        a = np.array([[3.0, 1.0]])
        b = np.array([[1.0, 4.0]])
        assert np.array_equal(K.sub(a, b), np.array([[2.0, -3.0]]))

    def test_scale(self):
        assert np.array_equal(K.scale(np.array([[2.0, -1.0]]), 3.0),
                              np.array([[6.0, -3.0]]))

    def test_add_bias_rows(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        bias = np.array([[10.0, 20.0]])
        assert np.array_equal(K.add_bias_rows(a, bias),
                              np.array([[11.0, 22.0], [13.0, 24.0]]))

    def test_add_bias_shape_error(self):
        with pytest.raises(ShapeError):
            K.add_bias_rows(np.zeros((2, 3)), np.zeros((1, 2)))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            K.add(np.zeros((2, 3)), np.zeros((3, 2)))

    def test_col_sum(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        assert np.array_equal(K.col_sum(a), np.array([[9.0, 12.0]]))


class TestActivations:
    def test_sigmoid_at_zero(self):
        assert K.sigmoid(np.zeros((1, 1)))[0, 0] == pytest.approx(0.5, abs=1e-15)

    def test_softplus_at_zero(self):
        assert K.softplus(np.zeros((1, 1)))[0, 0] == pytest.approx(math.log(2.0),
                                                                   abs=1e-12)

    def test_softplus_large_input_no_overflow(self):
        # extended-precision reference: 50 + log1p(exp(-50))
        expected = 50.0 + math.log1p(math.exp(-50.0))
        got = K.softplus(np.full((1, 1), 50.0))[0, 0]
        assert math.isfinite(got)
        assert got == pytest.approx(expected, abs=1e-12)
        assert math.isfinite(K.softplus(np.full((1, 1), 800.0))[0, 0])

    def test_sigmoid_symmetry(self, rng):
        x = rng.uniform(-30.0, 30.0, size=(8, 8))
        total = K.sigmoid(x) + K.sigmoid(-x)
        assert np.max(np.abs(total - 1.0)) < 1e-12

    def test_sigmoid_derivative_matches_finite_difference(self, rng):
        x = rng.uniform(-4.0, 4.0, size=(5, 5))
        eps = 1e-5
        numeric = (K.sigmoid(x + eps) - K.sigmoid(x - eps)) / (2 * eps)
        s = K.sigmoid(x)
        analytic = K.sigmoid_grad(s)
        assert np.max(np.abs(numeric - analytic)) < 1e-6

    def test_tanh_grad(self, rng):
        x = rng.standard_normal((3, 4))
        t = K.tanh(x)
        assert np.allclose(K.tanh_grad(t), 1.0 - np.tanh(x) ** 2, atol=1e-14)

    @given(st.floats(min_value=-700.0, max_value=700.0,
                     allow_nan=False, allow_infinity=False))
    @settings(max_examples=80, deadline=None)
    def test_activations_total_and_finite(self, x):
        m = np.array([[x]])
        assert math.isfinite(K.sigmoid(m)[0, 0])
        assert math.isfinite(K.tanh(m)[0, 0])
        assert math.isfinite(K.softplus(m)[0, 0])
        assert K.softplus(m)[0, 0] >= 0.0


class TestBackendParity:
    """Both lanes compute the same functions (to ulp-level tolerance)."""

    @pytest.mark.parametrize("name,nargs", [
        ("add", 2), ("sub", 2), ("hadamard", 2),
        ("sigmoid", 1), ("tanh", 1), ("softplus", 1),
        ("sigmoid_grad", 1), ("tanh_grad", 1), ("col_sum", 1),
    ])
    def test_lane_parity(self, rng, name, nargs):
        pytest.importorskip("numba")
        fn = getattr(K, name)
        args = [rng.uniform(-5, 5, size=(6, 7)) for _ in range(nargs)]
        with use_backend("numpy"):
            ref = fn(*args)
        with use_backend("numba"):
            got = fn(*args)
        np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)

    def test_strided_views_supported(self, rng):
        big = rng.standard_normal((5, 12))
        view = big[:, 3:9]
        assert np.allclose(K.tanh(view), np.tanh(view), atol=1e-15)
        out = np.empty((5, 12))
        K.add(view, view, out=out[:, 0:6])
        assert np.allclose(out[:, 0:6], view * 2)

    def test_out_buffer_shape_checked(self, rng):
        with pytest.raises(ShapeError):
            K.add(np.zeros((2, 2)), np.zeros((2, 2)), out=np.zeros((2, 3)))
