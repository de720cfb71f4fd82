import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dampreg import algebra as alg
from dampreg.transforms import gen_lc_forward

comp = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False).filter(lambda x: x == 0 or abs(x) > 1e-30)
vec2 = st.tuples(comp, comp).map(np.array)
vec4 = st.tuples(comp, comp, comp, comp).map(np.array)


def as_su2(q):
    """Quaternion as a 2x2 complex matrix; matrix product mirrors the Hamilton product."""
    a, b, c, d = q
    return np.array([[a + 1j * b, c + 1j * d], [-c + 1j * d, a - 1j * b]])


def from_su2(m):
    return np.array([m[0, 0].real, m[0, 0].imag, m[0, 1].real, m[0, 1].imag])


class TestQuaternion:
    def test_unit_products(self):
        i, j, k = (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)
        assert alg.quat_mul(i, j) == (0, 0, 0, 1)
        assert alg.quat_mul(j, k) == (0, 1, 0, 0)
        assert alg.quat_mul(k, i) == (0, 0, 1, 0)
        assert alg.quat_mul(j, i) == (0, 0, 0, -1)
        for u in (i, j, k):
            assert alg.quat_mul(u, u) == (-1, 0, 0, 0)

    def test_identity_element(self):
        q = (0.3, -1.2, 4.0, 2.5)
        assert alg.quat_mul((1, 0, 0, 0), q) == q
        assert alg.quat_mul(q, (1, 0, 0, 0)) == q

    def test_conj_and_star(self):
        assert alg.quat_conj((1, 2, 3, 4)) == (1, -2, -3, -4)
        assert alg.quat_star((1, 2, 3, 4)) == (1, 2, 3, -4)
        assert alg.quat_conj((1, 0, 0, 0)) == (1, 0, 0, 0)

    @given(vec4, vec4)
    def test_product_matches_matrix_representation(self, a, b):
        expected = from_su2(as_su2(a) @ as_su2(b))
        got = np.array(alg.quat_mul(a, b))
        assert np.allclose(got, expected, rtol=1e-12, atol=1e-9 * (1 + np.abs(a).max() * np.abs(b).max()))

    @given(vec4, vec4, vec4)
    def test_associative(self, a, b, c):
        left = np.array(alg.quat_mul(alg.quat_mul(a, b), c))
        right = np.array(alg.quat_mul(a, alg.quat_mul(b, c)))
        scale = 1 + np.linalg.norm(a) * np.linalg.norm(b) * np.linalg.norm(c)
        assert np.max(np.abs(left - right)) <= 1e-13 * scale

    @given(vec4, vec4)
    def test_norm_multiplicative(self, a, b):
        na, nb = alg.quat_norm(a), alg.quat_norm(b)
        assert alg.quat_norm(alg.quat_mul(a, b)) == pytest.approx(na * nb, rel=1e-13, abs=1e-300)

    @given(vec4)
    def test_involutions(self, q):
        q = alg.Quaternion(*q)
        assert alg.quat_conj(alg.quat_conj(q)) == q
        assert alg.quat_star(alg.quat_star(q)) == q

    def test_norm_zero_only_at_zero(self):
        assert alg.quat_norm((0, 0, 0, 0)) == 0
        assert alg.Quaternion(0, 0, 0, 1e-200).norm2 >= 0
        assert alg.quat_norm((0, 0, 0, 1e-150)) > 0


class TestMatrices:
    def test_lc_matrix_examples(self):
        assert np.array_equal(alg.lc_matrix((1, 0)), np.eye(2))
        assert np.array_equal(alg.lc_matrix((0, 1)), [[0, -1], [1, 0]])

    @given(vec2)
    def test_lc_orthogonality(self, u):
        a = alg.lc_matrix(u)
        r = u @ u
        assert np.allclose(a.T @ a, r * np.eye(2), rtol=0, atol=1e-13 * max(r, 1e-300))

    def test_ks_matrix_at_unit_quaternion(self):
        # the last column is P^(3) U = (U3, -U2, U1, -U0), so the corner entry is -1
        assert np.array_equal(alg.ks_matrix((1, 0, 0, 0)), np.diag([1.0, 1.0, 1.0, -1.0]))

    @given(vec4)
    def test_ks_orthogonality(self, u):
        a = alg.ks_matrix(u)
        r = u @ u
        assert np.allclose(a.T @ a, r * np.eye(4), rtol=0, atol=1e-13 * max(r, 1e-300))

    @given(vec4)
    def test_ks_columns_are_permutations(self, u):
        a = alg.ks_matrix(u)
        for j in range(4):
            assert np.array_equal(a[:, j], alg.permutation_apply("4D", j, u))

    @given(vec4)
    def test_ks_first_row_block_is_quaternion_square(self, u):
        # A(U) U holds X = U U* in its first three entries and 0 in the last
        x = alg.ks_matrix(u) @ u
        ref = from_su2(as_su2(u) @ as_su2(alg.quat_star(u)))
        r = u @ u
        assert np.allclose(x[:3], ref[:3], atol=1e-13 * max(r, 1e-300))
        assert abs(x[3]) <= 1e-13 * max(r, 1e-300)


class TestPermutations:
    def test_examples(self):
        assert np.array_equal(alg.permutation_apply("2D", 1, (2.0, 3.0)), (2.0, 3.0))
        assert np.array_equal(alg.permutation_apply("2D", 2, (2.0, 3.0)), (-3.0, 2.0))
        assert np.array_equal(alg.permutation_apply("4D", 3, (1, 0, 0, 0)), (0, 0, 0, -1))

    @pytest.mark.parametrize("family,index", [("2D", 0), ("2D", 3), ("4D", 4), ("4D", -1), ("3D", 1)])
    def test_bad_index(self, family, index):
        with pytest.raises(ValueError):
            alg.permutation_apply(family, index, np.zeros(4))

    @pytest.mark.parametrize("family", ["2D", "4D"])
    def test_each_is_orthogonal(self, family):
        for i in alg.permutation_indices(family):
            p = alg.permutation_matrix(family, i)
            assert np.array_equal(p.T @ p, np.eye(len(p)))

    @pytest.mark.parametrize("family,dim", [("2D", 2), ("4D", 4)])
    def test_images_orthonormal(self, family, dim):
        # (P^i U) . (P^j U) = delta_ij |U|^2, i.e. P^iT P^j + P^jT P^i = 2 delta_ij I
        idx = alg.permutation_indices(family)
        for i, j in itertools.product(idx, idx):
            pi, pj = alg.permutation_matrix(family, i), alg.permutation_matrix(family, j)
            assert np.array_equal(pi.T @ pj + pj.T @ pi, 2 * (i == j) * np.eye(dim))

    def test_2d_commute(self):
        p1, p2 = alg.permutation_matrix("2D", 1), alg.permutation_matrix("2D", 2)
        assert np.array_equal(p1 @ p2, p2 @ p1)

    def test_4d_noncommuting_pair(self):
        p1, p2 = alg.permutation_matrix("4D", 1), alg.permutation_matrix("4D", 2)
        assert not np.array_equal(p1 @ p2, p2 @ p1)

    def test_matrices_are_read_only_copies(self):
        p = alg.permutation_matrix("4D", 1)
        p[0, 0] = 99
        assert alg.permutation_matrix("4D", 1)[0, 0] != 99


class TestUhat:
    def test_low_orders(self):
        u = np.array([0.7, -1.3])
        assert np.array_equal(alg.uhat_n(u, 0), np.eye(2))
        assert np.allclose(alg.uhat_n(u, 1), alg.lc_matrix(u))

    def test_negative_order(self):
        with pytest.raises(ValueError):
            alg.uhat_n((1.0, 0.0), -1)

    @settings(max_examples=200)
    @given(vec2, st.integers(0, 4))
    def test_scaling(self, u, n):
        mat = alg.uhat_n(u, n)
        r2n = (u @ u) ** n
        tol = 1e-13 * max(r2n, 1e-300)
        assert np.allclose(mat.T @ mat, r2n * np.eye(2), rtol=0, atol=tol)
        assert np.allclose(mat @ mat.T, r2n * np.eye(2), rtol=0, atol=tol)

    @given(vec2, st.integers(0, 4))
    def test_matches_complex_power(self, u, n):
        z = alg.uhat_n(u, n) @ u
        ref = complex(*u) ** (n + 1)
        assert abs(complex(*z) - ref) <= 1e-13 * max(abs(ref), 1e-300) * (n + 1)
        assert np.allclose(z, gen_lc_forward(u, n), rtol=1e-14, atol=1e-14 * max(abs(ref), 1e-300))
