import numpy as np
import pytest

from dualse.errors import (
    ArgumentError,
    CardinalityError,
    NumericError,
    ShapeError,
    SymmetryError,
)
from dualse.numerics import (
    finite_diff_grad,
    frobenius_norm_sq,
    kmeans,
    kmeans_detailed,
    matmul,
    sym_eig,
)


def matmul_oracle(a, b):
    # naive triple loop, independent of numpy's matmul
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


class TestMatmul:
    def test_identity(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(matmul(np.eye(2), a), a)

    def test_hand_example(self):
        out = matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[0.0], [1.0]]))
        assert np.array_equal(out, np.array([[2.0], [4.0]]))

    def test_against_triple_loop(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((5, 4))
        b = rng.standard_normal((4, 3))
        expect = matmul_oracle(a, b)
        assert np.abs(matmul(a, b) - expect).max() <= 1e-12 * np.abs(expect).max()

    def test_random_shapes_against_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            m, k, n = rng.integers(1, 8, size=3)
            a = rng.standard_normal((m, k))
            b = rng.standard_normal((k, n))
            got = matmul(a, b)
            expect = matmul_oracle(a, b)
            scale = max(1.0, np.abs(expect).max())
            assert np.abs(got - expect).max() <= 1e-12 * scale

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(np.ones((2, 3)), np.ones((2, 2)))

    def test_overflow_raises(self):
        big = np.full((2, 2), 1e308)
        with pytest.raises(NumericError):
            matmul(big, big)


class TestFrobeniusNormSq:
    def test_zero(self):
        assert frobenius_norm_sq(np.zeros((3, 4))) == 0.0

    def test_identity(self):
        assert frobenius_norm_sq(np.eye(3)) == 3.0

    def test_hand_example(self):
        assert frobenius_norm_sq(np.array([[1.0, -2.0], [2.0, 1.0]])) == 10.0

    def test_transpose_invariant(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = rng.standard_normal((rng.integers(1, 7), rng.integers(1, 7)))
            assert frobenius_norm_sq(a) == frobenius_norm_sq(a.T)


class TestSymEig:
    def test_diagonal(self):
        vals, vecs = sym_eig(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(vals, [1.0, 2.0, 3.0])
        # axis-aligned eigenvectors, up to sign
        assert np.allclose(np.abs(vecs), np.eye(3)[:, [1, 2, 0]], atol=1e-12)

    def test_two_by_two_roots(self):
        vals, _ = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(vals, [1.0, 3.0], atol=1e-12)

    def test_reconstruction(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((6, 6))
        a = (a + a.T) / 2
        vals, vecs = sym_eig(a)
        recon = vecs @ np.diag(vals) @ vecs.T
        assert np.abs(recon - a).max() <= 1e-8

    def test_random_residuals_orthonormality_trace(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(1, 21))
            a = rng.standard_normal((n, n))
            a = (a + a.T) / 2
            vals, vecs = sym_eig(a)
            norm = np.sqrt(frobenius_norm_sq(a))
            resid = np.linalg.norm(a @ vecs - vecs * vals)
            assert resid <= 1e-8 * max(norm, 1e-30)
            assert np.abs(vecs.T @ vecs - np.eye(n)).max() <= 1e-8
            assert abs(vals.sum() - np.trace(a)) <= 1e-8 * max(norm, 1e-30)
            assert np.all(np.diff(vals) >= 0)

    def test_non_square(self):
        with pytest.raises(ShapeError):
            sym_eig(np.ones((2, 3)))

    def test_asymmetric(self):
        with pytest.raises(SymmetryError):
            sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]), tol=1e-8)

    def test_asymmetry_within_tol_accepted(self):
        a = np.array([[1.0, 0.5 + 1e-10], [0.5, 2.0]])
        vals, _ = sym_eig(a, tol=1e-8)
        assert np.isfinite(vals).all()


class TestKmeans:
    def test_single_cluster(self):
        pts = np.array([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])
        labels, centroids, _ = kmeans_detailed(pts, 1, seed=0)
        assert np.array_equal(labels, [0, 0, 0])
        assert np.allclose(centroids[0], pts.mean(axis=0))

    def test_two_far_clouds(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((15, 2))
        b = rng.standard_normal((15, 2)) + 100.0
        pts = np.vstack([a, b])
        labels = kmeans(pts, 2, seed=1)
        assert len(set(labels[:15])) == 1
        assert len(set(labels[15:])) == 1
        assert labels[0] != labels[15]

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        pts = rng.standard_normal((30, 3))
        first = kmeans(pts, 3, seed=42)
        second = kmeans(pts, 3, seed=42)
        assert np.array_equal(first, second)

    def test_objective_monotone(self):
        rng = np.random.default_rng(7)
        for trial in range(10):
            pts = rng.standard_normal((40, 2))
            _, _, objectives = kmeans_detailed(pts, 4, seed=trial)
            assert all(b <= a + 1e-9 for a, b in zip(objectives, objectives[1:]))

    def test_centroids_are_assigned_means(self):
        rng = np.random.default_rng(8)
        pts = rng.standard_normal((25, 2))
        labels, centroids, _ = kmeans_detailed(pts, 3, seed=0)
        for c in range(3):
            members = pts[labels == c]
            assert members.size
            assert np.allclose(centroids[c], members.mean(axis=0))

    def test_k_larger_than_n(self):
        with pytest.raises(CardinalityError):
            kmeans(np.zeros((3, 2)), 4, seed=0)

    def test_k_zero(self):
        with pytest.raises(ArgumentError):
            kmeans(np.zeros((3, 2)), 0, seed=0)

    def test_duplicate_points(self):
        # more clusters than distinct points still terminates
        pts = np.array([[0.0, 0.0]] * 4 + [[1.0, 1.0]] * 4)
        labels = kmeans(pts, 3, seed=0)
        assert set(labels) <= {0, 1, 2}


class TestFiniteDiffGrad:
    def test_quadratic(self):
        grad = finite_diff_grad(lambda v: float((v * v).sum()), np.array([1.0, 2.0]), 1e-5)
        assert np.allclose(grad, [2.0, 4.0], atol=1e-8)

    def test_constant(self):
        grad = finite_diff_grad(lambda v: 3.5, np.array([0.3, -0.7, 2.0]), 1e-5)
        assert np.array_equal(grad, np.zeros(3))

    def test_product(self):
        grad = finite_diff_grad(lambda v: float(v[0] * v[1]), np.array([3.0, 5.0]), 1e-5)
        assert np.allclose(grad, [5.0, 3.0], atol=1e-9)

    def test_non_positive_h(self):
        with pytest.raises(ArgumentError):
            finite_diff_grad(lambda v: 0.0, np.zeros(2), 0.0)

    def test_non_finite_eval(self):
        with pytest.raises(NumericError):
            finite_diff_grad(lambda v: float("nan"), np.zeros(2), 1e-5)
