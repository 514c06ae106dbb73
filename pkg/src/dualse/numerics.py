"""Dense float64 matrix kernels shared by every other module.

Matrices are 2-D C-contiguous float64 numpy arrays; vectors are 1-D.
All functions are pure: inputs are never mutated, results are fresh
arrays, and every public operation either returns all-finite values or
raises.
"""

import math

import numpy as np

from . import backend
from .errors import ArgumentError, CardinalityError, NumericError, ShapeError, SymmetryError

JACOBI_MAX_SWEEPS = 100
# Off-diagonal Frobenius mass at which the Jacobi iteration stops,
# relative to ||a||_F.
JACOBI_REL_TOL = 1e-12


def _as_matrix(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={a.ndim}")
    return np.ascontiguousarray(a)


def matmul(a, b):
    """Matrix product a @ b with shape and finiteness checking."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = a @ b
    if not np.isfinite(out).all():
        raise NumericError("matmul produced non-finite entries")
    return out


def frobenius_norm_sq(a):
    """Sum of squared entries of a matrix.

    Uses exact (order-independent) accumulation, so the result is
    identical for a and a.T.
    """
    a = _as_matrix(a, "a")
    return math.fsum((a * a).ravel())


def sym_eig(a, tol=1e-8):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and
    eigenvectors as the corresponding orthonormal columns. ``a`` must be
    square and symmetric to within ``tol`` (max |a_ij - a_ji| <= tol); the
    exactly symmetrized (a + a.T)/2 is diagonalized.
    """
    a = _as_matrix(a, "a")
    n, m = a.shape
    if n != m:
        raise ShapeError(f"sym_eig needs a square matrix, got {a.shape}")
    if n == 0:
        raise ShapeError("sym_eig needs a non-empty matrix")
    if not np.isfinite(a).all():
        raise NumericError("sym_eig input has non-finite entries")
    asym = float(np.abs(a - a.T).max()) if n > 1 else 0.0
    if asym > tol:
        raise SymmetryError(f"matrix asymmetry {asym:.3e} exceeds tolerance {tol:.3e}")
    work = (a + a.T) / 2.0
    vecs, _, converged = backend.jacobi_diagonalize(work, JACOBI_MAX_SWEEPS, JACOBI_REL_TOL)
    if not converged:
        raise NumericError(f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    vals = np.diag(work).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], np.ascontiguousarray(vecs[:, order])


def _plusplus_seed(points, k, rng):
    # Distance-weighted sampling of k distinct input rows; when all residual
    # mass is zero the lowest-index unused row is taken.
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            r = rng.random() * total
            cum = np.cumsum(d2)
            idx = int(np.searchsorted(cum, r, side="right"))
            idx = min(idx, n - 1)
            while d2[idx] == 0.0 and idx + 1 < n:
                idx += 1
            if d2[idx] == 0.0:
                idx = int(np.argmax(d2))
        else:
            used = np.zeros(n, dtype=bool)
            used[chosen] = True
            idx = int(np.flatnonzero(~used)[0])
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return points[chosen].copy()


def kmeans_detailed(points, k, seed, max_iter=100):
    """Lloyd iterations with seeded ++-style init.

    Returns ``(labels, centroids, objectives)``; ``objectives`` holds the
    within-cluster sum of squares after each assignment/update round and is
    non-increasing. Empty clusters are repaired by moving the point farthest
    from its current centroid.
    """
    points = _as_matrix(points, "points")
    n = points.shape[0]
    if k == 0:
        raise ArgumentError("k must be >= 1")
    if k < 0 or max_iter < 1:
        raise ArgumentError(f"invalid k={k} or max_iter={max_iter}")
    if k > n:
        raise CardinalityError(f"k={k} exceeds the number of points n={n}")
    if not np.isfinite(points).all():
        raise NumericError("kmeans input has non-finite entries")

    rng = np.random.default_rng(seed)
    centroids = _plusplus_seed(points, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    objectives = []
    for _ in range(max_iter):
        new_labels, dists = backend.assign_nearest(points, centroids)
        repaired = False
        while True:
            counts = np.bincount(new_labels, minlength=k)
            empty = np.flatnonzero(counts == 0)
            if empty.size == 0:
                break
            far = int(np.argmax(dists))
            new_labels[far] = int(empty[0])
            dists[far] = 0.0
            repaired = True
        sums = np.zeros((k, points.shape[1]))
        np.add.at(sums, new_labels, points)
        counts = np.bincount(new_labels, minlength=k).astype(np.float64)
        centroids = sums / counts[:, None]
        objectives.append(float(((points - centroids[new_labels]) ** 2).sum()))
        if not repaired and np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels, centroids, objectives


def kmeans(points, k, seed, max_iter=100):
    """Cluster the rows of ``points`` into ``k`` groups; returns labels."""
    labels, _, _ = kmeans_detailed(points, k, seed, max_iter)
    return labels


def finite_diff_grad(loss_fn, x, h):
    """Central-difference gradient oracle: (f(x+h e_i) - f(x-h e_i)) / 2h."""
    if h <= 0.0:
        raise ArgumentError(f"step h must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"x must be a 1-D vector, got ndim={x.ndim}")
    grad = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        fp = float(loss_fn(xp))
        fm = float(loss_fn(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"loss_fn non-finite at coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad
