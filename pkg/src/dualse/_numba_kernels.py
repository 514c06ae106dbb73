"""Numba-compiled inner loops. Imported lazily by :mod:`dualse.backend`.

The numpy fallbacks in ``backend.py`` implement the same update formulas;
keep the two in sync when touching either.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def jacobi_diagonalize(a, max_sweeps, rel_tol):
    """Cyclic Jacobi rotations on a symmetric matrix, in place.

    ``a`` is overwritten with a near-diagonal matrix (eigenvalues on the
    diagonal). Returns ``(v, sweeps, converged)`` where the columns of ``v``
    accumulate the rotations. Convergence: off-diagonal Frobenius mass
    <= rel_tol * ||a||_F. Rotations with |a_pq| below that budget spread
    over the n^2 off-diagonal slots are skipped.
    """
    n = a.shape[0]
    v = np.eye(n)
    norm = 0.0
    for i in range(n):
        for j in range(n):
            norm += a[i, j] * a[i, j]
    norm = np.sqrt(norm)
    off_tol = rel_tol * norm
    skip_tol = off_tol / max(n, 1)
    sweeps = 0
    for _ in range(max_sweeps):
        off2 = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off2 += a[p, q] * a[p, q]
        if np.sqrt(2.0 * off2) <= off_tol:
            return v, sweeps, True
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip_tol:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    if k != p and k != q:
                        akp = a[k, p]
                        akq = a[k, q]
                        a[k, p] = c * akp - s * akq
                        a[p, k] = a[k, p]
                        a[k, q] = s * akp + c * akq
                        a[q, k] = a[k, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
        sweeps += 1
    return v, sweeps, False


@njit(cache=True)
def assign_nearest(points, centroids):
    """Nearest-centroid assignment with lowest-index tie breaking.

    Returns ``(labels, dists)`` where ``dists`` holds the squared distance
    of each point to its assigned centroid.
    """
    n, d = points.shape
    k = centroids.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = 0
        best_d = np.inf
        for c in range(k):
            acc = 0.0
            for j in range(d):
                diff = points[i, j] - centroids[c, j]
                acc += diff * diff
            if acc < best_d:
                best_d = acc
                best = c
        labels[i] = best
        dists[i] = best_d
    return labels, dists
