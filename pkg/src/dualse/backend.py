"""Kernel backend selection: numba-compiled loops or pure-numpy fallbacks.

The env var ``DUALSE_BACKEND`` picks the path:

* ``auto`` (default) - numba when importable, else numpy
* ``numba``          - require numba, error if missing
* ``numpy``          - force the pure-numpy fallbacks

Both paths implement identical update formulas; they agree to rounding.
``benchmarks/bench_backends.py`` compares their speed.
"""

import logging
import os

import numpy as np

from .errors import ConfigError

log = logging.getLogger("dualse.backend")

_numba_ok = None


def _numba_available():
    global _numba_ok
    if _numba_ok is None:
        try:
            from . import _numba_kernels  # noqa: F401

            _numba_ok = True
        except ImportError:
            _numba_ok = False
            log.info("numba not importable, using numpy fallbacks")
    return _numba_ok


def active_backend():
    """Resolve the backend name from DUALSE_BACKEND ('numba' or 'numpy')."""
    mode = os.environ.get("DUALSE_BACKEND", "auto").strip().lower()
    if mode in ("", "auto"):
        return "numba" if _numba_available() else "numpy"
    if mode == "numpy":
        return "numpy"
    if mode == "numba":
        if not _numba_available():
            raise ConfigError("DUALSE_BACKEND=numba but numba is not importable")
        return "numba"
    raise ConfigError(
        f"DUALSE_BACKEND={mode!r} not recognized (expected auto, numba, or numpy)"
    )


def jacobi_diagonalize(a, max_sweeps, rel_tol):
    """Dispatch the in-place Jacobi diagonalization to the active backend."""
    if active_backend() == "numba":
        from ._numba_kernels import jacobi_diagonalize as kern

        return kern(a, max_sweeps, rel_tol)
    return _jacobi_diagonalize_numpy(a, max_sweeps, rel_tol)


def assign_nearest(points, centroids):
    """Dispatch nearest-centroid assignment to the active backend."""
    if active_backend() == "numba":
        from ._numba_kernels import assign_nearest as kern

        return kern(points, centroids)
    return _assign_nearest_numpy(points, centroids)


def _jacobi_diagonalize_numpy(a, max_sweeps, rel_tol):
    # Vectorized twin of _numba_kernels.jacobi_diagonalize: each rotation
    # updates columns p,q and mirrors them onto the rows, keeping a exactly
    # symmetric, with the 2x2 pivot block set analytically.
    n = a.shape[0]
    v = np.eye(n)
    norm = float(np.sqrt((a * a).sum()))
    off_tol = rel_tol * norm
    skip_tol = off_tol / max(n, 1)
    iu = np.triu_indices(n, 1)
    sweeps = 0
    for _ in range(max_sweeps):
        off = float(np.sqrt(2.0 * (a[iu] ** 2).sum())) if n > 1 else 0.0
        if off <= off_tol:
            return v, sweeps, True
        for p in range(n - 1):
            hot = np.nonzero(np.abs(a[p, p + 1:]) > skip_tol)[0]
            for q in p + 1 + hot:
                apq = a[p, q]
                if abs(apq) <= skip_tol:  # may have shrunk since the scan
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
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                new_p = c * col_p - s * col_q
                new_q = s * col_p + c * col_q
                a[:, p] = new_p
                a[:, q] = new_q
                a[p, :] = new_p
                a[q, :] = new_q
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        sweeps += 1
    return v, sweeps, False


def _assign_nearest_numpy(points, centroids):
    diff = points[:, None, :] - centroids[None, :, :]
    d2 = (diff * diff).sum(axis=2)
    labels = d2.argmin(axis=1)
    dists = d2[np.arange(points.shape[0]), labels]
    return labels.astype(np.int64), dists.astype(np.float64)
