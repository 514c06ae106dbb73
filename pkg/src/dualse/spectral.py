"""Normalized-cut spectral clustering on a coefficient matrix."""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .numerics import kmeans, sym_eig

log = logging.getLogger("dualse.spectral")

# Degree substituted for isolated (zero-degree) nodes.
ISOLATED_DEGREE = 1e-12


@dataclass
class AffinityGraph:
    """Symmetric nonnegative edge weights with a zero diagonal."""

    weights: np.ndarray


def postprocess_affinity(c_f, topk=None):
    """Turn a signed, possibly asymmetric coefficient matrix into an
    affinity graph: (|C| + |C.T|)/2 with the diagonal zeroed. If ``topk``
    is given, only the topk largest entries of each row are kept and the
    result is re-symmetrized with an entrywise max."""
    c_f = np.asarray(c_f, dtype=np.float64)
    if c_f.ndim != 2 or c_f.shape[0] != c_f.shape[1]:
        raise ShapeError(f"coefficient matrix must be square, got {c_f.shape}")
    w = (np.abs(c_f) + np.abs(c_f.T)) / 2.0
    np.fill_diagonal(w, 0.0)
    if topk is not None and topk < w.shape[0]:
        keep = np.zeros_like(w)
        # stable sort so equal weights resolve by lowest column index
        order = np.argsort(-w, axis=1, kind="stable")[:, :topk]
        rows = np.repeat(np.arange(w.shape[0]), topk)
        keep[rows, order.ravel()] = w[rows, order.ravel()]
        w = np.maximum(keep, keep.T)
    return AffinityGraph(weights=w)


def cluster(g, k, seed):
    """Normalized-cut clustering of an affinity graph into ``k`` groups.

    Embeds nodes with the eigenvectors of the k smallest eigenvalues of
    I - D^-1/2 W D^-1/2, row-normalizes the embedding, and runs seeded
    k-means. Zero-degree nodes are kept by substituting a tiny degree.
    """
    w = g.weights if isinstance(g, AffinityGraph) else np.asarray(g, dtype=np.float64)
    n = w.shape[0]
    degrees = w.sum(axis=1)
    isolated = int((degrees <= 0.0).sum())
    if isolated:
        log.warning("affinity graph has %d isolated node(s); using degree %g",
                    isolated, ISOLATED_DEGREE)
    inv_sqrt = 1.0 / np.sqrt(np.maximum(degrees, ISOLATED_DEGREE))
    # outer * w keeps the matrix bitwise symmetric
    lsym = -(np.multiply.outer(inv_sqrt, inv_sqrt) * w)
    lsym[np.diag_indices(n)] += 1.0
    _, vecs = sym_eig(lsym, tol=1e-8)
    embed = vecs[:, :k].copy()
    norms = np.sqrt((embed * embed).sum(axis=1, keepdims=True))
    norms[norms == 0.0] = 1.0
    embed /= norms
    return kmeans(embed, k, seed)
