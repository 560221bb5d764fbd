"""Pure numpy/scipy fallback kernels.

The pairwise kernel walks the delay-window cells and lets BLAS form the
L x L gram matrix per cell; cell contributions accumulate in the same order
as the numba kernel so both backends agree to summation-order precision.
"""

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph


def adp_pairwise(h, norms):
    h = np.ascontiguousarray(h, dtype=np.complex128)
    norms = np.asarray(norms, dtype=np.float64)
    L, C, M = h.shape
    num = np.zeros((L, L), dtype=np.float64)
    den = np.zeros((L, L), dtype=np.float64)
    for c in range(C):
        hc = np.ascontiguousarray(h[:, c, :])
        g = hc @ hc.conj().T
        g2 = g.real ** 2 + g.imag ** 2
        p = np.outer(norms[:, c], norms[:, c])
        live = p > 0.0
        contrib = np.zeros_like(p)
        np.divide(g2, p, out=contrib, where=live)
        num += np.where(live, p - contrib, 0.0)
        den += np.where(live, p, 0.0)
    out = np.zeros((L, L), dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0.0)
    np.clip(out, 0.0, None, out=out)
    np.fill_diagonal(out, 0.0)
    return out


def dijkstra_all_pairs(indptr, indices, weights, n):
    g = scipy.sparse.csr_matrix(
        (np.asarray(weights, dtype=np.float64),
         np.asarray(indices, dtype=np.int32),
         np.asarray(indptr, dtype=np.int32)),
        shape=(n, n))
    # adjacency is already symmetric; directed=True skips the min-merge pass
    return scipy.sparse.csgraph.dijkstra(g, directed=True)
