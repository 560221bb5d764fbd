"""numba implementations of the hot kernels.

Parallelism is per-row with each thread writing disjoint output cells, so
results are bit-identical for any thread count. Kernels are cached to disk
(first call per process still pays a short JIT warmup).
"""

import warnings

import numpy as np

# this sandbox ships a TBB too old for numba's TBB layer; numba falls back
# to its internal layer and warns, which would pollute CLI output
warnings.filterwarnings("ignore", message="The TBB threading layer requires TBB version")

from numba import njit, prange


@njit(cache=True, parallel=True)
def _adp_fill(h_re, h_im, norms, out):
    L, C, M = h_re.shape
    for i in prange(L):
        out[i, i] = 0.0
        for j in range(i + 1, L):
            num = 0.0
            den = 0.0
            for c in range(C):
                p = norms[i, c] * norms[j, c]
                if p > 0.0:
                    re = 0.0
                    im = 0.0
                    for m in range(M):
                        ar = h_re[i, c, m]
                        ai = h_im[i, c, m]
                        br = h_re[j, c, m]
                        bi = h_im[j, c, m]
                        re += ar * br + ai * bi
                        im += ai * br - ar * bi
                    num += p - (re * re + im * im) / p
                    den += p
            v = num / den if den > 0.0 else 0.0
            if v < 0.0:
                v = 0.0
            out[i, j] = v
            out[j, i] = v


def adp_pairwise(h, norms):
    h = np.ascontiguousarray(h, dtype=np.complex128)
    norms = np.ascontiguousarray(norms, dtype=np.float64)
    L = h.shape[0]
    out = np.empty((L, L), dtype=np.float64)
    # split complex: scalar f64 arithmetic JITs tighter than complex128
    _adp_fill(np.ascontiguousarray(h.real), np.ascontiguousarray(h.imag),
              norms, out)
    return out


@njit(cache=True)
def _heap_push(keys, nodes, size, key, node):
    i = size
    keys[i] = key
    nodes[i] = node
    while i > 0:
        parent = (i - 1) >> 1
        if keys[parent] <= keys[i]:
            break
        keys[parent], keys[i] = keys[i], keys[parent]
        nodes[parent], nodes[i] = nodes[i], nodes[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(keys, nodes, size):
    top_key = keys[0]
    top_node = nodes[0]
    size -= 1
    keys[0] = keys[size]
    nodes[0] = nodes[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        right = left + 1
        child = left
        if right < size and keys[right] < keys[left]:
            child = right
        if keys[i] <= keys[child]:
            break
        keys[i], keys[child] = keys[child], keys[i]
        nodes[i], nodes[child] = nodes[child], nodes[i]
        i = child
    return top_key, top_node, size


@njit(cache=True)
def _dijkstra_row(indptr, indices, weights, src, dist):
    n = dist.shape[0]
    cap = indices.shape[0] + 1
    keys = np.empty(cap, dtype=np.float64)
    nodes = np.empty(cap, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    for v in range(n):
        dist[v] = np.inf
    dist[src] = 0.0
    size = _heap_push(keys, nodes, 0, 0.0, src)
    while size > 0:
        d, u, size = _heap_pop(keys, nodes, size)
        if done[u]:
            continue
        done[u] = True
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            nd = d + weights[e]
            if nd < dist[v]:
                dist[v] = nd
                size = _heap_push(keys, nodes, size, nd, v)


@njit(cache=True, parallel=True)
def _dijkstra_fill(indptr, indices, weights, out):
    n = out.shape[0]
    for s in prange(n):
        _dijkstra_row(indptr, indices, weights, s, out[s])


def dijkstra_all_pairs(indptr, indices, weights, n):
    out = np.empty((n, n), dtype=np.float64)
    _dijkstra_fill(np.ascontiguousarray(indptr, dtype=np.int64),
                   np.ascontiguousarray(indices, dtype=np.int64),
                   np.ascontiguousarray(weights, dtype=np.float64),
                   out)
    return out
