"""Channel dissimilarities: windowed CIR angle-delay comparison, k-NN graph,
geodesics.

The raw dissimilarity between two records compares, per (array, tap) cell
inside a common delay power window, the spatial signatures
h = vec(cir[b, :, :, t]):

    d_ij = (1 / S) sum_c ( q_c - |<h_i, h_j>|^2 / q_c ),   q_c = |h_i| |h_j|,
    S = sum_c q_c

which is the energy-weighted mean of (1 - cos^2) between cell signatures,
so d is in [0, 1], zero on the diagonal, symmetric, and invariant to global
phase. Geodesics over the k-NN graph then unroll the manifold.
"""

from dataclasses import dataclass

import numpy as np

from . import backend


class DisconnectedGraphError(RuntimeError):
    pass


def cir_from_csi(csi):
    """Per-antenna impulse response: inverse DFT across subcarriers (numpy
    1/N convention). A pure delay of k tap durations lands on tap k."""
    return np.fft.ifft(np.asarray(csi, dtype=np.complex128), axis=-1)


def power_window(cirs, eta=0.95):
    """Indices [0..T_w] of the leading taps holding at least a fraction eta
    of the total power, power pooled over every axis but the last."""
    p = np.abs(np.asarray(cirs)) ** 2
    profile = p.reshape(-1, p.shape[-1]).sum(axis=0)
    return _window_from_profile(profile, eta)


def _window_from_profile(profile, eta):
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must be in (0, 1]")
    total = profile.sum()
    if total <= 0.0:
        raise ValueError("zero-power dataset, delay window undefined")
    cum = np.cumsum(profile)
    idx = int(np.searchsorted(cum, eta * cum[-1]))
    idx = min(idx, profile.shape[0] - 1)
    return np.arange(idx + 1)


def adp_dissimilarity(cir_i, cir_j, window):
    """Reference single-pair dissimilarity, direct formula over the window."""
    a = np.asarray(cir_i, dtype=np.complex128)
    b = np.asarray(cir_j, dtype=np.complex128)
    if a.shape != b.shape:
        raise ValueError("CIR shapes differ")
    num = 0.0
    den = 0.0
    for bb in range(a.shape[0]):
        for t in window:
            hi = a[bb, :, :, t].ravel()
            hj = b[bb, :, :, t].ravel()
            q = float(np.linalg.norm(hi) * np.linalg.norm(hj))
            if q <= 0.0:
                continue
            inner = abs(np.vdot(hi, hj)) ** 2
            num += q - inner / q
            den += q
    if den <= 0.0:
        return 0.0
    return float(min(max(num / den, 0.0), 1.0))


def _windowed_signatures(dataset, eta, chunk=128):
    """Two passes over the records: find the common power window, then stack
    windowed CIR signatures as (L, B * T_w, M) with per-cell norms."""
    L = len(dataset)
    _, b, mr, mc, n = dataset.csi.shape
    profile = np.zeros(n)
    for at in range(0, L, chunk):
        cir = cir_from_csi(dataset.csi[at:at + chunk])
        profile += np.sum(np.abs(cir) ** 2, axis=(0, 1, 2, 3))
    window = _window_from_profile(profile, eta)
    tw = window.shape[0]

    h = np.empty((L, b * tw, mr * mc), dtype=np.complex128)
    for at in range(0, L, chunk):
        cir = cir_from_csi(dataset.csi[at:at + chunk])[..., window]
        # (l, b, mr, mc, t) -> (l, b, t, mr*mc)
        sig = np.transpose(cir, (0, 1, 4, 2, 3)).reshape(cir.shape[0], b * tw, mr * mc)
        h[at:at + chunk] = sig
    norms = np.linalg.norm(h, axis=2)
    return h, norms, window


def dissimilarity_matrix(dataset, eta=0.95):
    """All-pairs raw dissimilarity (L, L) float64: zero diagonal, symmetric,
    entries in [0, 1]. O(L^2) pair work runs on the active backend."""
    h, norms, _ = _windowed_signatures(dataset, eta)
    return backend.adp_pairwise(h, norms)


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph in CSR form, neighbor lists sorted."""
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray


def knn_graph(dm, k=20):
    """Union-symmetrized k-nearest-neighbor graph of a dissimilarity matrix:
    an edge survives if either endpoint selected it."""
    d = np.asarray(dm, dtype=np.float64)
    n = d.shape[0]
    if d.ndim != 2 or d.shape[1] != n:
        raise ValueError("dissimilarity matrix must be square")
    if not 1 <= k < n:
        raise ValueError("k must satisfy 1 <= k < n")
    adj = np.zeros((n, n), dtype=bool)
    order = np.argsort(d, axis=1, kind="stable")
    for i in range(n):
        picked = 0
        for j in order[i]:
            if j == i:
                continue
            adj[i, j] = True
            picked += 1
            if picked == k:
                break
    adj |= adj.T
    rows, cols = np.nonzero(adj)
    indptr = np.searchsorted(rows, np.arange(n + 1))
    return Graph(n=n, indptr=indptr.astype(np.int64),
                 indices=cols.astype(np.int64),
                 weights=d[rows, cols])


def connected_components(graph):
    """Component label per node (BFS), labels numbered by first appearance."""
    labels = np.full(graph.n, -1, dtype=np.int64)
    comp = 0
    for start in range(graph.n):
        if labels[start] >= 0:
            continue
        stack = [start]
        labels[start] = comp
        while stack:
            u = stack.pop()
            for e in range(graph.indptr[u], graph.indptr[u + 1]):
                v = int(graph.indices[e])
                if labels[v] < 0:
                    labels[v] = comp
                    stack.append(v)
        comp += 1
    return labels


def geodesic_matrix(graph):
    """All-pairs shortest-path distances over the graph. Raises
    DisconnectedGraphError (with component sizes) if any pair is unreachable;
    a larger k when building the graph usually reconnects it."""
    labels = connected_components(graph)
    n_comp = int(labels.max()) + 1
    if n_comp > 1:
        sizes = sorted((int(np.sum(labels == c)) for c in range(n_comp)), reverse=True)
        raise DisconnectedGraphError(
            "k-NN graph is disconnected (component sizes %s); rebuild with larger k"
            % sizes)
    return backend.dijkstra_all_pairs(graph.indptr, graph.indices,
                                      graph.weights, graph.n)
