"""Multistory charting: cluster a global 3-D chart into floors, train one
2-D expert per floor on recomputed within-floor geodesics, and assemble
3-D positions from expert (x, y) plus per-floor chart height.

Independently trained experts land in arbitrary 2-D frames, so each expert
chart is affine-aligned to the stage-0 chart's (x, y) over its own records
(self-supervised, no ground truth involved); the assembled chart therefore
lives in a single frame that one global affine can map to world coordinates.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.optimize

from .chartnet import infer, train_fcf
from .evalkit import apply_affine, optimal_affine


@dataclass(frozen=True)
class FloorAssignment:
    labels: np.ndarray     # (L,) int
    centroids: np.ndarray  # (K, dim)
    inertia: float


@dataclass
class MultistoryModel:
    stage0: object                # MlpParams of the global 3-D chart
    assignment: FloorAssignment
    experts: list                 # per cluster MlpParams (2-D)
    aligners: list                # per cluster AffineTransform (2-D)
    floor_heights: np.ndarray     # (K,)


def kmeans(points, k, seed=0, max_iter=300, restarts=1):
    """Seeded k-means++ initialization followed by Lloyd iterations.

    Empty clusters are reseeded at the point currently farthest from its
    assigned centroid. Inertia is checked to be non-increasing on every run.
    With restarts > 1 the whole procedure reruns on consecutive seeds and
    the lowest-inertia solution wins; a single k-means++ draw lands in a
    poor local optimum often enough to matter. Returns
    (labels, centroids, inertia).
    """
    if restarts > 1:
        best = None
        for r in range(restarts):
            cand = kmeans(points, k, seed=seed + r, max_iter=max_iter)
            if best is None or cand[2] < best[2]:
                best = cand
        return best
    x = np.asarray(points, dtype=np.float64)
    n = x.shape[0]
    if k < 1 or k > n:
        raise ValueError("k must be in [1, n]")
    if np.unique(x, axis=0).shape[0] < k:
        raise ValueError("fewer than k distinct points")
    rng = np.random.default_rng(seed)

    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = np.sum((x - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centroids[c] = x[rng.integers(n)]
        else:
            centroids[c] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centroids[c]) ** 2, axis=1))

    prev_inertia = np.inf
    labels = None
    for _ in range(max_iter):
        dist2 = np.sum((x[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(dist2, axis=1)
        inertia = float(dist2[np.arange(n), new_labels].sum())
        if inertia > prev_inertia + 1e-9 * max(1.0, prev_inertia):
            raise RuntimeError("k-means inertia increased, update step is broken")
        prev_inertia = inertia
        if labels is not None and np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        for c in range(k):
            members = labels == c
            if np.any(members):
                centroids[c] = x[members].mean(axis=0)
            else:
                worst = int(np.argmax(dist2[np.arange(n), labels]))
                centroids[c] = x[worst]
    return labels, centroids, prev_inertia


def classify_floors(chart3d, n_floor, seed=0, restarts=16):
    """Cluster 3-D chart coordinates into floor groups.

    Floors come out of training as a stack of flat, well-separated blobs;
    restarts keep a single unlucky k-means++ draw from slicing across them.
    """
    labels, centroids, inertia = kmeans(chart3d, n_floor, seed=seed,
                                        restarts=restarts)
    return FloorAssignment(labels=labels, centroids=centroids, inertia=inertia)


def match_clusters_to_floors(labels, true_floors):
    """Optimal cluster-to-floor matching for evaluation only.

    Returns (mapping, error_rate): mapping[c] is the floor assigned to
    cluster c by a maximum-agreement assignment, error_rate the fraction of
    records whose matched floor disagrees with the true label.
    """
    labels = np.asarray(labels)
    truth = np.asarray(true_floors)
    if labels.shape != truth.shape:
        raise ValueError("label arrays must have the same length")
    k = int(labels.max()) + 1
    f = int(truth.max()) + 1
    side = max(k, f)
    confusion = np.zeros((side, side), dtype=np.int64)
    for c, t in zip(labels, truth):
        confusion[c, t] += 1
    rows, cols = scipy.optimize.linear_sum_assignment(-confusion)
    mapping = np.empty(side, dtype=np.int64)
    mapping[rows] = cols
    matched = confusion[rows, cols].sum()
    return mapping[:k], float(1.0 - matched / labels.shape[0])


def train_multistory(dataset, features, dissim_fn, config, n_floor=None,
                     min_floor_size=50, kmeans_seed=0):
    """Full two-stage pipeline.

    dissim_fn(dataset) must return the geodesic dissimilarity matrix for any
    record subset; it is called once globally and once per floor cluster so
    within-floor structure is recomputed, never sliced. config drives the
    2-D experts; the stage-0 network reuses it with out_dim 3. n_floor
    defaults to the number of distinct floor labels in the dataset.
    """
    feats = np.asarray(features, dtype=np.float64)
    if n_floor is None:
        if dataset.floor_labels is None:
            raise ValueError("n_floor not given and dataset has no floor labels")
        n_floor = int(np.unique(dataset.floor_labels).shape[0])

    stage0_cfg = replace(config, out_dim=3)
    dm0 = dissim_fn(dataset)
    stage0 = train_fcf(feats, dm0, stage0_cfg)
    chart3 = infer(stage0.params, feats)
    assignment = classify_floors(chart3, n_floor, seed=kmeans_seed)

    experts = []
    aligners = []
    heights = np.empty(n_floor)
    for c in range(n_floor):
        idx = np.flatnonzero(assignment.labels == c)
        if idx.shape[0] < min_floor_size:
            raise RuntimeError("floor cluster %d has only %d records (min %d)"
                               % (c, idx.shape[0], min_floor_size))
        sub = dataset.subset(idx)
        dm_c = dissim_fn(sub)
        expert_cfg = replace(config, out_dim=2, rng_seed=config.rng_seed + 1 + c)
        expert = train_fcf(feats[idx], dm_c, expert_cfg)
        z2 = infer(expert.params, feats[idx])
        aligners.append(optimal_affine(z2, chart3[idx, :2]))
        heights[c] = float(chart3[idx, 2].mean())
        experts.append(expert.params)
    return MultistoryModel(stage0=stage0.params, assignment=assignment,
                           experts=experts, aligners=aligners,
                           floor_heights=heights)


def assemble_positions(model, features, labels=None):
    """3-D chart positions: expert (x, y) mapped through its aligner, height
    from the record's floor cluster. labels defaults to the training
    assignment and must index a valid cluster per record."""
    feats = np.asarray(features, dtype=np.float64)
    if labels is None:
        labels = model.assignment.labels
    labels = np.asarray(labels)
    if labels.shape[0] != feats.shape[0]:
        raise ValueError("labels length does not match features")
    k = len(model.experts)
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError("cluster label outside [0, %d)" % k)
    out = np.empty((feats.shape[0], 3))
    for c in range(k):
        idx = np.flatnonzero(labels == c)
        if idx.shape[0] == 0:
            continue
        z2 = infer(model.experts[c], feats[idx])
        out[idx, :2] = apply_affine(model.aligners[c], z2)
        out[idx, 2] = model.floor_heights[c]
    return out
