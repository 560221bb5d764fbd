"""Forward charting function: a six-layer MLP trained on pairs.

Architecture is fixed: five ReLU hidden layers of widths 1024, 512, 256,
128, 64 and a linear output of 2 or 3 chart coordinates. Training samples
record pairs, compares chart distances against target dissimilarities with
the Siamese loss

    (d_ij - |z_i - z_j|)^2 / (d_ij + beta)

optionally augmented with per-record angle-likelihood terms

    (1 - lambda) (d_ij - |z_i - z_j|)^2 - lambda (LL(z_i) + LL(z_j))

where each of the two terms is divided by a running estimate of its
magnitude so neither dominates. All math is float64 and gradients are exact
(they are checked against finite differences in the test suite).

Checkpoint container (little-endian):
    magic b"CCNN" | u16 version=1 | u32 header_len | header JSON |
    per layer: weight matrix (in x out, row-major) then bias, float32.
"""

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .classical import packed_loglik_grad

HIDDEN_WIDTHS = (1024, 512, 256, 128, 64)

NN_MAGIC = b"CCNN"
NN_VERSION = 1


@dataclass
class MlpParams:
    weights: list   # per layer, shape (fan_in, fan_out), float64
    biases: list    # per layer, shape (fan_out,), float64

    @property
    def in_dim(self):
        return self.weights[0].shape[0]

    @property
    def out_dim(self):
        return self.weights[-1].shape[1]

    def copy(self):
        return MlpParams(weights=[w.copy() for w in self.weights],
                         biases=[b.copy() for b in self.biases])


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for train_fcf. loss is "siamese" or "augmented"; an epoch is
    ceil(L / batch_pairs) sampled batches."""
    out_dim: int = 3
    epochs: int = 200
    batch_pairs: int = 512
    learning_rate: float = 1e-3
    beta: float = 0.2
    lam: float = 0.5
    loss: str = "siamese"
    rng_seed: int = 0


@dataclass
class TrainResult:
    params: MlpParams
    epoch_losses: list


def init_params(seed, in_dim, out_dim):
    """Glorot-uniform weights, zero biases. Layer draws happen in order, so
    a seed pins the full initialization."""
    if out_dim not in (2, 3):
        raise ValueError("out_dim must be 2 or 3")
    if in_dim < 1:
        raise ValueError("in_dim must be >= 1")
    rng = np.random.default_rng(seed)
    dims = (in_dim,) + HIDDEN_WIDTHS + (out_dim,)
    weights = []
    biases = []
    for a, b in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / (a + b))
        weights.append(rng.uniform(-bound, bound, size=(a, b)))
        biases.append(np.zeros(b))
    return MlpParams(weights=weights, biases=biases)


def _forward_cached(params, x):
    acts = [x]
    pre = []
    a = x
    last = len(params.weights) - 1
    for li, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        pre.append(z)
        a = z if li == last else np.maximum(z, 0.0)
        acts.append(a)
    return acts, pre


def mlp_forward(params, features):
    """Chart coordinates for feature rows (or a single vector)."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != params.in_dim:
        raise ValueError("feature dim %d does not match network input %d"
                         % (x.shape[1], params.in_dim))
    acts, _ = _forward_cached(params, x)
    out = acts[-1]
    return out[0] if single else out


def infer(params, features, chunk=4096):
    """Batched mlp_forward."""
    x = np.asarray(features, dtype=np.float64)
    out = np.empty((x.shape[0], params.out_dim))
    for at in range(0, x.shape[0], chunk):
        out[at:at + chunk] = mlp_forward(params, x[at:at + chunk])
    return out


def siamese_loss(z_i, z_j, d, beta=0.2):
    """Mean over pairs of (d - |z_i - z_j|)^2 / (d + beta)."""
    zi = np.atleast_2d(np.asarray(z_i, dtype=np.float64))
    zj = np.atleast_2d(np.asarray(z_j, dtype=np.float64))
    d = np.atleast_1d(np.asarray(d, dtype=np.float64))
    dist = np.linalg.norm(zi - zj, axis=1)
    return float(np.mean((d - dist) ** 2 / (d + beta)))


def augmented_loss(z_i, z_j, d, lam, loglik):
    """Single-pair augmented objective with an explicit log-likelihood
    callable (no term normalization at this level)."""
    zi = np.asarray(z_i, dtype=np.float64)
    zj = np.asarray(z_j, dtype=np.float64)
    e = float(d) - float(np.linalg.norm(zi - zj))
    return (1.0 - lam) * e * e - lam * (float(loglik(zi)) + float(loglik(zj)))


def _backward(params, acts, pre, d_out):
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.weights)
    delta = d_out
    for li in range(len(params.weights) - 1, -1, -1):
        if li != len(params.weights) - 1:
            delta = delta * (pre[li] > 0.0)
        grads_w[li] = acts[li].T @ delta
        grads_b[li] = delta.sum(axis=0)
        if li > 0:
            delta = delta @ params.weights[li].T
    return grads_w, grads_b


def loss_gradients(params, f_i, f_j, d, config, packed=None, idx_i=None,
                   idx_j=None, term_scales=(1.0, 1.0)):
    """Mean batch loss and exact parameter gradients.

    f_i, f_j: (P, in_dim) feature rows of the two pair sides; d: (P,) target
    dissimilarities. For the augmented loss, packed/idx_i/idx_j supply the
    angle-likelihood table and the record row of each pair side, and
    term_scales = (distance_scale, likelihood_scale) are treated as
    constants. Returns (loss, grads_w, grads_b, raw_terms) where raw_terms
    holds the unscaled magnitudes of the two loss components.
    """
    f_i = np.asarray(f_i, dtype=np.float64)
    f_j = np.asarray(f_j, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    p = f_i.shape[0]
    x = np.concatenate([f_i, f_j], axis=0)
    acts, pre = _forward_cached(params, x)
    z = acts[-1]
    zi, zj = z[:p], z[p:]

    delta = zi - zj
    dist = np.linalg.norm(delta, axis=1)
    err = d - dist
    safe = np.where(dist > 0.0, dist, 1.0)
    unit = delta / safe[:, None] * (dist > 0.0)[:, None]

    if config.loss == "siamese":
        loss = float(np.mean(err ** 2 / (d + config.beta)))
        coeff = (-2.0 * err / (d + config.beta)) / p
        dz_i = coeff[:, None] * unit
        dz_j = -dz_i
        raw = (loss, 0.0)
    elif config.loss == "augmented":
        if packed is None or idx_i is None or idx_j is None:
            raise ValueError("augmented loss needs packed estimates and pair row indices")
        if z.shape[1] != 3:
            raise ValueError("augmented loss requires 3-D chart output")
        s_dis, s_lik = term_scales
        ll_i, g_i = packed_loglik_grad(zi, packed, idx_i)
        ll_j, g_j = packed_loglik_grad(zj, packed, idx_j)
        term_dis = float(np.mean(err ** 2))
        term_lik = float(np.mean(ll_i + ll_j))
        lam = config.lam
        loss = (1.0 - lam) * term_dis / s_dis - lam * term_lik / s_lik
        coeff = (-2.0 * err * (1.0 - lam) / s_dis) / p
        dz_i = coeff[:, None] * unit - (lam / (s_lik * p)) * g_i
        dz_j = -coeff[:, None] * unit - (lam / (s_lik * p)) * g_j
        raw = (term_dis, term_lik)
    else:
        raise ValueError("unknown loss %r" % config.loss)

    d_out = np.concatenate([dz_i, dz_j], axis=0)
    grads_w, grads_b = _backward(params, acts, pre, d_out)
    return float(loss), grads_w, grads_b, raw


def _sample_distinct(rng, n, size):
    """size distinct integers in [0, n) without materializing a permutation
    of n (batches are far smaller than the pair count)."""
    picked = rng.integers(0, n, size=size)
    seen = np.unique(picked)
    while seen.shape[0] < size:
        extra = rng.integers(0, n, size=size - seen.shape[0])
        seen = np.unique(np.concatenate([seen, extra]))
    if seen.shape[0] > size:
        seen = rng.permutation(seen)[:size]
    return seen


def train_fcf(features, target, config, packed=None):
    """Train a charting network against a target dissimilarity matrix.

    features: (L, in_dim) float64. target: (L, L) symmetric dissimilarities.
    With config.loss == "augmented", packed carries the per-record angle
    estimates (see classical.pack_estimates) and the likelihood terms are
    evaluated at the chart outputs, each loss component divided by an
    exponential moving average (decay 0.9) of its own magnitude.

    Returns TrainResult with trained params and the per-epoch mean loss.
    epochs == 0 returns the initialization untouched.
    """
    feats = np.asarray(features, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    n = feats.shape[0]
    if tgt.shape != (n, n):
        raise ValueError("target matrix shape %s does not match %d records"
                         % (tgt.shape, n))
    if n < 2:
        raise ValueError("need at least two records to form pairs")
    if config.loss == "augmented" and packed is None:
        raise ValueError("augmented training needs packed angle estimates")

    seed_init, seed_pairs = np.random.SeedSequence(config.rng_seed).spawn(2)
    params = init_params(seed_init, feats.shape[1], config.out_dim)
    rng = np.random.default_rng(seed_pairs)

    ii, jj = np.triu_indices(n, k=1)
    n_pairs = ii.shape[0]
    batch = int(min(config.batch_pairs, n_pairs))
    steps = max(1, math.ceil(n / config.batch_pairs))

    m_w = [np.zeros_like(w) for w in params.weights]
    v_w = [np.zeros_like(w) for w in params.weights]
    m_b = [np.zeros_like(b) for b in params.biases]
    v_b = [np.zeros_like(b) for b in params.biases]
    b1, b2, eps = 0.9, 0.999, 1e-8
    t = 0
    s_dis = s_lik = None

    epoch_losses = []
    for epoch in range(config.epochs):
        acc = 0.0
        for _ in range(steps):
            q = _sample_distinct(rng, n_pairs, batch)
            pi, pj = ii[q], jj[q]
            scales = (1.0, 1.0)
            if config.loss == "augmented":
                scales = (max(s_dis, 1e-12) if s_dis is not None else 1.0,
                          max(s_lik, 1e-12) if s_lik is not None else 1.0)
            loss, gw, gb, raw = loss_gradients(
                params, feats[pi], feats[pj], tgt[pi, pj], config,
                packed=packed, idx_i=pi, idx_j=pj, term_scales=scales)
            if not math.isfinite(loss):
                raise RuntimeError("training diverged at epoch %d" % epoch)
            if config.loss == "augmented":
                r_dis, r_lik = abs(raw[0]), abs(raw[1])
                s_dis = r_dis if s_dis is None else 0.9 * s_dis + 0.1 * r_dis
                s_lik = r_lik if s_lik is None else 0.9 * s_lik + 0.1 * r_lik
            t += 1
            corr = math.sqrt(1.0 - b2 ** t) / (1.0 - b1 ** t)
            for li in range(len(params.weights)):
                m_w[li] = b1 * m_w[li] + (1 - b1) * gw[li]
                v_w[li] = b2 * v_w[li] + (1 - b2) * gw[li] ** 2
                params.weights[li] -= config.learning_rate * corr * m_w[li] / (np.sqrt(v_w[li]) + eps)
                m_b[li] = b1 * m_b[li] + (1 - b1) * gb[li]
                v_b[li] = b2 * v_b[li] + (1 - b2) * gb[li] ** 2
                params.biases[li] -= config.learning_rate * corr * m_b[li] / (np.sqrt(v_b[li]) + eps)
            acc += loss
        epoch_losses.append(acc / steps)
    return TrainResult(params=params, epoch_losses=epoch_losses)


def fit_scale_factor(dm, positions, n_pairs=100000, seed=0):
    """Least-squares factor s minimizing sum (s d_ij - |x_i - x_j|)^2 over a
    seeded pair subset (all pairs when fewer than n_pairs exist)."""
    d = np.asarray(dm, dtype=np.float64)
    x = np.asarray(positions, dtype=np.float64)
    n = d.shape[0]
    ii, jj = np.triu_indices(n, k=1)
    total = ii.shape[0]
    if total > n_pairs:
        rng = np.random.default_rng(seed)
        q = rng.choice(total, size=n_pairs, replace=False)
        ii, jj = ii[q], jj[q]
    dv = d[ii, jj]
    ev = np.linalg.norm(x[ii] - x[jj], axis=1)
    denom = float(np.sum(dv * dv))
    if denom <= 0.0:
        raise ValueError("all sampled dissimilarities are zero, scale undefined")
    return float(np.sum(dv * ev) / denom)


def scale_dissimilarities(dm, positions, n_pairs=100000, seed=0):
    """Rescale a dissimilarity matrix into meters using anchor positions
    (typically triangulated ones)."""
    return np.asarray(dm, dtype=np.float64) * fit_scale_factor(
        dm, positions, n_pairs=n_pairs, seed=seed)


def save_params(params, path, norm_stats_id=None, meta=None):
    header = {
        "in_dim": int(params.in_dim),
        "hidden": list(HIDDEN_WIDTHS),
        "out_dim": int(params.out_dim),
        "norm_stats_id": norm_stats_id,
        "meta": meta or {},
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(NN_MAGIC)
        f.write(np.array([NN_VERSION], dtype="<u2").tobytes())
        f.write(np.array([len(blob)], dtype="<u4").tobytes())
        f.write(blob)
        for w, b in zip(params.weights, params.biases):
            f.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def load_params(path):
    """Returns (MlpParams upcast to float64, header dict)."""
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] != NN_MAGIC:
        raise ValueError("bad checkpoint magic %r" % buf[:4])
    version = int(np.frombuffer(buf, dtype="<u2", count=1, offset=4)[0])
    if version != NN_VERSION:
        raise ValueError("checkpoint version %d unsupported" % version)
    hlen = int(np.frombuffer(buf, dtype="<u4", count=1, offset=6)[0])
    header = json.loads(buf[10:10 + hlen].decode("utf-8"))
    dims = [int(header["in_dim"])] + [int(v) for v in header["hidden"]] + [int(header["out_dim"])]
    off = 10 + hlen
    weights = []
    biases = []
    for a, b in zip(dims[:-1], dims[1:]):
        w = np.frombuffer(buf, dtype="<f4", count=a * b, offset=off).reshape(a, b)
        off += 4 * a * b
        bias = np.frombuffer(buf, dtype="<f4", count=b, offset=off)
        off += 4 * b
        weights.append(w.astype(np.float64))
        biases.append(bias.astype(np.float64))
    if off != len(buf):
        raise ValueError("checkpoint payload size mismatch")
    return MlpParams(weights=weights, biases=biases), header
