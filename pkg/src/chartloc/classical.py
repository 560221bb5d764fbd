"""Classical baseline: subspace angle estimation and likelihood triangulation.

Each array yields an azimuth/elevation estimate via 1-D root-MUSIC on the
column-direction and row-direction sample covariances (signal subspace
dimension fixed to one). Estimates carry a von Mises-Fisher concentration
derived from the delay spread, and a position is recovered by maximizing the
summed vMF log likelihood over a search region.
"""

import math
from dataclasses import dataclass

import numpy as np

LOG_4PI = math.log(4.0 * math.pi)


class AmbiguousAngleError(ValueError):
    """Spatial frequency outside the visible region."""


class GimbalLockError(ValueError):
    """Elevation too close to +-pi/2 for azimuth to be defined."""


class UninformativeError(ValueError):
    """Every estimate carries near-zero concentration."""


@dataclass(frozen=True)
class AoaEstimate:
    """Angle estimate from one array. azimuth/elevation and unit_direction
    live in the array's local frame (x boresight, y columns, z rows)."""
    array_index: int
    azimuth: float
    elevation: float
    unit_direction: np.ndarray
    kappa: float


def _csi_array(csi):
    return np.asarray(csi, dtype=np.complex128)


def covariance_azimuth(csi, b):
    """Column-space sample covariance (cols x cols): snapshots are the
    length-M_col element rows, pooled over rows and subcarriers."""
    h = _csi_array(csi)[b]
    mr, mc, n = h.shape
    x = np.transpose(h, (1, 0, 2)).reshape(mc, mr * n)
    return x @ x.conj().T


def covariance_elevation(csi, b):
    """Row-space sample covariance (rows x rows), pooled over columns and
    subcarriers."""
    h = _csi_array(csi)[b]
    mr, mc, n = h.shape
    x = h.reshape(mr, mc * n)
    return x @ x.conj().T


def root_music_1d(cov, spacing_wavelengths):
    """Single-source root-MUSIC on a uniform line of sensors.

    Returns the normalized spatial frequency u in [-1, 1] (direction cosine
    along the line for spacing given in wavelengths). The noise projector is
    built from the M - 1 smallest eigenvectors; among the polynomial roots
    strictly inside the unit circle the one closest to it is taken,
    u = arg(root) / (2 pi spacing_wavelengths).
    """
    r = np.asarray(cov, dtype=np.complex128)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("covariance must be square")
    m = r.shape[0]
    if m < 2:
        raise ValueError("root-MUSIC needs at least 2 elements")
    if not np.any(r):
        raise ValueError("all-zero covariance")
    if spacing_wavelengths <= 0:
        raise ValueError("spacing_wavelengths must be positive")
    r = 0.5 * (r + r.conj().T)
    _, vec = np.linalg.eigh(r)
    noise = vec[:, :m - 1]
    c = noise @ noise.conj().T
    coeffs = np.array([np.trace(c, offset=k) for k in range(m - 1, -m, -1)])
    roots = np.roots(coeffs)
    inside = roots[np.abs(roots) < 1.0 + 1e-12]
    if inside.size == 0:
        raise ValueError("no polynomial root inside the unit circle")
    root = inside[np.argmax(np.abs(inside))]
    u = float(np.angle(root) / (2.0 * math.pi * spacing_wavelengths))
    if abs(u) > 1.0 + 1e-6:
        raise AmbiguousAngleError("spatial frequency %.6f outside [-1, 1]" % u)
    return float(np.clip(u, -1.0, 1.0))


def rms_delay_spread(csi, b, bandwidth_hz):
    """Power-weighted RMS spread of the tap delays of array b's impulse
    response, tap powers averaged over the array elements. Tap k sits at
    delay k / bandwidth_hz."""
    h = _csi_array(csi)[b]
    cir = np.fft.ifft(h, axis=-1)
    p = np.mean(np.abs(cir) ** 2, axis=(0, 1))
    total = float(p.sum())
    if total <= 0.0:
        raise ValueError("zero-power channel, delay spread undefined")
    t = np.arange(p.shape[0]) / bandwidth_hz
    mean = float((p * t).sum() / total)
    var = float((p * (t - mean) ** 2).sum() / total)
    return math.sqrt(max(var, 0.0))


def concentration(delay_spread, bandwidth_hz, kappa_max=200.0):
    """Map delay spread to a vMF concentration:
    kappa_max / (1 + (spread / tau_0)^2) with tau_0 = 1 / bandwidth_hz.
    Clean single-path channels approach kappa_max, dispersive ones fall off."""
    tau0 = 1.0 / bandwidth_hz
    return float(kappa_max / (1.0 + (delay_spread / tau0) ** 2))


def estimate_aoa(csi, b, array, config):
    """Full per-array angle estimate from one snapshot.

    Elevation comes from the row covariance (v = sin el), azimuth from the
    column covariance (u = cos el sin az). Requires at least a 2 x 2 array.
    """
    if array.rows < 2 or array.cols < 2:
        raise ValueError("angle estimation needs rows >= 2 and cols >= 2")
    nu = array.element_spacing / config.wavelength
    v = root_music_1d(covariance_elevation(csi, b), nu)
    el = math.asin(v)
    if abs(el) > math.pi / 2 - 1e-3:
        raise GimbalLockError("elevation %.4f rad too close to the pole" % el)
    u = root_music_1d(covariance_azimuth(csi, b), nu)
    az = math.asin(min(1.0, max(-1.0, u / math.cos(el))))
    direction = np.array([math.cos(el) * math.cos(az),
                          math.cos(el) * math.sin(az),
                          math.sin(el)])
    kappa = concentration(rms_delay_spread(csi, b, config.bandwidth_hz),
                          config.bandwidth_hz)
    return AoaEstimate(array_index=b, azimuth=az, elevation=el,
                       unit_direction=direction, kappa=kappa)


def estimate_all_aoa(dataset):
    """Per-record estimate lists over all arrays; arrays whose estimate is
    degenerate (gimbal lock, ambiguous frequency) are silently dropped for
    that record."""
    out = []
    for l in range(len(dataset)):
        row = []
        for b in range(dataset.n_arrays):
            try:
                row.append(estimate_aoa(dataset.csi[l], b, dataset.arrays[b],
                                        dataset.config))
            except (AmbiguousAngleError, GimbalLockError, ValueError):
                continue
        out.append(row)
    return out


def _log_sinh(kappa):
    # stable for large kappa; series for tiny kappa
    k = np.asarray(kappa, dtype=np.float64)
    small = k < 1e-4
    out = np.where(small,
                   np.log(np.where(small, np.maximum(k, 1e-300), 1.0)) + k * k / 6.0,
                   k - math.log(2.0) + np.log1p(-np.exp(-2.0 * np.where(small, 1.0, k))))
    return out


def aoa_log_likelihood(x, estimates, arrays):
    """Sum over estimates of the vMF log density of the direction from array
    b to x: log kappa - log 4 pi - log sinh kappa + kappa <u_world, r_hat>."""
    x = np.asarray(x, dtype=np.float64).reshape(3)
    total = 0.0
    for est in estimates:
        arr = arrays[est.array_index]
        r = x - arr.position
        nr = float(np.linalg.norm(r))
        if nr < 1e-9:
            raise ValueError("evaluation point coincides with array %d" % est.array_index)
        g = arr.orientation @ est.unit_direction
        k = float(est.kappa)
        if k <= 0.0:
            raise ValueError("non-positive concentration")
        total += math.log(k) - LOG_4PI - float(_log_sinh(k)) + k * float(g @ r) / nr
    return total


def aoa_log_likelihood_grad(x, estimates, arrays):
    """Analytic gradient of aoa_log_likelihood with respect to x."""
    x = np.asarray(x, dtype=np.float64).reshape(3)
    grad = np.zeros(3)
    for est in estimates:
        arr = arrays[est.array_index]
        r = x - arr.position
        nr = float(np.linalg.norm(r))
        if nr < 1e-9:
            raise ValueError("evaluation point coincides with array %d" % est.array_index)
        rhat = r / nr
        g = arr.orientation @ est.unit_direction
        k = float(est.kappa)
        grad += k * (g - float(g @ rhat) * rhat) / nr
    return grad


@dataclass(frozen=True)
class PackedEstimates:
    """Vectorized view of per-record estimate lists: fixed array positions
    plus per-record world-frame mean directions, concentrations and a
    validity mask. Lets likelihoods evaluate in bulk during training."""
    array_positions: np.ndarray   # (B, 3)
    g_world: np.ndarray           # (L, B, 3)
    kappa: np.ndarray             # (L, B)
    mask: np.ndarray              # (L, B) bool
    const: np.ndarray             # (L,) sum of x-independent terms


def pack_estimates(per_record, arrays):
    L = len(per_record)
    B = len(arrays)
    g = np.zeros((L, B, 3))
    kap = np.zeros((L, B))
    mask = np.zeros((L, B), dtype=bool)
    for l, row in enumerate(per_record):
        for est in row:
            b = est.array_index
            g[l, b] = arrays[b].orientation @ est.unit_direction
            kap[l, b] = est.kappa
            mask[l, b] = True
    with np.errstate(divide="ignore"):
        logk = np.where(mask, np.log(np.maximum(kap, 1e-300)), 0.0)
    const = np.sum(np.where(mask, logk - LOG_4PI - _log_sinh(np.maximum(kap, 1e-300)), 0.0),
                   axis=1)
    pos = np.stack([a.position for a in arrays])
    return PackedEstimates(array_positions=pos, g_world=g, kappa=kap,
                           mask=mask, const=const)


def packed_loglik_grad(x, packed, idx):
    """Log likelihood and gradient for rows idx of a packed estimate table at
    positions x (n, 3). Distances are floored at 1e-6 so transient iterates
    that graze an array stay finite."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    idx = np.asarray(idx, dtype=np.intp)
    p = packed.array_positions
    r = x[:, None, :] - p[None, :, :]
    nr = np.maximum(np.linalg.norm(r, axis=2), 1e-6)
    rhat = r / nr[:, :, None]
    g = packed.g_world[idx]
    k = np.where(packed.mask[idx], packed.kappa[idx], 0.0)
    dot = np.sum(g * rhat, axis=2)
    ll = packed.const[idx] + np.sum(k * dot, axis=1)
    grad = np.sum((k / nr)[:, :, None] * (g - dot[:, :, None] * rhat), axis=1)
    return ll, grad


def _grid_axis(lo, hi, pitch):
    span = hi - lo
    if span <= pitch:
        return np.array([0.5 * (lo + hi)])
    return np.arange(lo + pitch / 2.0, hi, pitch)


def triangulate(estimates, arrays, region, grid_pitch=0.5, ascent_steps=200):
    """Maximum-likelihood position from a set of angle estimates.

    Coarse-to-fine: evaluate the summed vMF log likelihood on a grid of cell
    centers (default 0.5 m pitch) over the region, then refine from the best
    cell with gradient ascent and backtracking, iterates clamped to the
    region. Deterministic. region is (lo, hi) arrays of world coordinates.
    """
    lo = np.asarray(region[0], dtype=np.float64).reshape(3)
    hi = np.asarray(region[1], dtype=np.float64).reshape(3)
    if np.any(lo >= hi):
        raise ValueError("degenerate search region (lo >= hi)")
    if not estimates:
        raise UninformativeError("no angle estimates supplied")
    if max(e.kappa for e in estimates) < 1e-3:
        raise UninformativeError("all concentrations near zero")

    packed = pack_estimates([list(estimates)], arrays)
    axes = [_grid_axis(lo[a], hi[a], grid_pitch) for a in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    best = -np.inf
    x = grid[0].copy()
    for at in range(0, grid.shape[0], 65536):  # bound the (points x arrays) temporaries
        chunk = grid[at:at + 65536]
        ll, _ = packed_loglik_grad(chunk, packed, np.zeros(chunk.shape[0], dtype=np.intp))
        j = int(np.argmax(ll))
        if float(ll[j]) > best:
            best = float(ll[j])
            x = chunk[j].copy()

    one = np.zeros(1, dtype=np.intp)
    _, g0 = packed_loglik_grad(x[None, :], packed, one)
    gn = float(np.linalg.norm(g0[0]))
    step = (grid_pitch / 2.0) / gn if gn > 0 else grid_pitch
    for _ in range(ascent_steps):
        _, g = packed_loglik_grad(x[None, :], packed, one)
        g = g[0]
        if float(np.linalg.norm(g)) < 1e-12:
            break
        moved = False
        for _ in range(30):
            cand = np.clip(x + step * g, lo, hi)
            cll, _ = packed_loglik_grad(cand[None, :], packed, one)
            if float(cll[0]) > best:
                x = cand
                best = float(cll[0])
                step *= 1.3
                moved = True
                break
            step *= 0.5
        if not moved:
            break
    return x


def triangulate_dataset(dataset, region=None, grid_pitch=0.5, ascent_steps=200,
                        estimates=None):
    """Triangulate every record. Returns (positions (L, 3), estimate lists).
    When region is not given it defaults to the array bounding box padded by
    2 m in x/y with z spanning [min(0, z_lo - 2), z_hi + 2]."""
    if estimates is None:
        estimates = estimate_all_aoa(dataset)
    if region is None:
        pos = np.stack([a.position for a in dataset.arrays])
        lo = pos.min(axis=0) - 2.0
        hi = pos.max(axis=0) + 2.0
        lo[2] = min(lo[2], 0.0)
        region = (lo, hi)
    out = np.empty((len(dataset), 3))
    for l, row in enumerate(estimates):
        out[l] = triangulate(row, dataset.arrays, region,
                             grid_pitch=grid_pitch, ascent_steps=ascent_steps)
    return out, estimates
