"""Beamspace feature extraction for the charting networks.

A CSI tensor is mapped per array to a 2x zero-padded spatial DFT (the
beamspace), reduced to a per-beam power map and a per-beam delay proxy (phase
slope across subcarriers), and flattened to one real feature vector. Powers
go to dB and every dimension is z-scored with statistics fitted on a
training set; the fitted normalizer is content-addressed so downstream
artifacts can verify they were produced with matching statistics.
"""

import hashlib
import struct
from dataclasses import dataclass

import numpy as np


def _csi_array(csi):
    return np.asarray(csi, dtype=np.complex128)


def beamspace(csi):
    """Unnormalized 2-D spatial DFT with 2x zero padding.

    (B, M_row, M_col, N) -> (B, 2 M_row, 2 M_col, N) complex. Beam bin
    (u_el, u_az) collects spatial frequency 2 pi u / U per axis.
    """
    h = _csi_array(csi)
    b, mr, mc, n = h.shape
    padded = np.zeros((b, 2 * mr, 2 * mc, n), dtype=np.complex128)
    padded[:, :mr, :mc, :] = h
    return np.fft.fft2(padded, axes=(1, 2))


def beam_power(bs):
    """Per-beam energy summed over subcarriers: (B, U_el, U_az) float."""
    bs = np.asarray(bs)
    return np.sum(np.abs(bs) ** 2, axis=-1)


def beam_delay(bs):
    """Per-beam delay proxy: the phase of the mean cross-subcarrier
    correlation, arg(sum_n H[n+1] conj(H[n])). A pure delay tau gives
    -2 pi subcarrier_spacing tau in every occupied beam. Empty beams
    (zero correlation) map to 0 by convention."""
    bs = np.asarray(bs)
    corr = np.sum(bs[..., 1:] * np.conj(bs[..., :-1]), axis=-1)
    return np.angle(corr)


@dataclass(frozen=True)
class Normalizer:
    """Feature normalization state: dB floor for powers plus per-dimension
    z-scoring. stats_id is a content hash so files produced from different
    statistics never silently mix."""
    mean: np.ndarray
    std: np.ndarray          # already floored at epsilon
    eps_power: float
    epsilon: float
    stats_id: str

    @property
    def dim(self):
        return self.mean.shape[0]

    def to_dict(self):
        return {
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "eps_power": float(self.eps_power),
            "epsilon": float(self.epsilon),
            "stats_id": self.stats_id,
        }

    @staticmethod
    def from_dict(d):
        return Normalizer(mean=np.array(d["mean"], dtype=np.float64),
                          std=np.array(d["std"], dtype=np.float64),
                          eps_power=float(d["eps_power"]),
                          epsilon=float(d["epsilon"]),
                          stats_id=str(d["stats_id"]))


def _stats_id(mean, std, eps_power, epsilon):
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(mean, dtype="<f8").tobytes())
    digest.update(np.ascontiguousarray(std, dtype="<f8").tobytes())
    digest.update(struct.pack("<dd", eps_power, epsilon))
    return digest.hexdigest()[:16]


def _stack_raw(power, delay, eps_power):
    p = np.asarray(power, dtype=np.float64)
    d = np.asarray(delay, dtype=np.float64)
    pdb = 10.0 * np.log10(p + eps_power)
    n = p.shape[0]
    return np.concatenate([pdb.reshape(n, -1), d.reshape(n, -1)], axis=1)


def fit_normalizer(power, delay, epsilon=1e-6):
    """Fit normalization statistics on stacked raw maps.

    power, delay: (L, B, U_el, U_az) from beam_power / beam_delay over the
    training set, L >= 2. The power floor is 1e-12 times the largest power
    seen; stds are floored at epsilon so constant dimensions normalize to 0.
    """
    p = np.asarray(power, dtype=np.float64)
    if p.ndim != 4 or p.shape[0] < 2:
        raise ValueError("need at least two training samples of shape (L, B, U_el, U_az)")
    pmax = float(p.max())
    eps_power = 1e-12 * pmax if pmax > 0 else 1.0
    raw = _stack_raw(p, delay, eps_power)
    mean = raw.mean(axis=0)
    std = np.maximum(raw.std(axis=0), epsilon)
    return Normalizer(mean=mean, std=std, eps_power=eps_power, epsilon=epsilon,
                      stats_id=_stats_id(mean, std, eps_power, epsilon))


def feature_vector(csi, norm):
    """One normalized feature vector (2 B U_el U_az,) for one snapshot."""
    bs = beamspace(_csi_array(csi))
    raw = _stack_raw(beam_power(bs)[None], beam_delay(bs)[None], norm.eps_power)[0]
    if raw.shape[0] != norm.dim:
        raise ValueError("feature dim %d does not match normalizer dim %d"
                         % (raw.shape[0], norm.dim))
    return (raw - norm.mean) / norm.std


def raw_maps(dataset, chunk=64):
    """Power and delay maps for every record, shape (L, B, U_el, U_az) each.
    Chunked so the padded beamspace tensor never holds more than `chunk`
    records at a time."""
    L = len(dataset)
    b, mr, mc, _ = dataset.csi.shape[1:]
    power = np.empty((L, b, 2 * mr, 2 * mc))
    delay = np.empty((L, b, 2 * mr, 2 * mc))
    for at in range(0, L, chunk):
        bs = np.fft.fft2(_pad_chunk(dataset.csi[at:at + chunk]), axes=(2, 3))
        power[at:at + chunk] = np.sum(np.abs(bs) ** 2, axis=-1)
        corr = np.sum(bs[..., 1:] * np.conj(bs[..., :-1]), axis=-1)
        delay[at:at + chunk] = np.angle(corr)
    return power, delay


def _pad_chunk(csi):
    h = np.asarray(csi, dtype=np.complex128)
    l, b, mr, mc, n = h.shape
    padded = np.zeros((l, b, 2 * mr, 2 * mc, n), dtype=np.complex128)
    padded[:, :, :mr, :mc, :] = h
    return padded


def featurize_dataset(dataset, norm=None):
    """Feature matrix (L, dim) float64 for a dataset. When norm is None the
    statistics are fitted on this dataset first. Returns (features, norm)."""
    power, delay = raw_maps(dataset)
    if norm is None:
        norm = fit_normalizer(power, delay)
    raw = _stack_raw(power, delay, norm.eps_power)
    if raw.shape[1] != norm.dim:
        raise ValueError("feature dim %d does not match normalizer dim %d"
                         % (raw.shape[1], norm.dim))
    return (raw - norm.mean) / norm.std, norm
