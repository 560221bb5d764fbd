"""Beamspace transform oracles and normalizer behavior."""

import numpy as np
import pytest

from chartloc import beamfeat
from chartloc.beamfeat import (Normalizer, beam_delay, beam_power, beamspace,
                               feature_vector, featurize_dataset,
                               fit_normalizer, raw_maps)
from chartloc.scenesim import steering_vector
from chartloc.tensors import ArrayGeometry, RadioConfig


def test_beamspace_shape_and_padding():
    csi = np.ones((2, 4, 8, 16), dtype=complex)
    bs = beamspace(csi)
    assert bs.shape == (2, 8, 16, 16)
    # DC beam of an all-ones aperture collects every element coherently
    assert bs[0, 0, 0, 0] == pytest.approx(4 * 8)


def test_beamspace_is_plain_dft():
    rng = np.random.default_rng(0)
    csi = rng.standard_normal((1, 3, 5, 2)) + 1j * rng.standard_normal((1, 3, 5, 2))
    bs = beamspace(csi)
    # manual double sum for one output bin
    u_el, u_az = 4, 7
    acc = 0.0
    for r in range(3):
        for c in range(5):
            acc += csi[0, r, c, 1] * np.exp(-2j * np.pi * (u_el * r / 6 + u_az * c / 10))
    assert bs[0, u_el, u_az, 1] == pytest.approx(acc, rel=1e-12)


def test_beam_power_argmax_tracks_dft_direction():
    """A plane wave whose spatial frequency lands on a padded-grid bin puts
    its power peak exactly there."""
    cfg = RadioConfig(carrier_hz=3.5e9, bandwidth_hz=50e6, n_sub=8)
    lam = cfg.wavelength
    arr = ArrayGeometry(position=np.zeros(3), orientation=np.eye(3),
                        rows=8, cols=8, element_spacing=lam / 2)
    for bin_el, bin_az in ((0, 0), (3, 5), (12, 9), (15, 15)):
        # forward DFT kernel is exp(-2 pi j u n / U): a wave with phase step
        # +2 pi u / 16 per element lands its peak exactly on bin u
        ph_r = 2 * np.pi * bin_el / 16 * np.arange(8)
        ph_c = 2 * np.pi * bin_az / 16 * np.arange(8)
        sv = np.exp(1j * (ph_r[:, None] + ph_c[None, :]))
        csi = np.broadcast_to(sv[None, :, :, None], (1, 8, 8, 8))
        p = beam_power(beamspace(csi))[0]
        assert np.unravel_index(np.argmax(p), p.shape) == (bin_el, bin_az)


def test_beam_delay_pure_delay_oracle():
    bw = 50e6
    n = 64
    df = bw / n
    rng = np.random.default_rng(1)
    sv = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    for tau in (0.0, 12e-9, 60e-9):
        tone = np.exp(-2j * np.pi * np.arange(n) * df * tau)
        csi = sv[None, :, :, None] * tone[None, None, None, :]
        d = beam_delay(beamspace(csi))
        occupied = beam_power(beamspace(csi))[0] > 1e-9
        want = -2 * np.pi * df * tau
        assert np.allclose(d[0][occupied], want, atol=1e-9)


def test_beam_delay_empty_beam_is_zero():
    assert np.all(beam_delay(np.zeros((1, 4, 4, 8))) == 0.0)


def test_fit_normalizer_stats():
    rng = np.random.default_rng(2)
    power = rng.uniform(0.5, 2.0, size=(20, 2, 4, 4))
    delay = rng.uniform(-1.0, 1.0, size=(20, 2, 4, 4))
    norm = fit_normalizer(power, delay)
    assert norm.dim == 2 * 2 * 4 * 4
    assert norm.eps_power == pytest.approx(1e-12 * power.max())
    assert np.all(norm.std >= norm.epsilon)
    # normalized training features are standardized per dimension
    raw = beamfeat._stack_raw(power, delay, norm.eps_power)
    z = (raw - norm.mean) / norm.std
    assert np.allclose(z.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(z.std(axis=0), 1.0, atol=1e-9)


def test_fit_normalizer_constant_dims_floor():
    power = np.ones((5, 1, 2, 2))
    delay = np.zeros((5, 1, 2, 2))
    norm = fit_normalizer(power, delay)
    assert np.all(norm.std == norm.epsilon)
    vec = feature_vector(np.ones((1, 1, 1, 4), dtype=complex) * 0, norm)
    assert np.all(np.isfinite(vec))


def test_fit_normalizer_needs_two_samples():
    with pytest.raises(ValueError):
        fit_normalizer(np.ones((1, 1, 2, 2)), np.zeros((1, 1, 2, 2)))
    with pytest.raises(ValueError):
        fit_normalizer(np.ones((4, 2, 2)), np.zeros((4, 2, 2)))


def test_stats_id_content_addressing():
    rng = np.random.default_rng(3)
    power = rng.uniform(0.5, 2.0, size=(6, 1, 2, 2))
    delay = rng.uniform(-1.0, 1.0, size=(6, 1, 2, 2))
    a = fit_normalizer(power, delay)
    b = fit_normalizer(power.copy(), delay.copy())
    assert a.stats_id == b.stats_id and len(a.stats_id) == 16
    c = fit_normalizer(power * 1.001, delay)
    assert c.stats_id != a.stats_id
    back = Normalizer.from_dict(a.to_dict())
    assert back.stats_id == a.stats_id
    assert np.allclose(back.mean, a.mean) and np.allclose(back.std, a.std)


def test_feature_vector_layout_and_mismatch():
    rng = np.random.default_rng(4)
    power = rng.uniform(0.5, 2.0, size=(6, 2, 4, 4))
    delay = rng.uniform(-1.0, 1.0, size=(6, 2, 4, 4))
    norm = fit_normalizer(power, delay)
    csi = rng.standard_normal((2, 2, 2, 8)) + 1j * rng.standard_normal((2, 2, 2, 8))
    vec = feature_vector(csi, norm)
    assert vec.shape == (64,)
    # powers occupy the first half, delays the second
    bs = beamspace(csi)
    raw_p = 10 * np.log10(beam_power(bs).ravel() + norm.eps_power)
    assert np.allclose(vec[:32], (raw_p - norm.mean[:32]) / norm.std[:32])
    small = rng.standard_normal((1, 2, 2, 8)) + 0j
    with pytest.raises(ValueError):
        feature_vector(small, norm)


def test_featurize_dataset(convex_small):
    feats, norm = featurize_dataset(convex_small)
    assert feats.shape == (60, 2 * 8 * 8 * 8)
    assert feats.dtype == np.float64
    assert np.all(np.isfinite(feats))
    # refeaturizing with the same normalizer reproduces the matrix
    again, norm2 = featurize_dataset(convex_small, norm)
    assert norm2 is norm
    assert np.array_equal(again, feats)
    # per-record path agrees with the bulk path
    one = feature_vector(convex_small.csi[17], norm)
    assert np.allclose(one, feats[17], atol=1e-10)


def test_raw_maps_chunking_consistent(convex_small):
    p1, d1 = raw_maps(convex_small, chunk=7)
    p2, d2 = raw_maps(convex_small, chunk=64)
    assert np.array_equal(p1, p2) and np.array_equal(d1, d2)
