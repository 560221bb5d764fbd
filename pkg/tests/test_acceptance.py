"""End-to-end acceptance checks, one test per headline property.

The desk-scale pipeline tests (c06, c07, c08) train real networks and take
minutes each; everything else is seconds. Wall-clock budgets are asserted
alongside the quality bounds so a regression in either shows up here.
"""

import json
import math
import time

import numpy as np
import pytest

from chartloc import (backend, beamfeat, chartnet, classical, dissim, evalkit,
                      multistory, presets, scenesim, tensors)
from chartloc.chartnet import TrainConfig, init_params, loss_gradients
from chartloc.cli import replay_manifest, run


def _flat_coords(params, rng, count):
    """count random (tensor, layer, row, col) coordinates over all params."""
    coords = []
    for _ in range(count):
        layer = int(rng.integers(0, len(params.weights)))
        if rng.random() < 0.8:
            w = params.weights[layer]
            coords.append(("w", layer, int(rng.integers(0, w.shape[0])),
                           int(rng.integers(0, w.shape[1]))))
        else:
            b = params.biases[layer]
            coords.append(("b", layer, int(rng.integers(0, b.shape[0])), 0))
    return coords


def _fd_rel_err(params, coord, analytic, eval_loss, step=1e-5):
    kind, layer, r, c = coord
    tensor = params.weights[layer] if kind == "w" else params.biases[layer]
    slot = (r, c) if kind == "w" else r
    keep = tensor[slot]
    tensor[slot] = keep + step
    hi = eval_loss()
    tensor[slot] = keep - step
    lo = eval_loss()
    tensor[slot] = keep
    fd = (hi - lo) / (2.0 * step)
    return abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-8)


def test_c01_loss_gradients_match_finite_differences():
    t0 = time.monotonic()
    in_dim, pairs = 16, 4
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        params = init_params(seed, in_dim, 3)
        f_i = rng.normal(size=(pairs, in_dim))
        f_j = rng.normal(size=(pairs, in_dim))
        d = rng.uniform(0.1, 3.0, size=pairs)
        arrays = [
            tensors.ArrayGeometry(position=np.array([0.0, 0.0, 0.0]),
                                  orientation=np.eye(3), rows=2, cols=2,
                                  element_spacing=0.04),
            tensors.ArrayGeometry(position=np.array([8.0, 0.0, 0.0]),
                                  orientation=np.eye(3), rows=2, cols=2,
                                  element_spacing=0.04),
        ]
        per_record = []
        for _ in range(pairs * 2):
            row = []
            for b, arr in enumerate(arrays):
                az, el = rng.uniform(-0.8, 0.8, size=2)
                direction = np.array([math.cos(el) * math.cos(az),
                                      math.cos(el) * math.sin(az),
                                      math.sin(el)])
                row.append(classical.AoaEstimate(
                    array_index=b, azimuth=float(az), elevation=float(el),
                    unit_direction=direction,
                    kappa=float(rng.uniform(5.0, 50.0))))
            per_record.append(row)
        packed = classical.pack_estimates(per_record, arrays)
        idx = np.arange(pairs * 2)
        cases = [
            (TrainConfig(loss="siamese", beta=0.2), {}),
            (TrainConfig(loss="augmented", lam=0.6),
             {"packed": packed, "idx_i": idx[:pairs], "idx_j": idx[pairs:],
              "term_scales": (1.7, 2.3)}),
        ]
        for config, extra in cases:
            _, gw, gb, _ = loss_gradients(params, f_i, f_j, d, config, **extra)

            def eval_loss(config=config, extra=extra):
                return loss_gradients(params, f_i, f_j, d, config, **extra)[0]

            for coord in _flat_coords(params, rng, 50):
                kind, layer, r, c = coord
                analytic = gw[layer][r, c] if kind == "w" else gb[layer][r]
                worst = max(worst, _fd_rel_err(params, coord, analytic,
                                               eval_loss))
    assert worst < 1e-4, "worst relative gradient error %.3g" % worst
    assert time.monotonic() - t0 < 60.0


def test_c02_root_music_accuracy():
    t0 = time.monotonic()
    m, spacing, snapshots = 8, 0.5, 64
    rng = np.random.default_rng(7)
    sq_err = []
    for _ in range(1000):
        theta = rng.uniform(-60.0, 60.0)
        u = math.sin(math.radians(theta))
        steer = np.exp(2j * np.pi * spacing * u * np.arange(m))
        sym = rng.normal(size=snapshots) + 1j * rng.normal(size=snapshots)
        x = np.outer(sym / math.sqrt(2.0), steer)
        noise_std = 10.0 ** (-20.0 / 20.0)
        x += noise_std / math.sqrt(2.0) * (
            rng.normal(size=x.shape) + 1j * rng.normal(size=x.shape))
        cov = x.T @ x.conj() / snapshots
        u_hat = classical.root_music_1d(cov, spacing)
        theta_hat = math.degrees(math.asin(min(1.0, max(-1.0, u_hat))))
        sq_err.append((theta_hat - theta) ** 2)
    rmse = math.sqrt(float(np.mean(sq_err)))
    assert rmse <= 0.5, "angle RMSE %.4f deg" % rmse

    for theta in (-50.0, -15.0, 0.0, 22.5, 58.0):
        u = math.sin(math.radians(theta))
        steer = np.exp(2j * np.pi * spacing * u * np.arange(m))
        cov = np.outer(steer, steer.conj()) + 1e-12 * np.eye(m)
        u_hat = classical.root_music_1d(cov, spacing)
        err = abs(math.degrees(math.asin(min(1.0, max(-1.0, u_hat)))) - theta)
        assert err <= 1e-4, "noiseless error %.3g deg at %.1f" % (err, theta)
    assert time.monotonic() - t0 < 60.0


def test_c03_noise_free_triangulation():
    t0 = time.monotonic()
    ds = scenesim.generate_dataset(presets.los_hall(count=200))
    est, _ = classical.triangulate_dataset(ds)
    mae = float(np.linalg.norm(est - ds.positions, axis=1).mean())
    assert mae <= 0.3, "LoS triangulation MAE %.4f m" % mae
    assert time.monotonic() - t0 < 120.0


def test_c04_beamspace_feature_correctness():
    t0 = time.monotonic()
    rng = np.random.default_rng(3)
    cfg = presets._radio()
    df = cfg.subcarrier_spacing
    n_sub = int(cfg.n_sub)
    spatial = rng.normal(size=(2, 4, 4, 1)) + 1j * rng.normal(size=(2, 4, 4, 1))
    for tau in (0.0, 50e-9, 100e-9, 200e-9):
        ramp = np.exp(-2j * np.pi * df * tau * np.arange(n_sub))
        bs = beamfeat.beamspace(spatial * ramp)
        delays = beamfeat.beam_delay(bs)
        power = beamfeat.beam_power(bs)
        want = -2.0 * np.pi * df * tau
        occupied = power > 1e-9 * power.max()
        worst = np.abs(delays[occupied] - want).max()
        assert worst <= 1e-6, "tau %.0f ns: delay phase off by %.3g" % (
            tau * 1e9, worst)

    u_el, u_az = 8, 8
    for p in range(u_el):
        for q in range(u_az):
            wave = np.exp(2j * np.pi * (p * np.arange(4)[:, None] / u_el
                                        + q * np.arange(4)[None, :] / u_az))
            csi = np.broadcast_to(wave[None, :, :, None], (2, 4, 4, 2))
            power = beamfeat.beam_power(beamfeat.beamspace(csi))
            for b in range(2):
                got = np.unravel_index(np.argmax(power[b]), (u_el, u_az))
                assert got == (p, q), "array %d: beam (%d,%d) peaked at %s" % (
                    b, p, q, got)
    assert time.monotonic() - t0 < 60.0


def test_c05_dissimilarity_and_geodesic_properties():
    t0 = time.monotonic()
    ds = scenesim.generate_dataset(presets.convex_hall(count=200))
    dm = dissim.dissimilarity_matrix(ds)
    geo = dissim.geodesic_matrix(dissim.knn_graph(dm, k=10))
    rng = np.random.default_rng(11)

    # per-pair properties on random two-snapshot problems
    for trial in range(1000):
        csi = rng.normal(size=(2, 2, 2, 2, 8)) + 1j * rng.normal(size=(2, 2, 2, 2, 8))
        window = np.arange(4)
        d01 = dissim.adp_dissimilarity(np.fft.ifft(csi[0], axis=-1),
                                       np.fft.ifft(csi[1], axis=-1), window)
        d10 = dissim.adp_dissimilarity(np.fft.ifft(csi[1], axis=-1),
                                       np.fft.ifft(csi[0], axis=-1), window)
        assert 0.0 <= d01 <= 1.0
        assert abs(d01 - d10) < 1e-12
        self_d = dissim.adp_dissimilarity(np.fft.ifft(csi[0], axis=-1),
                                          np.fft.ifft(csi[0], axis=-1), window)
        assert abs(self_d) < 1e-9
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=2))
        rotated = csi[0] * phases[:, None, None, None]
        d_rot = dissim.adp_dissimilarity(np.fft.ifft(rotated, axis=-1),
                                         np.fft.ifft(csi[1], axis=-1), window)
        assert abs(d_rot - d01) < 1e-9

    assert np.allclose(np.diag(dm), 0.0)
    assert np.allclose(dm, dm.T)
    assert dm.min() >= 0.0 and dm.max() <= 1.0

    n = geo.shape[0]
    i = rng.integers(0, n, 10000)
    j = rng.integers(0, n, 10000)
    k = rng.integers(0, n, 10000)
    assert np.all(geo[i, j] <= geo[i, k] + geo[k, j] + 1e-9)

    import scipy.stats
    ii = rng.integers(0, n, 20000)
    jj = rng.integers(0, n, 20000)
    keep = ii != jj
    true_d = np.linalg.norm(ds.positions[ii[keep]].astype(float)
                            - ds.positions[jj[keep]].astype(float), axis=1)
    rho = scipy.stats.spearmanr(geo[ii[keep], jj[keep]], true_d).statistic
    assert rho >= 0.95, "geodesic/true-distance Spearman %.4f" % rho
    assert time.monotonic() - t0 < 120.0


@pytest.fixture(scope="module")
def factory_run():
    backend.set_threads(1)
    t0 = time.monotonic()
    ds = scenesim.generate_dataset(presets.factory())
    feats, _ = beamfeat.featurize_dataset(ds)
    dm = dissim.dissimilarity_matrix(ds)
    geo = dissim.geodesic_matrix(dissim.knn_graph(dm, k=10))
    tri, estimates = classical.triangulate_dataset(ds)
    tri_mae = float(np.linalg.norm(tri - ds.positions, axis=1).mean())

    conv = chartnet.train_fcf(
        feats, geo, TrainConfig(out_dim=3, epochs=200, batch_pairs=512,
                                rng_seed=0))
    conv_mae = evalkit.evaluate(chartnet.infer(conv.params, feats),
                                ds.positions.astype(float),
                                fit_affine=True).mae

    packed = classical.pack_estimates(estimates, ds.arrays)
    target = chartnet.scale_dissimilarities(geo, tri)
    aug = chartnet.train_fcf(
        feats, target, TrainConfig(out_dim=3, epochs=200, batch_pairs=512,
                                   loss="augmented", lam=0.85, rng_seed=0),
        packed=packed)
    aug_mae = evalkit.evaluate(chartnet.infer(aug.params, feats),
                               ds.positions.astype(float),
                               fit_affine=False).mae
    return {"tri": tri_mae, "conv": conv_mae, "aug": aug_mae,
            "elapsed": time.monotonic() - t0}


def test_c06_factory_chart_beats_triangulation(factory_run):
    r = factory_run
    assert r["conv"] <= 1.5, "conventional chart MAE %.3f m" % r["conv"]
    assert r["conv"] < r["tri"], "conventional %.3f !< triangulation %.3f" % (
        r["conv"], r["tri"])
    assert r["aug"] <= 2.0, "augmented chart MAE %.3f m" % r["aug"]
    assert r["aug"] < r["tri"], "augmented %.3f !< triangulation %.3f" % (
        r["aug"], r["tri"])
    assert r["elapsed"] < 1200.0, "factory pipeline took %.0f s" % r["elapsed"]


@pytest.fixture(scope="module")
def multistory_run():
    t0 = time.monotonic()
    ds = scenesim.generate_dataset(presets.multistory())
    feats, _ = beamfeat.featurize_dataset(ds)

    def geodesic_builder(subset):
        raw = dissim.dissimilarity_matrix(subset)
        return dissim.geodesic_matrix(
            dissim.knn_graph(raw, k=min(18, len(subset) - 1)))

    config = TrainConfig(out_dim=2, epochs=200, batch_pairs=512,
                         loss="siamese", rng_seed=0)
    model = multistory.train_multistory(ds, feats, geodesic_builder, config,
                                        kmeans_seed=0)
    _, floor_err = multistory.match_clusters_to_floors(
        model.assignment.labels, ds.floor_labels)
    truth = ds.positions.astype(float)
    conv_mae = evalkit.evaluate(chartnet.infer(model.stage0, feats), truth,
                                fit_affine=True).mae
    multi_mae = evalkit.evaluate(multistory.assemble_positions(model, feats),
                                 truth, fit_affine=True).mae
    return {"floor_err": floor_err, "conv3d": conv_mae, "multi": multi_mae,
            "elapsed": time.monotonic() - t0}


def test_c07_multistory_floors_and_accuracy(multistory_run):
    r = multistory_run
    assert r["floor_err"] <= 0.02, "floor error %.4f" % r["floor_err"]
    assert r["multi"] < r["conv3d"], "multistory %.3f !< conventional %.3f" % (
        r["multi"], r["conv3d"])
    assert r["elapsed"] < 1200.0, "multistory pipeline took %.0f s" % r["elapsed"]


@pytest.fixture(scope="module")
def sweep_run(tmp_path_factory):
    t0 = time.monotonic()
    out = {}
    for param, values in (("rows", "2,4,8"), ("density", "0.1,1.0")):
        d = tmp_path_factory.mktemp("sweep_" + param)
        code = run(["sweep", "--param", param, "--values", values,
                    "--out-dir", str(d)])
        assert code == 0
        rows = {}
        lines = (d / "sweep.csv").read_text().strip().splitlines()
        for line in lines[1:]:
            _, value, method, mae = line.split(",")[:4]
            rows.setdefault(method, {})[float(value)] = float(mae)
        out[param] = rows
    out["elapsed"] = time.monotonic() - t0
    return out


def test_c08_sweep_trends(sweep_run):
    r = sweep_run["rows"]
    tri = [r["triangulation"][v] for v in (2.0, 4.0, 8.0)]
    assert tri[0] > tri[1] > tri[2], "triangulation not decreasing: %s" % tri
    chart = [r["chart"][v] for v in (2.0, 4.0, 8.0)]
    spread = (max(chart) - min(chart)) / min(chart)
    assert spread < 0.5, "chart MAE spread %.2f over rows sweep %s" % (
        spread, chart)

    d = sweep_run["density"]
    assert d["chart"][1.0] < d["chart"][0.1], "chart not better when dense: %s" % d
    lo, hi = sorted(d["triangulation"].values())
    assert (hi - lo) / lo < 0.15, "triangulation varies %.2f across density" % (
        (hi - lo) / lo)
    assert sweep_run["elapsed"] < 2700.0


def test_c09_affine_recovery_and_mae():
    t0 = time.monotonic()
    rng = np.random.default_rng(17)
    for trial in range(100):
        n, dim = 40, 3
        truth = rng.normal(size=(n, dim)) * 4.0
        while True:
            a = rng.normal(size=(dim, dim))
            if abs(np.linalg.det(a)) > 0.3:
                break
        b = rng.normal(size=dim) * 2.0
        chart = truth @ a.T + b
        t = evalkit.optimal_affine(chart, truth)
        recovered = evalkit.apply_affine(t, chart)
        rel = np.linalg.norm(recovered - truth) / np.linalg.norm(truth)
        assert rel < 1e-9, "trial %d: relative recovery error %.3g" % (trial, rel)

        noisy = chart + rng.normal(size=chart.shape) * 0.3
        before = float(np.linalg.norm(noisy - truth, axis=1).mean())
        after = evalkit.evaluate(noisy, truth, fit_affine=True).mae
        assert after <= before + 1e-12
    assert time.monotonic() - t0 < 30.0


def test_c10_manifest_replay_bit_exact(tmp_path):
    t0 = time.monotonic()
    d = tmp_path
    ds_path = d / "data.ccds"
    assert run(["--threads", "1", "simulate", "--preset", "convex", "--count",
                "40", "--out", str(ds_path)]) == 0
    assert run(["--threads", "1", "features", "--data", str(ds_path),
                "--out", str(d / "feats.ccmx")]) == 0
    assert run(["--threads", "1", "dissim", "--data", str(ds_path),
                "--out", str(d / "geo.ccmx"), "--k", "10"]) == 0
    for manifest in ("data.ccds.manifest.json", "feats.ccmx.manifest.json",
                     "geo.ccmx.manifest.json"):
        outcome = replay_manifest(d / manifest)
        assert all(v["match"] for v in outcome.values()), (
            "%s replay mismatch: %s" % (manifest, outcome))

    ds = tensors.load_dataset(ds_path)
    again = d / "again.ccds"
    tensors.save_dataset(ds, again)
    assert again.read_bytes() == ds_path.read_bytes()
    assert time.monotonic() - t0 < 300.0
