"""Affine alignment recovery, error statistics, report artifacts."""

import csv
import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from chartloc.evalkit import (REFERENCE_CONTEXT, AffineTransform,
                              RankDeficientError, apply_affine, evaluate,
                              export_report, mae, optimal_affine, scatter_svg)


def random_affine(rng, d):
    while True:
        a = rng.standard_normal((d, d))
        if abs(np.linalg.det(a)) > 0.3:
            return a, rng.standard_normal(d)


def test_affine_recovery_exact(rng):
    for d in (2, 3):
        a, b = random_affine(rng, d)
        chart = rng.standard_normal((50, d))
        truth = chart @ a.T + b
        tf = optimal_affine(chart, truth)
        assert np.allclose(tf.matrix, a, atol=1e-9)
        assert np.allclose(tf.offset, b, atol=1e-9)
        assert np.allclose(apply_affine(tf, chart), truth, atol=1e-9)


def test_affine_recovery_is_least_squares(rng):
    a, b = random_affine(rng, 2)
    chart = rng.standard_normal((200, 2))
    noise = 0.01 * rng.standard_normal((200, 2))
    truth = chart @ a.T + b + noise
    tf = optimal_affine(chart, truth)
    resid = apply_affine(tf, chart) - truth
    # perturbing the fitted transform can only raise the residual
    base = np.sum(resid ** 2)
    for _ in range(10):
        dm = 1e-4 * rng.standard_normal((2, 2))
        db = 1e-4 * rng.standard_normal(2)
        worse = chart @ (tf.matrix + dm).T + (tf.offset + db) - truth
        assert np.sum(worse ** 2) >= base - 1e-12


def test_affine_rank_deficient(rng):
    # 3-D chart collapsed onto a plane: z never varies
    chart = rng.standard_normal((40, 3))
    chart[:, 2] = 5.0
    truth = rng.standard_normal((40, 3))
    with pytest.raises(RankDeficientError) as err:
        optimal_affine(chart, truth)
    # the error names the dead direction (+-z here)
    assert "direction" in str(err.value)
    with pytest.raises(ValueError):
        optimal_affine(chart[:3], truth[:3])
    with pytest.raises(ValueError):
        optimal_affine(chart, truth[:-1])


def test_evaluate_statistics():
    truth = np.zeros((5, 2))
    est = np.zeros((5, 2))
    est[:, 0] = [0.0, 1.0, 2.0, 3.0, 4.0]
    rep = evaluate(est, truth)
    assert rep.mae == pytest.approx(2.0)
    assert rep.p50 == pytest.approx(2.0)
    # numpy linear interpolation: p90 of [0..4] sits at 3.6
    assert rep.p90 == pytest.approx(3.6)
    assert rep.p95 == pytest.approx(3.8)
    assert rep.transform is None
    assert np.allclose(rep.errors, [0, 1, 2, 3, 4])


def test_evaluate_with_affine(rng):
    a, b = random_affine(rng, 2)
    chart = rng.standard_normal((30, 2))
    truth = chart @ a.T + b
    rep = evaluate(chart, truth, fit_affine=True)
    assert rep.mae < 1e-9
    assert rep.transform is not None
    # without alignment the same chart scores poorly
    raw = evaluate(chart, truth)
    assert raw.mae > 0.1


def test_mae_with_fixed_transform(rng):
    a, b = random_affine(rng, 3)
    chart = rng.standard_normal((20, 3))
    truth = chart @ a.T + b
    tf = AffineTransform(matrix=a, offset=b)
    assert mae(chart, truth, transform=tf) == pytest.approx(0.0, abs=1e-12)
    assert mae(truth, truth) == 0.0


def test_export_report_artifacts(tmp_path, rng):
    truth = rng.uniform(0, 5, size=(25, 3))
    est = truth + 0.1 * rng.standard_normal((25, 3))
    rep = evaluate(est, truth, fit_affine=True)
    csv_path, json_path, svg_path = export_report(rep, tmp_path, prefix="run")

    with open(csv_path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["record_index", "truth_x", "truth_y", "truth_z",
                       "estimate_x", "estimate_y", "estimate_z", "error_m"]
    assert len(rows) == 26
    assert float(rows[1][7]) == pytest.approx(rep.errors[0], rel=1e-6)

    summary = json.loads(open(json_path).read())
    assert summary["mae_m"] == pytest.approx(rep.mae)
    assert summary["count"] == 25
    assert summary["affine_fitted"] is True
    assert len(summary["affine_matrix"]) == 3
    # reference numbers ship as clearly labeled context
    ctx = summary["reference_context"]
    assert ctx == REFERENCE_CONTEXT
    assert "not reproducible" in ctx["note"]

    svg = open(svg_path).read()
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    circles = [e for e in root.iter() if e.tag.endswith("circle")]
    assert len(circles) == 50  # truth and estimate panel per record


def test_scatter_svg_handles_2d(rng):
    truth = rng.uniform(0, 1, size=(10, 2))
    rep = evaluate(truth, truth)
    root = ET.fromstring(scatter_svg(rep))
    assert root.tag.endswith("svg")
