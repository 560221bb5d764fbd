"""chartloc command line.

Subcommands: simulate, features, dissim, triangulate, chart, multistory,
eval, sweep. Every run writes a manifest JSON next to its primary output
(override with --manifest) recording the argv, resolved backend and thread
cap, and a sha256 per output file; replay_manifest re-executes a manifest
and verifies the outputs reproduce bit-exactly.

Exit codes: 0 success, 2 usage, 3 missing input file, 4 input format or
validation error, 5 computation failed (disconnected graph, degenerate
geometry, diverged training), 1 unexpected error.

Thread control: --threads N (or CHARTLOC_THREADS) caps BLAS and kernel
parallelism. The cap must take effect before numpy first loads, which is why
this module defers all package imports into the handlers.
"""

import argparse
import hashlib
import json
import os
import sys
import time

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_FORMAT = 4
EXIT_COMPUTE = 5

_EPILOG = """exit codes:
  0  success
  1  unexpected error
  2  usage error
  3  missing input file
  4  input format or validation error
  5  computation failed
"""


def _peek_threads(argv):
    """Find a thread cap before any heavy import: --threads N wins over the
    CHARTLOC_THREADS environment variable."""
    for i, tok in enumerate(argv):
        if tok == "--threads" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--threads="):
            return tok.split("=", 1)[1]
    return os.environ.get("CHARTLOC_THREADS")


def _apply_thread_env(value):
    try:
        n = int(value)
    except (TypeError, ValueError):
        return None
    if n < 1:
        return None
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    return n


def build_parser():
    p = argparse.ArgumentParser(
        prog="chartloc",
        description="3-D radio localization from multi-array OFDM CSI",
        epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--threads", type=int, default=None,
                   help="cap BLAS/kernel threads (or set CHARTLOC_THREADS)")
    p.add_argument("--backend", choices=("numba", "numpy"), default=None,
                   help="force a kernel backend (or set CHARTLOC_BACKEND)")
    p.add_argument("--manifest", default=None,
                   help="manifest path (default: <first output>.manifest.json)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="synthesize a CSI dataset from a scene")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--preset", choices=("factory", "los", "convex", "multistory"))
    g.add_argument("--scene", help="scene JSON file")
    s.add_argument("--out", required=True, help="output dataset (.ccds)")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--count", type=int, default=None,
                   help="records (per floor for the multistory preset)")
    s.add_argument("--n-row", type=int, default=None)
    s.add_argument("--n-col", type=int, default=None)
    s.add_argument("--snr-db", type=float, default=None)
    s.add_argument("--no-sync", action="store_true",
                   help="draw per-array phase and timing offsets per snapshot")
    s.add_argument("--dump-scene", default=None, help="also write the scene JSON")

    s = sub.add_parser("features", help="beamspace feature matrix from a dataset")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True, help="output features (.ccmx)")
    s.add_argument("--norm", default=None, help="reuse an existing normalizer JSON")
    s.add_argument("--norm-out", default=None,
                   help="write the fitted normalizer JSON (default <out>.norm.json)")

    s = sub.add_parser("dissim", help="geodesic dissimilarity matrix from a dataset")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True, help="output geodesic matrix (.ccmx)")
    s.add_argument("--raw-out", default=None, help="also write the raw matrix")
    s.add_argument("--eta", type=float, default=0.95)
    s.add_argument("--k", type=int, default=20)

    s = sub.add_parser("triangulate", help="classical AoA triangulation per record")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True, help="output positions CSV")
    s.add_argument("--aoa-out", default=None, help="also write angle estimates JSON")
    s.add_argument("--grid-pitch", type=float, default=0.5)
    s.add_argument("--ascent-steps", type=int, default=200)
    s.add_argument("--region", default=None,
                   help="search region x0,y0,z0,x1,y1,z1 (default from arrays)")

    s = sub.add_parser("chart", help="train a charting network")
    s.add_argument("--features", required=True)
    s.add_argument("--dissim", required=True, help="geodesic matrix (.ccmx)")
    s.add_argument("--out", required=True, help="output checkpoint (.ccnn)")
    s.add_argument("--mode", choices=("conventional", "augmented"),
                   default="conventional")
    s.add_argument("--data", default=None,
                   help="dataset (augmented mode: array geometry source)")
    s.add_argument("--tri", default=None,
                   help="triangulated positions CSV (augmented mode)")
    s.add_argument("--aoa", default=None,
                   help="angle estimates JSON (augmented mode)")
    s.add_argument("--positions-out", default=None, help="chart positions CSV")
    s.add_argument("--out-dim", type=int, choices=(2, 3), default=3)
    s.add_argument("--epochs", type=int, default=200)
    s.add_argument("--batch-pairs", type=int, default=512)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--beta", type=float, default=0.2)
    s.add_argument("--lam", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("multistory", help="two-stage multistory charting pipeline")
    s.add_argument("--data", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--floors", type=int, default=None)
    s.add_argument("--eta", type=float, default=0.95)
    s.add_argument("--k", type=int, default=20)
    s.add_argument("--epochs", type=int, default=200)
    s.add_argument("--batch-pairs", type=int, default=512)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--beta", type=float, default=0.2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--min-floor-size", type=int, default=50)

    s = sub.add_parser("eval", help="score estimated positions against truth")
    s.add_argument("--estimates", required=True, help="positions CSV")
    s.add_argument("--data", required=True, help="dataset with ground truth")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--prefix", default="eval")
    s.add_argument("--affine", dest="affine", action="store_true", default=True,
                   help="fit the optimal affine before scoring (default)")
    s.add_argument("--no-affine", dest="affine", action="store_false")

    s = sub.add_parser("sweep", help="parameter sweep over rows or density")
    s.add_argument("--param", choices=("rows", "density"), required=True)
    s.add_argument("--values", required=True,
                   help="comma-separated values, e.g. 2,4,8 or 0.1,1.0")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int, default=5)
    s.add_argument("--count", type=int, default=1000,
                   help="records for the rows sweep")
    s.add_argument("--eta", type=float, default=0.95)
    s.add_argument("--k", type=int, default=20)
    s.add_argument("--epochs", type=int, default=200)
    s.add_argument("--batch-pairs", type=int, default=512)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--beta", type=float, default=0.2)
    s.add_argument("--seed-train", type=int, default=0)
    return p


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(argv, args, outputs, started):
    from . import backend
    from . import __version__
    path = args.manifest or (outputs[0] + ".manifest.json")
    doc = {
        "tool": "chartloc",
        "version": __version__,
        "subcommand": args.command,
        "argv": list(argv),
        "backend": backend.active_backend(),
        "threads": os.environ.get("OPENBLAS_NUM_THREADS"),
        "elapsed_s": round(time.time() - started, 3),
        "outputs": [{"path": os.path.abspath(o), "sha256": _sha256(o)}
                    for o in outputs],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
    return path


def _write_positions_csv(path, positions, extra=None):
    import csv
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        header = ["record_index", "x", "y", "z"]
        if extra is not None:
            header.append(extra[0])
        w.writerow(header)
        for l, row in enumerate(positions):
            line = [l] + ["%.17g" % v for v in row]
            if extra is not None:
                line.append("%.17g" % extra[1][l])
            w.writerow(line)


def _read_positions_csv(path):
    import csv
    import numpy as np
    rows = []
    with open(path, "r", newline="") as f:
        reader = csv.DictReader(f)
        for rec in reader:
            rows.append((int(rec["record_index"]),
                         float(rec["x"]), float(rec["y"]), float(rec["z"])))
    rows.sort(key=lambda r: r[0])
    if not rows:
        raise ValueError("no rows in positions CSV %s" % path)
    if [r[0] for r in rows] != list(range(len(rows))):
        raise ValueError("positions CSV %s does not cover records 0..L-1" % path)
    return np.array([[r[1], r[2], r[3]] for r in rows])


def _parse_region(text):
    import numpy as np
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 6:
        raise ValueError("--region wants 6 comma-separated numbers")
    return np.array(vals[:3]), np.array(vals[3:])


def _build_scene(args):
    from . import presets, scenesim
    if args.scene:
        scene = scenesim.load_scene(args.scene)
        if args.seed is not None:
            from dataclasses import replace
            scene = replace(scene, rng_seed=args.seed)
        for flag in ("count", "n_row", "n_col", "snr_db"):
            if getattr(args, flag) is not None:
                raise ValueError("--%s only applies to --preset scenes"
                                 % flag.replace("_", "-"))
        if args.no_sync:
            from dataclasses import replace
            scene = replace(scene, inter_array_sync=False)
        return scene
    builder = presets.PRESETS[args.preset]
    kwargs = {}
    if args.seed is not None:
        kwargs["seed"] = args.seed
    if args.count is not None:
        kwargs["per_floor" if args.preset == "multistory" else "count"] = args.count
    if args.n_row is not None:
        kwargs["n_row"] = args.n_row
    if args.n_col is not None:
        kwargs["n_col"] = args.n_col
    if args.snr_db is not None:
        kwargs["snr_db"] = args.snr_db
    try:
        scene = builder(**kwargs)
    except TypeError as e:
        raise ValueError("preset %s does not accept these overrides: %s"
                         % (args.preset, e)) from e
    if args.no_sync:
        from dataclasses import replace
        scene = replace(scene, inter_array_sync=False)
    return scene


def _cmd_simulate(argv, args, started):
    from . import scenesim, tensors
    scene = _build_scene(args)
    ds = scenesim.generate_dataset(scene)
    tensors.save_dataset(ds, args.out)
    outputs = [args.out]
    if args.dump_scene:
        scenesim.save_scene(scene, args.dump_scene)
        outputs.append(args.dump_scene)
    _write_manifest(argv, args, outputs, started)
    print("simulate: %d records, %d arrays -> %s" % (len(ds), ds.n_arrays, args.out))
    return EXIT_OK


def _cmd_features(argv, args, started):
    from . import beamfeat, matrixio, tensors
    ds = tensors.load_dataset(args.data)
    norm = None
    if args.norm:
        with open(args.norm) as f:
            norm = beamfeat.Normalizer.from_dict(json.load(f))
    feats, norm = beamfeat.featurize_dataset(ds, norm)
    matrixio.write_matrix(args.out, feats, kind="features",
                          meta={"norm_stats_id": norm.stats_id})
    outputs = [args.out]
    if not args.norm:
        norm_path = args.norm_out or (args.out + ".norm.json")
        with open(norm_path, "w") as f:
            json.dump(norm.to_dict(), f)
        outputs.append(norm_path)
    _write_manifest(argv, args, outputs, started)
    print("features: %s (dim %d, stats %s)" % (feats.shape, feats.shape[1],
                                               norm.stats_id))
    return EXIT_OK


def _cmd_dissim(argv, args, started):
    from . import dissim, matrixio, tensors
    ds = tensors.load_dataset(args.data)
    raw = dissim.dissimilarity_matrix(ds, eta=args.eta)
    graph = dissim.knn_graph(raw, k=args.k)
    geo = dissim.geodesic_matrix(graph)
    matrixio.write_matrix(args.out, geo, kind="geodesic_matrix",
                          meta={"eta": args.eta, "k": args.k})
    outputs = [args.out]
    if args.raw_out:
        matrixio.write_matrix(args.raw_out, raw, kind="dissimilarity_matrix",
                              meta={"eta": args.eta})
        outputs.append(args.raw_out)
    _write_manifest(argv, args, outputs, started)
    print("dissim: %d x %d geodesic matrix -> %s" % (geo.shape[0], geo.shape[1],
                                                     args.out))
    return EXIT_OK


def _estimates_to_json(per_record):
    return {"records": [[{"array_index": int(e.array_index),
                          "azimuth": float(e.azimuth),
                          "elevation": float(e.elevation),
                          "kappa": float(e.kappa),
                          "unit_direction": [float(v) for v in e.unit_direction]}
                         for e in row]
                        for row in per_record]}


def _estimates_from_json(doc):
    import numpy as np
    from .classical import AoaEstimate
    out = []
    for row in doc["records"]:
        out.append([AoaEstimate(array_index=int(e["array_index"]),
                                azimuth=float(e["azimuth"]),
                                elevation=float(e["elevation"]),
                                unit_direction=np.array(e["unit_direction"]),
                                kappa=float(e["kappa"]))
                    for e in row])
    return out


def _cmd_triangulate(argv, args, started):
    from . import classical, tensors
    ds = tensors.load_dataset(args.data)
    region = _parse_region(args.region) if args.region else None
    positions, estimates = classical.triangulate_dataset(
        ds, region=region, grid_pitch=args.grid_pitch,
        ascent_steps=args.ascent_steps)
    lls = [classical.aoa_log_likelihood(positions[l], estimates[l], ds.arrays)
           for l in range(len(ds))]
    _write_positions_csv(args.out, positions, extra=("log_likelihood", lls))
    outputs = [args.out]
    if args.aoa_out:
        with open(args.aoa_out, "w") as f:
            json.dump(_estimates_to_json(estimates), f)
        outputs.append(args.aoa_out)
    _write_manifest(argv, args, outputs, started)
    print("triangulate: %d records -> %s" % (len(ds), args.out))
    return EXIT_OK


def _cmd_chart(argv, args, started):
    import numpy as np
    from . import chartnet, classical, matrixio, tensors
    feats, fhead = matrixio.read_matrix(args.features, expect_kind="features")
    geo, _ = matrixio.read_matrix(args.dissim)
    if geo.shape[0] != geo.shape[1] or geo.shape[0] != feats.shape[0]:
        raise ValueError("dissimilarity matrix %s does not match %d feature rows"
                         % (geo.shape, feats.shape[0]))
    config = chartnet.TrainConfig(
        out_dim=args.out_dim, epochs=args.epochs, batch_pairs=args.batch_pairs,
        learning_rate=args.lr, beta=args.beta, lam=args.lam,
        loss="siamese" if args.mode == "conventional" else "augmented",
        rng_seed=args.seed)
    packed = None
    target = geo
    if args.mode == "augmented":
        if not (args.data and args.tri and args.aoa):
            raise ValueError("augmented mode needs --data, --tri and --aoa")
        if args.out_dim != 3:
            raise ValueError("augmented mode charts in 3-D")
        ds = tensors.load_dataset(args.data)
        anchors = _read_positions_csv(args.tri)
        if anchors.shape[0] != feats.shape[0]:
            raise ValueError("triangulated positions do not cover the dataset")
        with open(args.aoa) as f:
            per_record = _estimates_from_json(json.load(f))
        packed = classical.pack_estimates(per_record, ds.arrays)
        target = chartnet.scale_dissimilarities(geo, anchors)
    result = chartnet.train_fcf(feats, target, config, packed=packed)
    meta = {
        "mode": args.mode,
        "epochs": args.epochs,
        "batch_pairs": args.batch_pairs,
        "learning_rate": args.lr,
        "beta": args.beta,
        "lambda": args.lam,
        "seed": args.seed,
        "final_loss": result.epoch_losses[-1] if result.epoch_losses else None,
    }
    chartnet.save_params(result.params, args.out,
                         norm_stats_id=fhead["meta"].get("norm_stats_id"),
                         meta=meta)
    outputs = [args.out]
    if args.positions_out:
        chart = chartnet.infer(result.params, feats)
        if chart.shape[1] == 2:
            chart = np.concatenate([chart, np.zeros((chart.shape[0], 1))], axis=1)
        _write_positions_csv(args.positions_out, chart)
        outputs.append(args.positions_out)
    _write_manifest(argv, args, outputs, started)
    final = result.epoch_losses[-1] if result.epoch_losses else float("nan")
    print("chart: %s loss %.6g after %d epochs -> %s"
          % (args.mode, final, args.epochs, args.out))
    return EXIT_OK


def _cmd_multistory(argv, args, started):
    import numpy as np
    from . import chartnet, dissim, matrixio, multistory, tensors
    ds = tensors.load_dataset(args.data)
    feats, fhead = matrixio.read_matrix(args.features, expect_kind="features")
    if feats.shape[0] != len(ds):
        raise ValueError("feature rows do not match dataset records")

    def geodesic_builder(subset):
        raw = dissim.dissimilarity_matrix(subset, eta=args.eta)
        return dissim.geodesic_matrix(dissim.knn_graph(raw, k=min(args.k, len(subset) - 1)))

    config = chartnet.TrainConfig(out_dim=2, epochs=args.epochs,
                                  batch_pairs=args.batch_pairs,
                                  learning_rate=args.lr, beta=args.beta,
                                  loss="siamese", rng_seed=args.seed)
    model = multistory.train_multistory(ds, feats, geodesic_builder, config,
                                        n_floor=args.floors,
                                        min_floor_size=args.min_floor_size,
                                        kmeans_seed=args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    sid = fhead["meta"].get("norm_stats_id")
    outputs = []
    stage0_path = os.path.join(args.out_dir, "stage0.ccnn")
    chartnet.save_params(model.stage0, stage0_path, norm_stats_id=sid,
                         meta={"role": "stage0"})
    outputs.append(stage0_path)
    for c, expert in enumerate(model.experts):
        path = os.path.join(args.out_dir, "expert_%d.ccnn" % c)
        chartnet.save_params(expert, path, norm_stats_id=sid,
                             meta={"role": "expert", "cluster": c})
        outputs.append(path)

    chart3 = chartnet.infer(model.stage0, feats)
    conv_path = os.path.join(args.out_dir, "conventional3d.csv")
    _write_positions_csv(conv_path, chart3)
    outputs.append(conv_path)
    assembled = multistory.assemble_positions(model, feats)
    multi_path = os.path.join(args.out_dir, "multistory.csv")
    _write_positions_csv(multi_path, assembled)
    outputs.append(multi_path)
    import csv
    clusters_path = os.path.join(args.out_dir, "clusters.csv")
    with open(clusters_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["record_index", "cluster"])
        for l, c in enumerate(model.assignment.labels):
            w.writerow([l, int(c)])
    outputs.append(clusters_path)
    if args.manifest is None:
        args.manifest = os.path.join(args.out_dir, "multistory.manifest.json")
    _write_manifest(argv, args, outputs, started)
    print("multistory: %d floor clusters -> %s" % (len(model.experts), args.out_dir))
    return EXIT_OK


def _cmd_eval(argv, args, started):
    from . import evalkit, tensors
    est = _read_positions_csv(args.estimates)
    ds = tensors.load_dataset(args.data)
    truth = ds.positions.astype(float)
    if est.shape[0] != truth.shape[0]:
        raise ValueError("estimates cover %d records, dataset has %d"
                         % (est.shape[0], truth.shape[0]))
    report = evalkit.evaluate(est, truth, fit_affine=args.affine)
    paths = evalkit.export_report(report, args.out_dir, prefix=args.prefix)
    if args.manifest is None:
        args.manifest = os.path.join(args.out_dir, args.prefix + ".manifest.json")
    _write_manifest(argv, args, list(paths), started)
    print("eval: mae %.4f m, p50 %.4f, p90 %.4f, p95 %.4f (affine %s)"
          % (report.mae, report.p50, report.p90, report.p95,
             "fitted" if args.affine else "none"))
    return EXIT_OK


def _cmd_sweep(argv, args, started):
    import csv
    import numpy as np
    from dataclasses import replace
    from . import (beamfeat, chartnet, classical, dissim, evalkit, presets,
                   scenesim)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ValueError("--values is empty")
    os.makedirs(args.out_dir, exist_ok=True)
    rows = []
    outputs = []
    for text in values:
        if args.param == "rows":
            value = int(text)
            scene = presets.sweep_rows(value, seed=args.seed, count=args.count)
        else:
            value = float(text)
            scene = presets.sweep_density(value, seed=args.seed)
        ds = scenesim.generate_dataset(scene)
        feats, _ = beamfeat.featurize_dataset(ds)
        raw = dissim.dissimilarity_matrix(ds, eta=args.eta)
        geo = dissim.geodesic_matrix(dissim.knn_graph(raw, k=args.k))
        lo = np.min([r.box.lo for r in scene.ue_regions], axis=0) - 0.5
        hi = np.max([r.box.hi for r in scene.ue_regions], axis=0) + 0.5
        tri, _ = classical.triangulate_dataset(ds, region=(lo, hi))
        config = chartnet.TrainConfig(out_dim=3, epochs=args.epochs,
                                      batch_pairs=args.batch_pairs,
                                      learning_rate=args.lr, beta=args.beta,
                                      loss="siamese", rng_seed=args.seed_train)
        result = chartnet.train_fcf(feats, geo, config)
        chart = chartnet.infer(result.params, feats)
        truth = ds.positions.astype(float)
        rep_tri = evalkit.evaluate(tri, truth, fit_affine=False)
        rep_chart = evalkit.evaluate(chart, truth, fit_affine=True)
        vdir = os.path.join(args.out_dir, "%s_%s" % (args.param, text))
        os.makedirs(vdir, exist_ok=True)
        tri_path = os.path.join(vdir, "triangulation.csv")
        chart_path = os.path.join(vdir, "chart.csv")
        _write_positions_csv(tri_path, tri)
        _write_positions_csv(chart_path, chart)
        outputs.extend([tri_path, chart_path])
        for method, rep in (("triangulation", rep_tri), ("chart", rep_chart)):
            rows.append((args.param, text, method, rep.mae, rep.p50, rep.p90,
                         rep.p95))
        print("sweep %s=%s: triangulation mae %.4f, chart mae %.4f"
              % (args.param, text, rep_tri.mae, rep_chart.mae))
    table = os.path.join(args.out_dir, "sweep.csv")
    with open(table, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["param", "value", "method", "mae_m", "p50_m", "p90_m", "p95_m"])
        for row in rows:
            w.writerow(list(row[:3]) + ["%.9g" % v for v in row[3:]])
    outputs.insert(0, table)
    if args.manifest is None:
        args.manifest = os.path.join(args.out_dir, "sweep.manifest.json")
    _write_manifest(argv, args, outputs, started)
    return EXIT_OK


_HANDLERS = {
    "simulate": _cmd_simulate,
    "features": _cmd_features,
    "dissim": _cmd_dissim,
    "triangulate": _cmd_triangulate,
    "chart": _cmd_chart,
    "multistory": _cmd_multistory,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
}


def run(argv):
    """Execute one CLI invocation, returning the exit code."""
    argv = list(argv)
    threads = _apply_thread_env(_peek_threads(argv))
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    from . import backend
    if args.backend:
        backend.use_backend(args.backend)
    if threads:
        backend.set_threads(threads)

    from .classical import AmbiguousAngleError, GimbalLockError, UninformativeError
    from .dissim import DisconnectedGraphError
    from .evalkit import RankDeficientError
    from .scenesim import DegenerateGeometryError
    from .tensors import CcdsError, DatasetValidationError
    started = time.time()
    try:
        return _HANDLERS[args.command](argv, args, started)
    except FileNotFoundError as e:
        print("chartloc: missing input: %s" % e, file=sys.stderr)
        return EXIT_MISSING
    except (CcdsError, DatasetValidationError) as e:
        print("chartloc: bad input: %s" % e, file=sys.stderr)
        return EXIT_FORMAT
    except (DisconnectedGraphError, UninformativeError, GimbalLockError,
            AmbiguousAngleError, DegenerateGeometryError, RankDeficientError,
            RuntimeError) as e:
        print("chartloc: computation failed: %s" % e, file=sys.stderr)
        return EXIT_COMPUTE
    except (ValueError, KeyError, json.JSONDecodeError) as e:
        print("chartloc: bad input: %s" % e, file=sys.stderr)
        return EXIT_FORMAT
    except Exception as e:  # pragma: no cover
        import traceback
        traceback.print_exc()
        print("chartloc: unexpected error: %s" % e, file=sys.stderr)
        return EXIT_UNEXPECTED


def replay_manifest(manifest_path):
    """Re-execute a manifest's argv and verify each recorded output
    reproduces bit-exactly. Returns {path: {"expected", "actual", "match"}}."""
    with open(manifest_path) as f:
        doc = json.load(f)
    code = run(doc["argv"])
    if code != EXIT_OK:
        raise RuntimeError("replay of %s exited with %d" % (manifest_path, code))
    result = {}
    for out in doc["outputs"]:
        actual = _sha256(out["path"])
        result[out["path"]] = {"expected": out["sha256"], "actual": actual,
                               "match": actual == out["sha256"]}
    return result


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
