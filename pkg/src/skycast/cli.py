"""Command-line entry point: one subcommand per pipeline stage.

Exit codes are uniform across subcommands: 0 everything done, 1 some
items skipped or failed (details in the manifest or on stderr), 2 usage
or schema problems. A plain `key = value` config file plus repeatable
`--set key=value` overrides feed every knob; flags win over the file.
"""

import argparse
import os
import sys
from dataclasses import replace
from datetime import date as date_type

from . import dataset as ds
from . import images
from .baseline import AnalyticClearSky, smart_persistence_table
from .config import RunConfig, describe_keys
from .errors import CoverageError, SchemaError, SkycastError
from .geometry import CameraModel, undistort_image
from .latent import StateMatrix, gmm_fit, pca_fit, pca_project, scores_to_csv
from .metrics import EvalProtocol, evaluate_run, report_to_csv
from .plotting import day_curves_svg
from .satellite import RadianceStack, cloud_index
from .segmentation import HytaConfig, segment
from .series import IrradianceSeries
from .suntrack import (SunTrajectoryModel, detect_sun, fit_mae,
                       fit_trajectory, load_observations,
                       save_observations, sun_position)
from .tables import ForecastTable
from .timeutil import format_compact, format_iso, parse_compact, parse_iso

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


def _config_from_args(args):
    if args.config:
        return RunConfig.from_file(args.config, args.set or [])
    cfg = RunConfig()
    for item in args.set or []:
        if "=" not in item:
            raise SchemaError(f"override must be key=value, got {item!r}")
        name, raw = (part.strip() for part in item.split("=", 1))
        cfg.set(name, raw)
    return cfg


def _png_names(path):
    return sorted(n for n in os.listdir(path) if n.endswith(".png"))


def _center_crop(img, cam):
    h, w = img.shape[:2]
    if h == w:
        return img, cam
    side = min(h, w)
    y0 = (h - side) // 2
    x0 = (w - side) // 2
    cam = replace(cam, center=(cam.center[0] - x0, cam.center[1] - y0),
                  image_size=(side, side))
    return img[y0:y0 + side, x0:x0 + side], cam


def cmd_undistort(args, cfg):
    os.makedirs(args.out_dir, exist_ok=True)
    out_size = cfg["undistort.out_size"]
    written, errors = [], []
    cam = None
    for name in _png_names(args.in_dir):
        try:
            img = images.load_rgb(os.path.join(args.in_dir, name))
            if cfg["undistort.crop"] == "center":
                base = CameraModel.from_config(cfg, img.shape[:2][::-1])
                img, cam = _center_crop(img, base)
            else:
                cam = CameraModel.from_config(cfg, img.shape[:2][::-1])
            out = undistort_image(img, cam, out_size=out_size)
            images.save_rgb(os.path.join(args.out_dir, name), out)
            written.append(name)
        except (OSError, ValueError, SkycastError) as exc:
            errors.append({"file": name, "error": str(exc)})
    images.atomic_write_json(os.path.join(args.out_dir, "manifest.json"), {
        "command": "undistort",
        "out_size": out_size,
        "written": written,
        "errors": errors,
    })
    return EXIT_PARTIAL if errors else EXIT_OK


def cmd_segment(args, cfg):
    os.makedirs(args.out_dir, exist_ok=True)
    hyta = HytaConfig.from_config(cfg)
    model = None
    if args.suntrack:
        model = SunTrajectoryModel.load(args.suntrack)
    written, skipped = [], []
    hist_rows = ["timestamp_iso,sky,cloud,sun,saturation,frame"]
    for ts, paths in sorted(ds.scan_image_pairs(args.in_dir).items()):
        if "long" not in paths:
            skipped.append({"timestamp": format_iso(ts),
                            "reason": "no_long"})
            continue
        if "short" not in paths:
            skipped.append({"timestamp": format_iso(ts),
                            "reason": "no_short"})
            continue
        sun = None
        if model is not None:
            try:
                sun = sun_position(model, ts)
            except CoverageError:
                sun = None
        seg = segment(images.load_rgb(paths["long"]),
                      images.load_rgb(paths["short"]), sun=sun, cfg=hyta)
        name = f"{format_compact(ts, seconds=True)}_seg.png"
        seg.save(os.path.join(args.out_dir, name))
        counts = seg.class_counts()
        hist_rows.append(",".join([format_iso(ts)] + [
            str(counts[k]) for k in ("sky", "cloud", "sun", "saturation",
                                     "frame")]))
        written.append(name)
    images.atomic_write_text(os.path.join(args.out_dir, "classes.csv"),
                             "\n".join(hist_rows) + "\n")
    images.atomic_write_json(os.path.join(args.out_dir, "manifest.json"), {
        "command": "segment",
        "written": written,
        "skipped": skipped,
    })
    return EXIT_PARTIAL if skipped else EXIT_OK


def _protocol(cfg):
    return EvalProtocol(count=cfg["metrics.window_count"],
                        length=cfg["metrics.window_length"],
                        step_minutes=cfg["metrics.step_minutes"],
                        quantile=cfg["metrics.quantile"],
                        seed=cfg["seed"])


def cmd_evaluate(args, cfg):
    table = ForecastTable.load(args.pred_csv)
    reference = ForecastTable.load(args.reference_csv)
    report = evaluate_run(table, reference, _protocol(cfg))
    if args.report:
        images.atomic_write_json(args.report, report)
    if args.csv:
        images.atomic_write_text(args.csv, report_to_csv(report))
    if args.plot:
        day = (date_type.fromisoformat(args.day) if args.day
               else min(t.date() for t in table.issue_time))
        horizon = (args.plot_horizon if args.plot_horizon is not None
                   else max(table.horizons()))
        images.atomic_write_text(
            args.plot, day_curves_svg(table, horizon, day,
                                      reference=reference))
    for row in report["horizons"]:
        print(f"h={row['horizon_min']:g}min n={row['n']} "
              f"rmse={row['rmse']:.3f} fs={row['fs_percent']:.3f}% "
              f"q{cfg['metrics.quantile']:g}={row['quantile_abs']:.3f} "
              f"tdi={row['tdi']:.4f} (windows={row['windows']})")
    return EXIT_OK


def cmd_cloudindex(args, cfg):
    stack = RadianceStack.from_dir(
        args.in_dir, cadence_minutes=cfg["satellite.cadence_minutes"])
    os.makedirs(args.out_dir, exist_ok=True)
    times = ([parse_iso(args.time)] if args.time else
             list(stack.timestamps))
    written, errors = [], []
    for t in times:
        try:
            ci = cloud_index(stack, t, n_days=cfg["satellite.n_days"],
                             min_denominator=cfg[
                                 "satellite.min_denominator"])
            name = f"ci_{format_compact(t, seconds=True)}.png"
            ci.save(os.path.join(args.out_dir, name))
            written.append(name)
        except SkycastError as exc:
            errors.append({"timestamp": format_iso(t), "error": str(exc)})
    images.atomic_write_json(os.path.join(args.out_dir, "manifest.json"), {
        "command": "cloudindex",
        "n_days": cfg["satellite.n_days"],
        "written": written,
        "errors": errors,
    })
    return EXIT_PARTIAL if errors else EXIT_OK


def cmd_suntrack(args, cfg):
    if args.action == "detect":
        rows = []
        for name in _png_names(args.inputs[0]):
            stem = name.split("_")[0].split(".")[0]
            try:
                ts = parse_compact(stem)
            except ValueError:
                continue
            img = images.load_rgb(os.path.join(args.inputs[0], name))
            rows.append(detect_sun(
                img, saturation_level=cfg["suntrack.saturation_level"],
                area_min=cfg["suntrack.area_min"], timestamp=ts))
        save_observations(args.inputs[1], rows)
        print(f"detections={sum(1 for r in rows if r.visible)} "
              f"of {len(rows)}")
        return EXIT_OK
    if args.action == "fit":
        obs = load_observations(args.inputs[0])
        model = fit_trajectory(
            obs, min_obs_per_minute=cfg["suntrack.min_obs_per_minute"],
            min_days=cfg["suntrack.min_days"],
            poly_degree=cfg["suntrack.poly_degree"],
            ridge=cfg["suntrack.ridge"])
        model.save(args.inputs[1])
        print(f"fit_mae_px={fit_mae(model, obs):.9g}")
        return EXIT_OK
    if args.action == "predict":
        model = SunTrajectoryModel.load(args.inputs[0])
        x, y = sun_position(model, parse_iso(args.inputs[1]))
        print(f"{x:.6f},{y:.6f}")
        return EXIT_OK
    raise SchemaError(f"unknown suntrack action {args.action!r}")


def cmd_pca(args, cfg):
    states = StateMatrix.load(args.states)
    model = pca_fit(states, args.components)
    scores = pca_project(model, states)
    model.save(f"{args.out_prefix}_pca.json")
    images.atomic_write_text(f"{args.out_prefix}_scores.csv",
                             scores_to_csv(scores))
    ratios = model.explained_variance_ratio
    print("explained_variance_ratio="
          + " ".join(f"{r:.6f}" for r in ratios)
          + f" sum={ratios.sum():.6f}")
    if args.gmm:
        mixture = gmm_fit(scores[:, :2], k=args.gmm, seed=cfg["seed"])
        mixture.save(f"{args.out_prefix}_gmm.json")
        labels = mixture.predict(scores[:, :2])
        lines = ["row,cluster"] + [f"{i},{c}"
                                   for i, c in enumerate(labels)]
        images.atomic_write_text(f"{args.out_prefix}_clusters.csv",
                                 "\n".join(lines) + "\n")
        print(f"clusters={args.gmm} "
              f"iterations={len(mixture.log_likelihoods)}")
    return EXIT_OK


def cmd_dataset(args, cfg):
    site = ds.Site.from_config(cfg)
    if args.action == "index":
        index, rejects = ds.build_index(
            args.inputs[0], args.inputs[1], site,
            min_elevation_deg=cfg["dataset.min_elevation_deg"],
            cadence_minutes=cfg["dataset.cadence_minutes"])
        index.save(args.inputs[2])
        rejects_path = args.rejects or f"{args.inputs[2]}.rejects.csv"
        images.atomic_write_text(rejects_path, ds.rejects_to_csv(rejects))
        print(f"indexed={len(index)} rejected={len(rejects)}")
        return EXIT_PARTIAL if rejects else EXIT_OK
    if args.action == "split":
        index = ds.SampleIndex.load(args.inputs[0],
                                    cfg["dataset.cadence_minutes"])
        parts = ds.split(index, train_years=cfg["dataset.train_years"],
                         eval_year=cfg["dataset.eval_year"])
        os.makedirs(args.inputs[1], exist_ok=True)
        for name, part in parts.items():
            part.save(os.path.join(args.inputs[1], f"{name}.csv"))
        print(" ".join(f"{name}={len(part)}"
                       for name, part in parts.items()))
        return EXIT_OK
    if args.action == "window":
        index = ds.SampleIndex.load(args.inputs[0],
                                    cfg["dataset.cadence_minutes"])
        spec = ds.WindowSpec.from_config(cfg)
        cam = None
        if spec.geometry_mode == "undistorted":
            first = images.load_rgb(index.entries[0].long_path)
            cam = CameraModel.from_config(cfg, first.shape[:2][::-1])
        win = ds.assemble_window(index, parse_iso(args.inputs[1]), spec,
                                 cam=cam,
                                 out_size=cfg["undistort.out_size"],
                                 exposure=cfg["dataset.exposure"])
        prefix = args.inputs[2]
        ds.save_window_inputs(f"{prefix}_inputs.hnst", win.inputs)
        seg_files = []
        for i, labels in enumerate(win.seg_labels, start=1):
            name = f"{prefix}_seg{i}.png"
            images.save_segmap(name, labels)
            seg_files.append(os.path.basename(name))
        images.atomic_write_json(f"{prefix}_targets.json", {
            "issue_time": format_iso(win.issue_time),
            "anchor_ghi_wm2": win.anchor_ghi,
            "target_mode": spec.target_mode,
            "target_ghi": [float(v) for v in win.target_ghi],
            "seg_files": seg_files,
        })
        print(f"window inputs={win.inputs.shape} "
              f"horizons={len(win.target_ghi)}")
        return EXIT_OK
    raise SchemaError(f"unknown dataset action {args.action!r}")


def cmd_baseline(args, cfg):
    series = IrradianceSeries.load(args.ghi_csv)
    horizons = [float(h) for h in args.horizons.split(",") if h.strip()]
    src = AnalyticClearSky(cfg["site.latitude_deg"],
                           cfg["site.longitude_deg"],
                           cfg["site.altitude_m"])
    table = smart_persistence_table(
        series, horizons, src,
        floor=cfg["baseline.low_clearsky_floor_wm2"])
    table.save(args.out_csv)
    print(f"rows={len(table)} horizons={len(horizons)}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="skycast",
        description="sky-image irradiance nowcasting toolkit",
        epilog="configuration keys (key = default):\n" + describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", "-c", metavar="FILE",
                        help="key = value configuration file")
    parser.add_argument("--set", "-s", action="append", metavar="KEY=VALUE",
                        help="override one config key; wins over --config")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("undistort",
                       help="project fisheye PNGs onto the tangent plane")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_undistort)

    p = sub.add_parser("segment",
                       help="5-class sky segmentation of exposure pairs")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--suntrack", metavar="MODEL.json",
                   help="sun trajectory model for the sun class")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("evaluate",
                       help="score a forecast CSV against a reference run")
    p.add_argument("pred_csv")
    p.add_argument("reference_csv")
    p.add_argument("--report", metavar="OUT.json")
    p.add_argument("--csv", metavar="OUT.csv")
    p.add_argument("--plot", metavar="OUT.svg")
    p.add_argument("--day", metavar="YYYY-MM-DD",
                   help="calendar day to plot (default: first day)")
    p.add_argument("--plot-horizon", type=float, metavar="MIN",
                   help="horizon to plot (default: largest)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cloudindex",
                       help="per-pixel cloud index from radiance frames")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--time", metavar="ISO",
                   help="single frame to process (default: all)")
    p.set_defaults(func=cmd_cloudindex)

    p = sub.add_parser("suntrack",
                       help="detect sun positions, fit or query the "
                            "trajectory model")
    p.add_argument("action", choices=("detect", "fit", "predict"))
    p.add_argument("inputs", nargs=2,
                   metavar="ARG",
                   help="detect: IMG_DIR OUT.csv | fit: OBS.csv "
                        "OUT_MODEL.json | predict: MODEL.json TIMESTAMP")
    p.set_defaults(func=cmd_suntrack)

    p = sub.add_parser("pca",
                       help="principal components of a state matrix")
    p.add_argument("states", metavar="STATES.hnst")
    p.add_argument("out_prefix")
    p.add_argument("--components", "-k", type=int, default=4)
    p.add_argument("--gmm", type=int, metavar="K",
                   help="also cluster the first two score columns")
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("dataset",
                       help="index an image archive, split it, or "
                            "assemble a window")
    p.add_argument("action", choices=("index", "split", "window"))
    p.add_argument("inputs", nargs="+", metavar="ARG",
                   help="index: IMG_DIR GHI.csv OUT.csv | split: "
                        "INDEX.csv OUT_DIR | window: INDEX.csv "
                        "TIMESTAMP OUT_PREFIX")
    p.add_argument("--rejects", metavar="OUT.csv",
                   help="rejects report path (index action)")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("baseline",
                       help="smart-persistence forecast table from a "
                            "GHI series")
    p.add_argument("ghi_csv")
    p.add_argument("out_csv")
    p.add_argument("--horizons", default="2,6,10",
                   metavar="MIN[,MIN...]")
    p.set_defaults(func=cmd_baseline)

    return parser


_ARG_COUNTS = {"index": 3, "split": 2, "window": 3}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "dataset" and \
                len(args.inputs) != _ARG_COUNTS[args.action]:
            raise SchemaError(
                f"dataset {args.action} takes "
                f"{_ARG_COUNTS[args.action]} positional arguments")
        cfg = _config_from_args(args)
        return args.func(args, cfg)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SkycastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
