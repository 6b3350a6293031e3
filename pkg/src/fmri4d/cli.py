"""Command-line pipeline driver.

Each subcommand reads a declarative JSON config plus volume files from
disk, runs one pipeline stage, and writes its outputs atomically into
``--out``:

    phantom      -> truth, labels
    degrade      -> observed, motion.csv
    reconstruct  -> recon_lrtv, convergence.csv
    interp       -> recon_<method>, coverage_<method>
    metrics      -> metrics.csv (and a table on stdout)
    fc           -> fc_<name>.csv, carpet_<name>.csv (+ region sidecar)

Exit codes: 0 success, 2 validation problem (bad config, missing or
corrupt file), 3 numeric failure. A solver that stops at the iteration
cap still exits 0 and prints a warning to stderr.

Randomness is controlled by one base seed (config ``seed``, overridable
with ``--seed``): the phantom draws at base, motion at base + 1000,
noise at base + 2000, so stages stay reproducible independently.
"""

import argparse
import json
import os
import sys

import jsonschema
import numpy as np

from . import volfile
from .errors import NumericError
from .fc import DEFAULT_BAND_HZ, bandpass, carpet_export, pearson_fc, roi_average
from .geometry import AcquisitionGeometry, BlurSpec, MotionTrajectory
from .interp3d import KERNELS, reconstruct_series_3d
from .metrics import evaluate_methods
from .phantom import (
    DegradationSpec,
    PhantomSpec,
    degrade,
    make_motion,
    make_phantom,
)
from .recon import CONVERGENCE_COLUMNS, ReconConfig, reconstruct
from .tensor4d import Volume4D

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_VEC = lambda n, item: {  # noqa: E731
    "type": "array",
    "items": item,
    "minItems": n,
    "maxItems": n,
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": _INT,
        "phantom": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "hr_dims": _VEC(3, _INT),
                "n_timepoints": _INT,
                "tr_s": _NUM,
                "region_intensities": _VEC(4, _NUM),
                "texture_amplitude": _NUM,
                "bold": {
                    "type": "array",
                    "minItems": 4,
                    "maxItems": 4,
                    "items": {"type": "array", "items": _VEC(3, _NUM)},
                },
                "drift_per_s": _VEC(4, _NUM),
            },
        },
        "degradation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_rotation_deg": _NUM,
                "max_translation_mm": _NUM,
                "walk_step_deg": _NUM,
                "walk_step_mm": _NUM,
                "burst_probability": _NUM,
                "burst_timepoints": {"type": "array", "items": _INT},
                "noise_sigma": _NUM,
            },
        },
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lr_dims": _VEC(3, _INT),
                "downsample_factors": _VEC(3, _INT),
                "in_plane_spacing": _NUM,
                "slice_thickness": _NUM,
                "blur_fwhm_mm": {
                    "oneOf": [_VEC(3, _NUM), {"type": "null"}]
                },
                "interleave": {
                    "oneOf": [{"type": "array", "items": _INT}, {"type": "null"}]
                },
            },
        },
        "recon": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambda_rank": _NUM,
                "lambda_tv": _NUM,
                "alpha": _VEC(4, _NUM),
                "rho": _NUM,
                "epsilon": _NUM,
                "max_outer_iters": _INT,
                "inner_steps": _INT,
                "step_init": _NUM,
                "step_shrink": _NUM,
                "max_backtracks": _INT,
                "tv_epsilon": _NUM,
            },
        },
        "fc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"band_hz": _VEC(2, _NUM)},
        },
        "metrics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "data_range": {"oneOf": [_NUM, {"type": "null"}]},
                "mask": {"enum": ["labels", "full"]},
            },
        },
    },
}


def load_config(path) -> dict:
    try:
        with open(path, "rb") as f:
            cfg = json.loads(f.read().decode("utf-8"))
    except OSError as e:
        raise ValueError(f"{path}: {e}") from e
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValueError(f"{path}: not valid JSON: {e}") from e
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "top level"
        raise ValueError(f"{path}: invalid config at {where}: {e.message}") from e
    return cfg


def _base_seed(args, cfg) -> int:
    if args.seed is not None:
        return int(args.seed)
    return int(cfg.get("seed", 0))


def build_phantom_spec(cfg, seed) -> PhantomSpec:
    p = dict(cfg.get("phantom", {}))
    for key in ("hr_dims", "region_intensities", "drift_per_s"):
        if key in p:
            p[key] = tuple(p[key])
    if "bold" in p:
        p["bold"] = tuple(
            tuple(tuple(term) for term in region) for region in p["bold"]
        )
    return PhantomSpec(seed=seed, **p)


def build_degradation_spec(cfg, seed) -> DegradationSpec:
    d = dict(cfg.get("degradation", {}))
    if "burst_timepoints" in d:
        d["burst_timepoints"] = tuple(d["burst_timepoints"])
    return DegradationSpec(seed=seed, **d)


def build_geometry(cfg) -> AcquisitionGeometry:
    g = dict(cfg.get("geometry", {}))
    for key in ("lr_dims", "downsample_factors"):
        if key in g:
            g[key] = tuple(g[key])
    if g.get("interleave") is not None and "interleave" in g:
        g["interleave"] = tuple(g["interleave"])
    fwhm = g.pop("blur_fwhm_mm", None)
    if fwhm is not None:
        g["blur"] = BlurSpec(fwhm_mm=tuple(fwhm))
    return AcquisitionGeometry(**g)


def build_recon_config(cfg) -> ReconConfig:
    r = dict(cfg.get("recon", {}))
    if "alpha" in r:
        r["alpha"] = tuple(r["alpha"])
    return ReconConfig(**r)


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _stem(args, name) -> str:
    return os.path.join(args.out, name)


def _say(path):
    print(f"wrote {path}")


def cmd_phantom(args) -> int:
    cfg = load_config(args.config)
    spec = build_phantom_spec(cfg, _base_seed(args, cfg))
    truth, labels = make_phantom(spec)
    out = _outdir(args)
    for p in volfile.write_volume(os.path.join(out, "truth"), truth):
        _say(p)
    for p in volfile.write_labels(
        os.path.join(out, "labels"), labels, spacing=truth.spacing
    ):
        _say(p)
    return 0


def cmd_degrade(args) -> int:
    cfg = load_config(args.config)
    base = _base_seed(args, cfg)
    geom = build_geometry(cfg)
    dspec = build_degradation_spec(cfg, base + 1000)
    truth = volfile.read_volume(args.truth or _stem(args, "truth"))
    if truth.shape[:3] != geom.hr_dims:
        raise ValueError(
            f"truth dims {truth.shape[:3]} do not match HR grid {geom.hr_dims}"
        )
    motion = make_motion(dspec, geom, truth.shape[3])
    observed = degrade(
        truth, geom, motion, dspec.noise_sigma, seed=base + 2000,
        threads=args.threads,
    )
    out = _outdir(args)
    for p in volfile.write_volume(os.path.join(out, "observed"), observed):
        _say(p)
    motion_path = os.path.join(out, "motion.csv")
    tmp = motion_path + ".part"
    motion.to_csv(tmp)
    os.replace(tmp, motion_path)
    _say(motion_path)
    return 0


def _read_inputs(args):
    observed = volfile.read_volume(args.observed or _stem(args, "observed"))
    motion = MotionTrajectory.from_csv(args.motion or _stem(args, "motion.csv"))
    return observed, motion


def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config)
    geom = build_geometry(cfg)
    rcfg = build_recon_config(cfg)
    observed, motion = _read_inputs(args)
    recon, report = reconstruct(observed, geom, motion, rcfg, threads=args.threads)
    out = _outdir(args)
    for p in volfile.write_volume(os.path.join(out, "recon_lrtv"), recon):
        _say(p)
    conv_path = os.path.join(out, "convergence.csv")
    volfile.write_csv(conv_path, list(CONVERGENCE_COLUMNS), report.rows())
    _say(conv_path)
    if not report.converged:
        print(
            f"warning: stopped at the iteration cap ({report.iterations}) with "
            f"relative change {report.rel_change[-1]:.3e} above the tolerance",
            file=sys.stderr,
        )
    return 0


def cmd_interp(args) -> int:
    cfg = load_config(args.config)
    geom = build_geometry(cfg)
    observed, motion = _read_inputs(args)
    series, covered = reconstruct_series_3d(
        observed, geom, motion, args.method, threads=args.threads
    )
    out = _outdir(args)
    for p in volfile.write_volume(os.path.join(out, f"recon_{args.method}"), series):
        _say(p)
    cover = Volume4D(covered.astype(np.float64), series.spacing, series.origin)
    for p in volfile.write_volume(os.path.join(out, f"coverage_{args.method}"), cover):
        _say(p)
    return 0


def _metrics_mask(cfg, args, shape):
    mode = cfg.get("metrics", {}).get("mask", "labels")
    if mode == "full":
        return None
    labels_stem = args.labels or _stem(args, "labels")
    labels = volfile.read_labels(labels_stem)
    if labels.shape != shape:
        raise ValueError(
            f"label dims {labels.shape} do not match series dims {shape}"
        )
    return labels > 0


def cmd_metrics(args) -> int:
    cfg = load_config(args.config)
    series = {}
    for item in args.series:
        if "=" not in item:
            raise ValueError(f"--series wants name=path, got {item!r}")
        name, stem = item.split("=", 1)
        series[name] = volfile.read_volume(stem)
    if "observed" not in series:
        series["observed"] = volfile.read_volume(_stem(args, "observed"))
    reference = volfile.read_volume(args.reference or _stem(args, "truth"))
    mask = _metrics_mask(cfg, args, reference.shape[:3])
    report = evaluate_methods(
        series, reference, mask=mask,
        data_range=cfg.get("metrics", {}).get("data_range"),
    )
    out = _outdir(args)
    rows = report.to_csv_rows()
    path = os.path.join(out, "metrics.csv")
    volfile.write_csv(path, rows[0], rows[1:])
    _say(path)
    print(report.format_table())
    return 0


def cmd_fc(args) -> int:
    cfg = load_config(args.config)
    stem = args.series or _stem(args, "recon_lrtv")
    name = os.path.basename(volfile._stem(stem))
    vol = volfile.read_volume(stem)
    labels = volfile.read_labels(args.labels or _stem(args, "labels"))
    if labels.shape != vol.shape[:3]:
        raise ValueError(
            f"label dims {labels.shape} do not match series dims {vol.shape[:3]}"
        )
    band = tuple(cfg.get("fc", {}).get("band_hz", DEFAULT_BAND_HZ))
    ts = roi_average(vol, labels)
    fc = pearson_fc(bandpass(ts, band[0], band[1]))
    out = _outdir(args)

    fc_path = os.path.join(out, f"fc_{name}.csv")
    ids = [str(r) for r in fc.region_ids]
    volfile.write_csv(
        fc_path,
        ["region"] + ids,
        [[ids[i]] + list(fc.values[i]) for i in range(len(ids))],
    )
    _say(fc_path)

    carpet = carpet_export(vol, labels)
    n = carpet.values.shape[1]
    carpet_path = os.path.join(out, f"carpet_{name}.csv")
    volfile.write_csv(
        carpet_path,
        [f"t{j}" for j in range(n)],
        carpet.values,
    )
    _say(carpet_path)
    sidecar = os.path.join(out, f"carpet_{name}_regions.csv")
    volfile.write_csv(
        sidecar,
        ["region", "start_row"],
        list(zip(carpet.region_ids, carpet.boundaries)),
    )
    _say(sidecar)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmri4d",
        description="Motion-compensated 4D fMRI reconstruction pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, inputs=()):
        p.add_argument("--config", required=True, help="JSON pipeline config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's base seed")
        for flag, msg in inputs:
            p.add_argument(flag, default=None, help=msg)

    p = sub.add_parser("phantom", help="synthesize the ground-truth series")
    common(p)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("degrade", help="simulate the motion-corrupted acquisition")
    common(p, [("--truth", "truth volume stem (default <out>/truth)")])
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("reconstruct", help="run the 4D solver")
    common(p, [("--observed", "observed volume stem (default <out>/observed)"),
               ("--motion", "motion CSV (default <out>/motion.csv)")])
    p.add_argument("--method", choices=["lrtv"], default="lrtv")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("interp", help="per-volume scattered interpolation baseline")
    common(p, [("--observed", "observed volume stem (default <out>/observed)"),
               ("--motion", "motion CSV (default <out>/motion.csv)")])
    p.add_argument("--method", choices=sorted(KERNELS), required=True)
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser("metrics", help="score series against a reference")
    common(p, [("--reference", "reference volume stem (default <out>/truth)"),
               ("--labels", "label volume stem (default <out>/labels)")])
    p.add_argument("--series", action="append", default=[],
                   metavar="NAME=STEM",
                   help="series to score; observed is added automatically")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("fc", help="region-pair connectivity and carpet export")
    common(p, [("--series", "series stem (default <out>/recon_lrtv)"),
               ("--labels", "label volume stem (default <out>/labels)")])
    p.set_defaults(func=cmd_fc)

    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
