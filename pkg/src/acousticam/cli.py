"""Command-line entry points.

Subcommands:

    simulate   distortion/RMSE study over (k, L) combinations
    synth      render a source-event script to a multichannel WAV
    calibrate  measure burst TDOAs from a WAV and fit the pixel map
    render     stream a WAV into per-frame acoustic-image rasters
    opcount    per-frame complex-multiplication accounting

Every documented failure (bad files, mismatched counts, rate mismatch,
underdetermined fits, ...) exits nonzero with a message on stderr.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import dsp, imaging, rasters, synth, wavio
from .camera import CameraModel
from .geometry import load_geometry, nominal_square_array
from .regression import RegressionModel, TargetSet, fit
from .study import StudyConfig, run_simulation_study


def load_targets(path) -> tuple[np.ndarray, int, int]:
    """Read a calibration-targets file.

    First non-comment line must be 'image <width> <height>'; every further
    line is one 'u v' target pixel, listed in recording order.
    """
    dims = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if dims is None:
                if tokens[0].lower() != "image" or len(tokens) != 3:
                    raise ValueError(
                        f"{path}:{lineno}: first line must be 'image <width> <height>'"
                    )
                dims = (int(tokens[1]), int(tokens[2]))
            else:
                if len(tokens) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 'u v'")
                rows.append([float(tokens[0]), float(tokens[1])])
    if dims is None or not rows:
        raise ValueError(f"{path}: no image dimensions or targets found")
    return np.array(rows), dims[0], dims[1]


def _geometry_from_args(args):
    if args.geometry:
        return load_geometry(args.geometry)
    return nominal_square_array()


def cmd_simulate(args) -> int:
    cfg = StudyConfig(
        camera=CameraModel(args.width, args.height, 0.0),
        geometry=_geometry_from_args(args),
        l_values=tuple(args.l_list),
        k_values=tuple(args.k_list),
        grid=args.grid,
        q=args.q,
        plane_z=args.plane_z,
        seed=args.seed,
        acoustic_model=args.acoustic_model,
    )
    report = run_simulation_study(cfg)
    print(report.format_table())
    if args.out:
        report.to_csv(args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_synth(args) -> int:
    geometry = _geometry_from_args(args)
    events = synth.parse_script(args.script)
    audio = synth.synthesize(geometry, events, seed=args.seed)
    wavio.write_wav(args.out, audio, int(geometry.sample_rate))
    print(f"wrote {args.out}: {audio.shape[0]} samples x {audio.shape[1]} channels")
    return 0


def cmd_calibrate(args) -> int:
    geometry = load_geometry(args.geometry)
    targets, width, height = load_targets(args.targets)
    audio, rate = wavio.read_wav(args.audio)
    if rate != int(geometry.sample_rate):
        raise ValueError(
            f"sample-rate mismatch: {args.audio} is {rate} Hz but the "
            f"geometry expects {geometry.sample_rate:g} Hz"
        )
    if audio.shape[1] != geometry.n_mics:
        raise ValueError(
            f"channel mismatch: {args.audio} has {audio.shape[1]} channels "
            f"but the geometry has {geometry.n_mics} microphones"
        )
    measured = dsp.measure_targets(
        audio,
        args.frame,
        geometry.max_tdoa(),
        args.threshold,
        frames_per_target=args.frames_per_target,
        expected_targets=len(targets),
    )
    tdoas = np.array(measured[: len(targets)])
    model = fit(
        TargetSet(targets, tdoas),
        args.order,
        width,
        height,
        sample_rate=geometry.sample_rate,
    )
    predicted = model.predict(targets[:, 0], targets[:, 1])
    residual = float(np.sqrt(np.mean((predicted - tdoas) ** 2)))
    model.save(args.out)
    print(f"wrote {args.out}: order {args.order}, fit residual {residual:.4g} samples RMS")
    return 0


def cmd_render(args) -> int:
    model = RegressionModel.load(args.model)
    audio, rate = wavio.read_wav(args.audio)
    if model.sample_rate and rate != int(model.sample_rate):
        raise ValueError(
            f"sample-rate mismatch: {args.audio} is {rate} Hz but the model "
            f"was calibrated at {model.sample_rate:g} Hz"
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    steering = imaging.build_steering(model, args.frame)
    svd_model = imaging.truncate(steering, args.delta)
    n_mics = int(round((1 + np.sqrt(1 + 8 * model.n_pairs)) / 2))
    brute, fast, ratio = imaging.op_counts(
        model.width, model.height, n_mics, args.frame, svd_model.rank
    )
    print(
        f"rank {svd_model.rank} factorization: {fast} complex multiplies/frame "
        f"vs {brute} dense ({ratio:.1f}x fewer)"
    )

    hop = args.hop if args.hop else args.frame
    count = 0
    for start, block in dsp.iter_frames(audio, args.frame, hop):
        t0 = time.perf_counter()
        frames = dsp.stft_frame(block)
        sv = dsp.phat_supervector(frames)
        image = imaging.image_fast(svd_model, sv)
        elapsed = (time.perf_counter() - t0) * 1000.0
        if args.verify and count == 0:
            reference = imaging.image_brute(steering, sv)
            worst = float(np.max(np.abs(image - reference)))
            budget = 1e-2 * model.n_pairs * (args.frame // 2 + 1)
            print(f"verify: max |fast - brute| = {worst:.4g} (budget {budget:.4g})")
            if worst > budget:
                raise RuntimeError(
                    f"fast/brute image mismatch: {worst:.4g} exceeds {budget:.4g}"
                )
        stem = out_dir / f"frame_{count:05d}"
        rasters.write_pgm(f"{stem}.pgm", rasters.scale_to_unit(image))
        rasters.write_csv(f"{stem}.csv", image)
        print(f"frame {count:05d} @ {start}: {elapsed:.2f} ms, peak {image.max():.2f}")
        count += 1
    print(f"wrote {count} frames to {out_dir}")
    return 0


def cmd_opcount(args) -> int:
    brute, fast, ratio = imaging.op_counts(
        args.width, args.height, args.mics, args.frame, args.rank
    )
    print(f"dense:      {brute}")
    print(f"factorized: {fast}")
    print(f"ratio:      {ratio:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acousticam",
        description="Acoustic-image calibration and rendering toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="distortion/RMSE study")
    p.add_argument("--geometry", help="array geometry file (default: nominal square)")
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--k-list", type=float, nargs="+",
                   default=[-0.05, -0.025, 0.0, 0.025, 0.05])
    p.add_argument("--l-list", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--grid", type=int, default=5)
    p.add_argument("--q", type=int, default=1_000_000)
    p.add_argument("--plane-z", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--acoustic-model", choices=["plane-wave", "spherical"],
                   default="plane-wave")
    p.add_argument("--out", help="write the RMSE table as CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("synth", help="render a source script to WAV")
    p.add_argument("--geometry", help="array geometry file (default: nominal square)")
    p.add_argument("--script", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("calibrate", help="fit the pixel-to-TDOA model from a recording")
    p.add_argument("--audio", required=True)
    p.add_argument("--geometry", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--frame", type=int, default=512)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--frames-per-target", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("render", help="stream a WAV into acoustic-image rasters")
    p.add_argument("--audio", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frame", type=int, default=512)
    p.add_argument("--hop", type=int, default=0, help="default: frame size")
    p.add_argument("--delta", type=float, default=1e-5)
    p.add_argument("--verify", action="store_true",
                   help="check the first frame against the dense product")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("opcount", help="complex-multiplication accounting")
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--mics", type=int, default=4)
    p.add_argument("--frame", type=int, default=512)
    p.add_argument("--rank", type=int, default=32)
    p.set_defaults(func=cmd_opcount)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
