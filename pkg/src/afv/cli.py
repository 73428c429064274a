"""Command-line interface: synth, beamform, render, pipeline, pack, bench.

Configuration precedence is built-in defaults < --config JSON file < flags.
Exit codes: 0 success, 2 configuration/validation error, 3 processing error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import audio_io, beamform, fieldpipe, render, vlm_pack
from .errors import AfvError, ValidationError
from .fieldpipe import MedianWindow
from .geometry import CameraModel, build_grid, load_default_geometry, parse_geometry
from .pipeline import (
    PipelineConfig,
    config_dump,
    load_config_file,
    resolve_config,
    run_bench,
    run_pipeline,
    stream_metadata,
)
from .simulate import ground_truth_pixel, in_frame, scene_from_json, synth_scene


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v != ""]


def _int_pair(text: str) -> tuple[int, int]:
    parts = [int(v) for v in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated indices")
    return parts[0], parts[1]


def _add_config_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("pipeline configuration")
    g.add_argument("--config", metavar="JSON", help="config file merged over defaults")
    g.add_argument("--geometry", dest="geometry_path", metavar="XML")
    g.add_argument("--camera-width", dest="camera_width", type=int)
    g.add_argument("--camera-height", dest="camera_height", type=int)
    g.add_argument("--diagonal-fov", dest="diagonal_fov_deg", type=float)
    g.add_argument("--chunk-size", dest="chunk_size", type=int)
    g.add_argument("--fft-size", dest="fft_size", type=int)
    g.add_argument("--window", choices=["hann", "rect"])
    g.add_argument("--overlap", type=float)
    g.add_argument("--bands", dest="bands_hz", type=_float_list, metavar="HZ,HZ,...")
    g.add_argument("--floors", dest="floors_db", type=_float_list, metavar="DB,DB,...")
    g.add_argument("--clips", dest="clips_db", type=_float_list, metavar="DB,DB,...")
    g.add_argument("--median-window", dest="median_window", type=int)
    g.add_argument("--n-sources", dest="n_sources", type=int)
    g.add_argument("--grid-cols", dest="grid_cols", type=int)
    g.add_argument("--grid-rows", dest="grid_rows", type=int)
    g.add_argument("--grid-distance", dest="grid_distance_m", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--spl-ref", dest="spl_ref", type=float)
    g.add_argument("--speed-of-sound", dest="speed_of_sound", type=float)
    g.add_argument("--csm-chunks", dest="csm_chunks", type=int)
    g.add_argument("--stereo-channels", dest="stereo_channels", type=_int_pair, metavar="L,R")
    g.add_argument("--stacked", dest="stacked", action="store_true", default=None)
    g.add_argument("--overlay-only", dest="stacked", action="store_false")
    g.add_argument("--dump-config", action="store_true",
                   help="print the effective configuration as JSON and exit")


def _resolve(args) -> PipelineConfig:
    file_values = load_config_file(args.config) if args.config else None
    overrides = {
        key: getattr(args, key)
        for key in (
            "geometry_path", "camera_width", "camera_height", "diagonal_fov_deg",
            "chunk_size", "fft_size", "window", "overlap", "bands_hz", "floors_db",
            "clips_db", "median_window", "n_sources", "grid_cols", "grid_rows",
            "grid_distance_m", "alpha", "spl_ref", "speed_of_sound", "csm_chunks",
            "stereo_channels", "stacked",
        )
        if getattr(args, key, None) is not None
    }
    return resolve_config(file_values, overrides)


def _maybe_dump_config(args, config: PipelineConfig) -> bool:
    if getattr(args, "dump_config", False):
        print(json.dumps(config_dump(config), indent=2))
        return True
    return False


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise ValidationError(f"--{name.replace('_', '-')} is required")


def cmd_synth(args) -> int:
    config = _resolve(args)
    if _maybe_dump_config(args, config):
        return 0
    _require(args, "scene", "out")
    scene = scene_from_json(Path(args.scene).read_text())
    geom = (
        parse_geometry(Path(args.geometry_path).read_text())
        if args.geometry_path else load_default_geometry()
    )
    buffer = synth_scene(scene, geom, c=config.speed_of_sound)
    audio_io.write_wav(buffer, args.out, bit_depth=args.bit_depth)
    print(f"wrote {buffer.n_frames} frames x {buffer.n_channels} ch to {args.out}")
    if args.truth:
        cam = CameraModel(config.camera_width, config.camera_height, config.diagonal_fov_deg)
        grid = build_grid(cam, config.grid_cols, config.grid_rows, config.grid_distance_m)
        entries = []
        for src in scene.sources:
            pixel = ground_truth_pixel(src, cam)
            entries.append({
                "position": list(src.position),
                "kind": src.kind,
                "pixel": list(pixel),
                "cell": list(grid.pixel_to_cell(*pixel)),
                "in_frame": in_frame(cam, pixel),
            })
        truth = {
            "schema": 1,
            "camera": {"width": cam.width, "height": cam.height,
                       "diagonal_fov_deg": cam.diagonal_fov_deg},
            "grid": {"cols": grid.cols, "rows": grid.rows, "distance_m": grid.distance_m},
            "sources": entries,
        }
        Path(args.truth).write_text(json.dumps(truth, indent=2) + "\n")
        print(f"wrote ground truth to {args.truth}")
    return 0


def cmd_beamform(args) -> int:
    config = _resolve(args)
    if _maybe_dump_config(args, config):
        return 0
    _require(args, "audio", "out")
    result = run_pipeline(config, args.audio, oracle=args.oracle, keep_frames=False)
    music_spl = np.stack([
        np.stack([m.values for m in rec.spl_maps]) for rec in result.records
    ]) if result.records else np.zeros((0, len(config.bands), config.grid_rows, config.grid_cols))
    arrays = {"music_spl_db": music_spl}
    if args.oracle:
        arrays["bartlett_linear"] = np.stack([
            np.stack([m.values for m in rec.bartlett_linear]) for rec in result.records
        ])
    meta = stream_metadata(config, result.sample_rate)
    np.savez_compressed(args.out, meta=json.dumps(meta), **arrays)
    print(f"wrote {music_spl.shape[0]} frames x {music_spl.shape[1]} bands to {args.out}")
    return 0


def cmd_render(args) -> int:
    config = _resolve(args)
    if _maybe_dump_config(args, config):
        return 0
    _require(args, "maps", "out_dir")
    with np.load(args.maps, allow_pickle=False) as data:
        music_spl = data["music_spl_db"]
        meta = json.loads(str(data["meta"]))
    from .pipeline import _video_frames

    n_frames = music_spl.shape[0]
    conventional = _video_frames(args.video, n_frames, config.camera_width, config.camera_height)
    median = MedianWindow(config.median_window)
    frames = []
    for i in range(n_frames):
        fields = []
        for b, band in enumerate(config.bands):
            spl = beamform.FieldMap(
                values=music_spl[i, b], band_hz=band.center_hz,
                chunk_index=i, units="db", power=1.0,
            )
            floored = fieldpipe.floor_subtract(spl, band.floor_db)
            fields.append(fieldpipe.clip_top(floored, band.clip_db))
        smoothed = median.push(fieldpipe.composite(fields))
        field_img = fieldpipe.upsample(smoothed, config.camera_width, config.camera_height)
        af = render.overlay(render.grayscale(conventional[i]), field_img, config.alpha)
        frames.append(render.stack_pair(conventional[i], af) if config.stacked else af)
    meta_out = dict(meta)
    meta_out.update(stream_metadata(config, meta.get("sample_rate", 44100)))
    render.write_frame_sequence(frames, args.out_dir, meta_out)
    print(f"wrote {len(frames)} frames to {args.out_dir}")
    return 0


def cmd_pipeline(args) -> int:
    config = _resolve(args)
    if _maybe_dump_config(args, config):
        return 0
    _require(args, "audio", "out_dir")
    result = run_pipeline(
        config, args.audio, video=args.video, out_dir=args.out_dir,
        oracle=args.oracle, parallel=args.parallel,
    )
    print(f"wrote {result.n_frames} frames at {result.fps:.2f} fps to {args.out_dir}")
    if args.stereo_out:
        buffer = audio_io.read_wav(args.audio)
        left, right = config.stereo_channels
        stereo = audio_io.extract_stereo(buffer, left, right)
        audio_io.write_wav(stereo, args.stereo_out)
        print(f"wrote stereo pair (channels {left},{right}) to {args.stereo_out}")
    return 0


def cmd_pack(args) -> int:
    manifest = vlm_pack.package_request(
        args.mode, args.frames, args.audio, args.question
    )
    Path(args.out).write_text(vlm_pack.manifest_to_json(manifest))
    print(f"wrote request manifest to {args.out}")
    if args.dispatch_mock:
        transport = vlm_pack.MockTransport()
        print(transport.dispatch(manifest))
    return 0


def cmd_bench(args) -> int:
    config = _resolve(args)
    if _maybe_dump_config(args, config):
        return 0
    _require(args, "audio")
    report = run_bench(config, args.audio, repeats=args.repeats, parallel=args.parallel)
    print(report.table())
    if args.out:
        Path(args.out).write_text(json.dumps(report.summary(), indent=2) + "\n")
        print(f"wrote timing report to {args.out}")
    return 0 if report.deterministic else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afv",
        description="Acoustic field video: camera-aligned sound maps from array audio.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a scene WAV plus ground truth")
    p.add_argument("--scene", help="scene JSON file")
    p.add_argument("--out", help="output WAV path")
    p.add_argument("--truth", help="optional ground-truth JSON output")
    p.add_argument("--bit-depth", choices=audio_io.BIT_DEPTHS, default="float32")
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("beamform", help="compute per-band SPL maps from a WAV")
    p.add_argument("--audio", help="input multichannel WAV")
    p.add_argument("--out", help="output .npz of per-frame band maps")
    p.add_argument("--oracle", action="store_true",
                   help="also compute the delay-and-sum oracle maps")
    _add_config_flags(p)
    p.set_defaults(func=cmd_beamform)

    p = sub.add_parser("render", help="post-process band maps into overlay frames")
    p.add_argument("--maps", help=".npz produced by the beamform subcommand")
    p.add_argument("--video", help="still PNG or directory of frame_%%06d.png")
    p.add_argument("--out-dir", dest="out_dir", help="frame output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("pipeline", help="full chain: WAV to frame sequence + manifest")
    p.add_argument("--audio", help="input multichannel WAV")
    p.add_argument("--video", help="still PNG or directory of frame_%%06d.png")
    p.add_argument("--out-dir", dest="out_dir", help="frame output directory")
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--parallel", action="store_true", help="compute bands in parallel")
    p.add_argument("--stereo-out", dest="stereo_out", help="also write the stereo pair WAV")
    _add_config_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("pack", help="bundle frames + stereo + question into a request")
    p.add_argument("--mode", choices=vlm_pack.MODES, required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--frames", required=True, help="frame-sequence manifest.json")
    p.add_argument("--audio", required=True, help="stereo WAV path")
    p.add_argument("--out", required=True, help="request manifest output path")
    p.add_argument("--dispatch-mock", action="store_true",
                   help="send through the mock transport and print the reply")
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("bench", help="time pipeline stages over repeated runs")
    p.add_argument("--audio", help="input multichannel WAV")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--parallel", action="store_true")
    p.add_argument("--out", help="optional JSON timing report path")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (AfvError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
