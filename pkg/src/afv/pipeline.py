"""End-to-end pipeline: audio chunks in, acoustic-field video frames out.

Per chunk: STFT snapshots -> per-band CSM -> MUSIC pseudo-spectrum -> dB ->
floor/clip per band -> four-band composite -> temporal median -> bilinear
upsample -> jet overlay on the (gray-scaled) conventional frame, optionally
stacked under the conventional frame. Stage wall-times are recorded per
frame for the bench report.
"""

from __future__ import annotations

import hashlib
import json
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from PIL import Image

from . import audio_io, beamform, fieldpipe, render, spectral
from .audio_io import MultichannelBuffer
from .errors import ProcessingError, ValidationError
from .fieldpipe import BandConfig, MedianWindow, NormalizedField
from .geometry import (
    ArrayGeometry,
    CameraModel,
    SteeringGrid,
    build_grid,
    load_default_geometry,
    parse_geometry,
)

GRAY_LEVEL = 128  # conventional frame substitute when no video is supplied


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the chain; the defaults are the reference stream setup.

    Resolution order is built-in defaults < config file < CLI flags.
    """

    geometry_path: str | None = None  # None -> bundled 16-mic lattice
    camera_width: int = 640
    camera_height: int = 360
    diagonal_fov_deg: float = 72.0
    chunk_size: int = 2048
    fft_size: int = 1024
    window: str = "hann"
    overlap: float = 0.5
    bands_hz: tuple[float, ...] = (2000.0, 4000.0, 6000.0, 8000.0)
    floors_db: tuple[float, ...] = (18.0, 20.0, 23.0, 27.0)
    clips_db: tuple[float, ...] = (0.2, 0.2, 0.5, 0.5)
    median_window: int = 8
    n_sources: int = 1
    grid_cols: int = 64
    grid_rows: int = 36
    grid_distance_m: float = 1.5
    alpha: float = 0.5
    spl_ref: float | None = None  # None -> default_ref_power(M, fft_size)
    speed_of_sound: float = 343.0
    loading_eps: float = 1e-6
    csm_chunks: int = 1
    stereo_channels: tuple[int, int] = (0, 3)
    stacked: bool = True

    def __post_init__(self):
        if len(self.bands_hz) != len(self.floors_db) or len(self.bands_hz) != len(self.clips_db):
            raise ValidationError("bands, floors and clips must have equal lengths")
        if not self.bands_hz:
            raise ValidationError("need at least one band")
        if not 0.0 <= self.overlap < 1.0:
            raise ValidationError(f"overlap must be in [0, 1), got {self.overlap}")
        if self.chunk_size < self.fft_size:
            raise ValidationError("chunk_size must be >= fft_size")
        if self.csm_chunks < 1:
            raise ValidationError("csm_chunks must be >= 1")

    @property
    def hop(self) -> int:
        return max(int(round(self.fft_size * (1.0 - self.overlap))), 1)

    @property
    def bands(self) -> tuple[BandConfig, ...]:
        return tuple(
            BandConfig(center_hz=b, floor_db=f, clip_db=c)
            for b, f, c in zip(self.bands_hz, self.floors_db, self.clips_db)
        )

    def frame_rate(self, sample_rate: int) -> float:
        return sample_rate / self.chunk_size


#: Keys accepted in a JSON config file / override mapping.
CONFIG_KEYS = tuple(f.name for f in fields(PipelineConfig))

_TUPLE_KEYS = {"bands_hz", "floors_db", "clips_db", "stereo_channels"}


def resolve_config(file_values: dict | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Merge config sources: built-in defaults < config file < overrides.

    Unknown keys are rejected so typos in config files fail loudly.
    """
    merged: dict = {}
    for layer in (file_values, overrides):
        if not layer:
            continue
        unknown = set(layer) - set(CONFIG_KEYS)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        merged.update({k: v for k, v in layer.items() if v is not None})
    for key in _TUPLE_KEYS & set(merged):
        merged[key] = tuple(merged[key])
    return PipelineConfig(**merged)


def load_config_file(path) -> dict:
    with open(path) as f:
        values = json.load(f)
    if not isinstance(values, dict):
        raise ValidationError(f"{path}: config file must hold a JSON object")
    return values


def config_dump(config: PipelineConfig) -> dict:
    """Effective configuration as a JSON-ready dict (golden-tested)."""
    out = {}
    for f in fields(PipelineConfig):
        value = getattr(config, f.name)
        out[f.name] = list(value) if isinstance(value, tuple) else value
    return out


@dataclass(frozen=True, eq=False)
class FrameRecord:
    """Everything the pipeline derived from one chunk."""

    frame_index: int
    music_linear: tuple[beamform.FieldMap, ...]
    spl_maps: tuple[beamform.FieldMap, ...]
    band_fields: tuple[NormalizedField, ...]
    composite: NormalizedField
    smoothed: NormalizedField
    bartlett_linear: tuple[beamform.FieldMap, ...] | None
    frame: np.ndarray | None
    frame_file: str | None


@dataclass(eq=False)
class PipelineResult:
    records: list[FrameRecord]
    manifest: dict | None
    fps: float
    sample_rate: int
    config: PipelineConfig
    geometry: ArrayGeometry
    camera: CameraModel
    grid: SteeringGrid
    timings: "StageTimings"

    @property
    def n_frames(self) -> int:
        return len(self.records)


@dataclass(eq=False)
class StageTimings:
    """Per-frame wall-clock milliseconds for each pipeline stage."""

    stages_ms: dict[str, list[float]] = field(default_factory=dict)
    total_ms: list[float] = field(default_factory=list)

    def add(self, stage: str, seconds: float):
        self.stages_ms.setdefault(stage, []).append(seconds * 1e3)

    def add_total(self, seconds: float):
        self.total_ms.append(seconds * 1e3)

    @property
    def n_frames(self) -> int:
        return len(self.total_ms)

    @staticmethod
    def _mean(xs: list[float]) -> float:
        return float(np.mean(xs)) if xs else 0.0

    @staticmethod
    def _p95(xs: list[float]) -> float:
        return float(np.percentile(xs, 95)) if xs else 0.0

    def summary(self) -> dict:
        stages = {
            name: {"mean_ms": self._mean(xs), "p95_ms": self._p95(xs)}
            for name, xs in sorted(self.stages_ms.items())
        }
        return {
            "frames": self.n_frames,
            "stages": stages,
            "total": {"mean_ms": self._mean(self.total_ms), "p95_ms": self._p95(self.total_ms)},
        }

    def table(self) -> str:
        lines = [f"{'stage':<18}{'mean ms':>10}{'p95 ms':>10}"]
        summary = self.summary()
        for name, row in summary["stages"].items():
            lines.append(f"{name:<18}{row['mean_ms']:>10.3f}{row['p95_ms']:>10.3f}")
        row = summary["total"]
        lines.append(f"{'total':<18}{row['mean_ms']:>10.3f}{row['p95_ms']:>10.3f}")
        return "\n".join(lines)


class AcousticFieldPipeline:
    """Stateful per-stream processor (median window, CSM accumulation).

    Band maps within one chunk are independent and may be computed in
    parallel; results are identical either way because each band's work is
    deterministic and isolated.
    """

    def __init__(self, config: PipelineConfig, geometry: ArrayGeometry | None = None,
                 sample_rate: int = 44100, parallel: bool = False, oracle: bool = False):
        self.config = config
        self.geometry = geometry if geometry is not None else _load_geometry(config)
        self.camera = CameraModel(
            width=config.camera_width,
            height=config.camera_height,
            diagonal_fov_deg=config.diagonal_fov_deg,
        )
        self.grid = build_grid(self.camera, config.grid_cols, config.grid_rows,
                               config.grid_distance_m)
        self.sample_rate = sample_rate
        self.oracle = oracle
        self.parallel = parallel
        self.band_bins = tuple(
            spectral.band_bin(b.center_hz, sample_rate, config.fft_size)
            for b in config.bands
        )
        self.steering = tuple(
            beamform.steering_matrix(self.grid, self.geometry, b.center_hz,
                                     config.speed_of_sound)
            for b in config.bands
        )
        self.ref_power = (
            config.spl_ref
            if config.spl_ref is not None
            else beamform.default_ref_power(self.geometry.n_mics, config.fft_size)
        )
        self.median = MedianWindow(config.median_window)
        self._snapshot_pool: deque = deque(maxlen=config.csm_chunks)
        self._executor = ThreadPoolExecutor(max_workers=len(config.bands)) if parallel else None

    def close(self):
        if self._executor is not None:
            self._executor.shutdown()

    def _band_maps(self, snapshots) -> tuple[list, list]:
        cfg = self.config

        def one_band(i: int):
            t0 = time.perf_counter()
            csm = spectral.estimate_csm(snapshots, self.band_bins[i], cfg.loading_eps)
            linear = beamform.music_map(
                csm, self.grid, self.geometry, cfg.bands[i].center_hz,
                n_sources=cfg.n_sources, c=cfg.speed_of_sound, steering=self.steering[i],
            )
            bart = None
            if self.oracle:
                bart = beamform.bartlett_map(
                    csm, self.grid, self.geometry, cfg.bands[i].center_hz,
                    c=cfg.speed_of_sound, steering=self.steering[i],
                )
            return linear, bart, time.perf_counter() - t0

        if self._executor is not None:
            results = list(self._executor.map(one_band, range(len(cfg.bands))))
        else:
            results = [one_band(i) for i in range(len(cfg.bands))]
        return results

    def process_chunk(self, chunk, timings: StageTimings | None = None) -> FrameRecord:
        cfg = self.config
        t_start = time.perf_counter()

        t0 = time.perf_counter()
        snapshots = spectral.stft_snapshots(chunk, cfg.fft_size, cfg.hop, cfg.window)
        self._snapshot_pool.append(snapshots)
        pooled = (
            spectral.pool_snapshots(list(self._snapshot_pool))
            if cfg.csm_chunks > 1 else snapshots
        )
        t_stft = time.perf_counter() - t0

        t0 = time.perf_counter()
        band_results = self._band_maps(pooled)
        t_music_all = time.perf_counter() - t0

        t0 = time.perf_counter()
        music_linear, spl_maps, band_fields, bartlett = [], [], [], []
        for band, (linear, bart, _) in zip(cfg.bands, band_results):
            linear = replace(linear, chunk_index=chunk.chunk_index)
            spl = beamform.to_spl(linear, self.ref_power)
            floored = fieldpipe.floor_subtract(spl, band.floor_db)
            norm = fieldpipe.clip_top(floored, band.clip_db)
            music_linear.append(linear)
            spl_maps.append(spl)
            band_fields.append(norm)
            if bart is not None:
                bartlett.append(replace(bart, chunk_index=chunk.chunk_index))
        comp = fieldpipe.composite(band_fields)
        smoothed = self.median.push(comp)
        t_post = time.perf_counter() - t0

        if timings is not None:
            timings.add("stft", t_stft)
            timings.add("music_total", t_music_all)
            for band, (_, _, dt) in zip(cfg.bands, band_results):
                timings.add(f"music_{int(band.center_hz)}hz", dt)
            timings.add("postprocess", t_post)
            timings.add_total(time.perf_counter() - t_start)

        return FrameRecord(
            frame_index=chunk.chunk_index,
            music_linear=tuple(music_linear),
            spl_maps=tuple(spl_maps),
            band_fields=tuple(band_fields),
            composite=comp,
            smoothed=smoothed,
            bartlett_linear=tuple(bartlett) if bartlett else None,
            frame=None,
            frame_file=None,
        )

    def render_frame(self, record: FrameRecord, conventional: np.ndarray) -> np.ndarray:
        cfg = self.config
        field_img = fieldpipe.upsample(record.smoothed, cfg.camera_width, cfg.camera_height)
        af = render.overlay(render.grayscale(conventional), field_img, cfg.alpha)
        return render.stack_pair(conventional, af) if cfg.stacked else af


def _load_geometry(config: PipelineConfig) -> ArrayGeometry:
    if config.geometry_path is None:
        return load_default_geometry()
    return parse_geometry(Path(config.geometry_path).read_text())


def _video_frames(video, n_frames: int, width: int, height: int):
    """Conventional frames per chunk: gray fill, a still image, or a directory."""
    if video is None:
        gray = np.full((height, width, 3), GRAY_LEVEL, dtype=np.uint8)
        return [gray] * n_frames
    path = Path(video)
    if path.is_dir():
        frames = []
        for i in range(n_frames):
            f = path / render.FRAME_NAME.format(i)
            if not f.is_file():
                raise ValidationError(f"video directory missing {f.name}")
            frames.append(_load_frame(f, width, height))
        return frames
    return [_load_frame(path, width, height)] * n_frames


def _load_frame(path, width: int, height: int) -> np.ndarray:
    img = np.asarray(Image.open(path).convert("RGB"))
    if img.shape[:2] != (height, width):
        raise ValidationError(
            f"{path}: frame is {img.shape[1]}x{img.shape[0]}, expected {width}x{height}"
        )
    return img


def run_pipeline(
    config: PipelineConfig,
    audio,
    video=None,
    out_dir=None,
    oracle: bool = False,
    parallel: bool = False,
    keep_frames: bool | None = None,
    render_frames: bool = True,
) -> PipelineResult:
    """Process a recording into acoustic-field frames.

    ``audio`` is a MultichannelBuffer or a WAV path. ``video`` is None (a
    neutral gray frame is synthesized per chunk), a still image path, or a
    directory of frame_%06d.png files. With ``out_dir`` the frames and a
    stream manifest are written there; otherwise frames stay in memory
    (unless ``keep_frames`` is False). ``render_frames=False`` stops after
    the field stage, for runs that only need the maps.

    Module errors are re-raised as ProcessingError with the stage label.
    """
    buffer = audio if isinstance(audio, MultichannelBuffer) else audio_io.read_wav(audio)
    if keep_frames is None:
        keep_frames = out_dir is None
    if out_dir is not None and not render_frames:
        raise ValidationError("out_dir requires render_frames=True")

    def stage(label, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError:
            raise
        except Exception as e:
            raise ProcessingError(label, str(e)) from e

    pipe = AcousticFieldPipeline(
        config, sample_rate=buffer.sample_rate, parallel=parallel, oracle=oracle
    )
    timings = StageTimings()
    try:
        t0 = time.perf_counter()
        chunks = stage("chunking", audio_io.chunk_stream, buffer, config.chunk_size)
        timings.add("chunking", time.perf_counter() - t0)
        conventional = None
        if render_frames:
            conventional = _video_frames(
                video, len(chunks), config.camera_width, config.camera_height
            )

        records: list[FrameRecord] = []
        rendered: list[np.ndarray] = []
        for chunk in chunks:
            record = stage("beamform", pipe.process_chunk, chunk, timings)
            if render_frames:
                t0 = time.perf_counter()
                frame = stage("render", pipe.render_frame, record, conventional[chunk.chunk_index])
                timings.add("render", time.perf_counter() - t0)
                rendered.append(frame)
                record = replace(record, frame=frame if keep_frames else None)
            records.append(record)
    finally:
        pipe.close()

    fps = config.frame_rate(buffer.sample_rate)
    manifest = None
    if out_dir is not None:
        meta = stream_metadata(config, buffer.sample_rate)
        manifest = stage("write", render.write_frame_sequence, rendered, out_dir, meta)
        records = [
            replace(r, frame_file=render.FRAME_NAME.format(r.frame_index)) for r in records
        ]
    return PipelineResult(
        records=records, manifest=manifest, fps=fps, sample_rate=buffer.sample_rate,
        config=config, geometry=pipe.geometry, camera=pipe.camera, grid=pipe.grid,
        timings=timings,
    )


def stream_metadata(config: PipelineConfig, sample_rate: int) -> dict:
    """Manifest block describing the stream (schema for frame sequences)."""
    return {
        "fps": config.frame_rate(sample_rate),
        "sample_rate": sample_rate,
        "chunk_size": config.chunk_size,
        "resolution": [config.camera_width, config.camera_height],
        "stacked": config.stacked,
        "fft_size": config.fft_size,
        "window": config.window,
        "overlap": config.overlap,
        "bands": [
            {"center_hz": b.center_hz, "floor_db": b.floor_db, "clip_db": b.clip_db}
            for b in config.bands
        ],
        "grid": {
            "cols": config.grid_cols,
            "rows": config.grid_rows,
            "distance_m": config.grid_distance_m,
        },
        "median_window": config.median_window,
        "alpha": config.alpha,
    }


def frame_hashes(result: PipelineResult) -> list[str]:
    """SHA-256 of each rendered frame's pixels (determinism checks)."""
    hashes = []
    for record in result.records:
        if record.frame is None:
            raise ValidationError("frames were not kept; rerun with keep_frames=True")
        hashes.append(hashlib.sha256(record.frame.tobytes()).hexdigest())
    return hashes


@dataclass(eq=False)
class BenchReport:
    repeats: int
    parallel: bool
    runs: list[StageTimings]
    frame_hashes: list[list[str]]
    deterministic: bool

    def summary(self) -> dict:
        return {
            "repeats": self.repeats,
            "parallel": self.parallel,
            "deterministic": self.deterministic,
            "runs": [t.summary() for t in self.runs],
        }

    def table(self) -> str:
        parts = []
        for i, t in enumerate(self.runs):
            parts.append(f"run {i + 1} ({'parallel' if self.parallel else 'serial'} bands)")
            parts.append(t.table())
        parts.append(f"deterministic across runs: {self.deterministic}")
        return "\n".join(parts)


def run_bench(config: PipelineConfig, audio, repeats: int = 3, parallel: bool = False) -> BenchReport:
    """Repeat the pipeline on one input, timing stages and hashing frames.

    Outputs must be bit-identical across repeats; timings of course vary.
    """
    if repeats < 1:
        raise ValidationError(f"repeats must be >= 1, got {repeats}")
    buffer = audio if isinstance(audio, MultichannelBuffer) else audio_io.read_wav(audio)
    runs, hashes = [], []
    for _ in range(repeats):
        result = run_pipeline(config, buffer, parallel=parallel, keep_frames=True)
        runs.append(result.timings)
        hashes.append(frame_hashes(result))
    deterministic = all(h == hashes[0] for h in hashes[1:])
    return BenchReport(
        repeats=repeats, parallel=parallel, runs=runs,
        frame_hashes=hashes, deterministic=deterministic,
    )
