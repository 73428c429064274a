"""Synthetic scenes: point sources with known positions, free-field mixing.

This is the ground-truth side of the localization tests. Propagation is
anechoic with spherical spreading: channel m receives
(1/r_m) * s(t - r_m / c) for each source plus independent white noise.

Fractional delays are exact. Tones are delayed analytically (a phase shift
of their single spectral line); band noise is synthesized as a periodic
band-limited signal whose circular spectral phase shift is the exact time
shift of that signal. Everything is deterministic given the seeds.

Level convention (dBFS): a tone at 0 dBFS has peak amplitude 1.0; noise at
L dBFS has the RMS of a sine at L dBFS (10^(L/20) / sqrt(2)).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .audio_io import MultichannelBuffer
from .errors import BehindCameraError, SceneError, ValidationError
from .geometry import SPEED_OF_SOUND, ArrayGeometry, CameraModel, project

SCENE_SCHEMA_VERSION = 1

SOURCE_KINDS = ("tone", "band_noise")


@dataclass(frozen=True)
class SourceSpec:
    """One point source: where it is, what it emits, how loud."""

    position: tuple[float, float, float]
    kind: str
    level_dbfs: float
    freq_hz: float | None = None
    lo_hz: float | None = None
    hi_hz: float | None = None
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        if len(self.position) != 3:
            raise ValidationError("source position must be (x, y, z)")
        if self.position[2] <= 0.0:
            raise ValidationError(
                f"source must be in front of the camera (z > 0), got z={self.position[2]}"
            )
        if self.level_dbfs > 0.0:
            raise ValidationError(f"level must be <= 0 dBFS, got {self.level_dbfs}")
        if self.kind == "tone":
            if self.freq_hz is None or self.freq_hz <= 0.0:
                raise ValidationError("tone source needs freq_hz > 0")
        elif self.kind == "band_noise":
            if self.lo_hz is None or self.hi_hz is None or not 0.0 < self.lo_hz < self.hi_hz:
                raise ValidationError("band_noise source needs 0 < lo_hz < hi_hz")
            if self.seed is None:
                raise ValidationError("band_noise source needs a seed")
        else:
            raise ValidationError(f"unknown source kind {self.kind!r}; expected {SOURCE_KINDS}")

    @property
    def amplitude(self) -> float:
        """Linear amplitude of the emitted signal at 1 m (peak for tones)."""
        return 10.0 ** (self.level_dbfs / 20.0)


@dataclass(frozen=True)
class SceneSpec:
    """A full synthetic scene: sources plus an optional per-mic noise floor."""

    sources: tuple[SourceSpec, ...]
    duration_s: float
    sample_rate: int = 44100
    noise_floor_dbfs: float | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if self.duration_s <= 0.0:
            raise ValidationError(f"duration must be positive, got {self.duration_s}")
        if self.sample_rate <= 0:
            raise ValidationError(f"sample rate must be positive, got {self.sample_rate}")
        if self.noise_floor_dbfs is not None and self.noise_floor_dbfs > 0.0:
            raise ValidationError(
                f"noise floor must be <= 0 dBFS, got {self.noise_floor_dbfs}"
            )

    @property
    def n_frames(self) -> int:
        return int(round(self.duration_s * self.sample_rate))


def _band_noise_periodic(n: int, sample_rate: int, lo_hz: float, hi_hz: float, seed: int) -> np.ndarray:
    """One period of band-limited noise as rfft coefficients, unit RMS."""
    rng = np.random.default_rng(seed)
    n_bins = n // 2 + 1
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    spec = rng.standard_normal(n_bins) + 1j * rng.standard_normal(n_bins)
    spec[(freqs < lo_hz) | (freqs > hi_hz)] = 0.0
    spec[0] = 0.0
    if n % 2 == 0:
        spec[-1] = spec[-1].real  # Nyquist bin must be real
    base = np.fft.irfft(spec, n=n)
    rms = math.sqrt(float(np.mean(base**2)))
    if rms == 0.0:
        raise ValidationError(f"band [{lo_hz}, {hi_hz}] Hz contains no FFT bins")
    return spec / rms


def _source_signals(src: SourceSpec, delays: np.ndarray, n: int, sample_rate: int) -> np.ndarray:
    """Per-mic delayed copies of one source signal, shape (M, n), unit gain."""
    if src.kind == "tone":
        t = np.arange(n) / sample_rate
        return src.amplitude * np.sin(2.0 * np.pi * src.freq_hz * (t[None, :] - delays[:, None]))
    spec = _band_noise_periodic(n, sample_rate, src.lo_hz, src.hi_hz, src.seed)
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    shifted = spec[None, :] * np.exp(-2j * np.pi * freqs[None, :] * delays[:, None])
    level = src.amplitude / math.sqrt(2.0)  # RMS-match a sine at the same dBFS
    return level * np.fft.irfft(shifted, n=n, axis=1)


def synth_scene(
    scene: SceneSpec, geom: ArrayGeometry, c: float = SPEED_OF_SOUND
) -> MultichannelBuffer:
    """Mix all sources and the noise floor into a multichannel buffer.

    Raises:
        SceneError: if the mixed output would clip (peak > 1.0), naming the
            source with the largest individual contribution.
    """
    n = scene.n_frames
    m = geom.n_mics
    mix = np.zeros((m, n))
    peak_per_source = []
    for src in scene.sources:
        r = np.linalg.norm(np.asarray(src.position)[None, :] - geom.mics, axis=1)
        if np.any(r < 1e-6):
            raise SceneError(f"source at {src.position} coincides with a microphone")
        contribution = _source_signals(src, r / c, n, scene.sample_rate) / r[:, None]
        peak_per_source.append(float(np.abs(contribution).max()))
        mix += contribution
    if scene.noise_floor_dbfs is not None:
        rng = np.random.default_rng(scene.seed)
        sigma = 10.0 ** (scene.noise_floor_dbfs / 20.0) / math.sqrt(2.0)
        mix += sigma * rng.standard_normal((m, n))
    peak = float(np.abs(mix).max()) if mix.size else 0.0
    if peak > 1.0:
        hot = int(np.argmax(peak_per_source)) if peak_per_source else -1
        desc = f"source {hot} ({scene.sources[hot].kind})" if hot >= 0 else "noise floor"
        raise SceneError(f"mixed output clips (peak {peak:.3f} > 1.0); loudest: {desc}")
    return MultichannelBuffer(samples=mix, sample_rate=scene.sample_rate)


def ground_truth_pixel(src: SourceSpec, cam: CameraModel) -> tuple[float, float]:
    """Pixel where the source projects; may land outside the frame.

    Raises:
        BehindCameraError: source z <= 0 (already rejected by SourceSpec).
    """
    return project(cam, src.position)


def in_frame(cam: CameraModel, pixel: tuple[float, float]) -> bool:
    """Whether a pixel lies inside [0, width) x [0, height)."""
    u, v = pixel
    return 0.0 <= u < cam.width and 0.0 <= v < cam.height


# --- JSON scene files -------------------------------------------------------

_SCENE_KEYS = {"schema", "sources", "duration_s", "sample_rate", "noise_floor_dbfs", "seed"}
_SOURCE_KEYS = {"kind", "position", "level_dbfs", "freq_hz", "lo_hz", "hi_hz", "seed"}


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise ValidationError(f"{path}: {message}")


def scene_from_json(text: str) -> SceneSpec:
    """Parse and validate a scene JSON document (schema version 1).

    Unknown fields are rejected; error messages carry the JSON path of the
    offending value.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"$: not valid JSON: {e}") from e
    _require(isinstance(doc, dict), "$", "scene document must be an object")
    unknown = set(doc) - _SCENE_KEYS
    _require(not unknown, "$", f"unknown fields: {sorted(unknown)}")
    _require(doc.get("schema") == SCENE_SCHEMA_VERSION, "$.schema",
             f"must be {SCENE_SCHEMA_VERSION}")
    _require(isinstance(doc.get("sources"), list), "$.sources", "must be a list")
    sources = []
    for i, entry in enumerate(doc["sources"]):
        path = f"$.sources[{i}]"
        _require(isinstance(entry, dict), path, "must be an object")
        unknown = set(entry) - _SOURCE_KEYS
        _require(not unknown, path, f"unknown fields: {sorted(unknown)}")
        kind = entry.get("kind")
        _require(kind in SOURCE_KINDS, f"{path}.kind", f"must be one of {SOURCE_KINDS}")
        pos = entry.get("position")
        _require(
            isinstance(pos, list) and len(pos) == 3
            and all(isinstance(v, (int, float)) for v in pos),
            f"{path}.position", "must be [x, y, z] numbers",
        )
        _require(pos[2] > 0, f"{path}.position", "z must be > 0 (in front of the camera)")
        level = entry.get("level_dbfs")
        _require(isinstance(level, (int, float)), f"{path}.level_dbfs", "must be a number")
        _require(level <= 0, f"{path}.level_dbfs", "must be <= 0 dBFS")
        kwargs = {}
        if kind == "tone":
            _require(isinstance(entry.get("freq_hz"), (int, float)) and entry["freq_hz"] > 0,
                     f"{path}.freq_hz", "tone needs freq_hz > 0")
            _require(not {"lo_hz", "hi_hz", "seed"} & set(entry), path,
                     "tone source cannot carry band_noise fields")
            kwargs["freq_hz"] = float(entry["freq_hz"])
        else:
            for key in ("lo_hz", "hi_hz"):
                _require(isinstance(entry.get(key), (int, float)), f"{path}.{key}",
                         "band_noise needs numeric lo_hz/hi_hz")
            _require(0 < entry["lo_hz"] < entry["hi_hz"], f"{path}.lo_hz",
                     "must satisfy 0 < lo_hz < hi_hz")
            _require(isinstance(entry.get("seed"), int), f"{path}.seed",
                     "band_noise needs an integer seed")
            _require("freq_hz" not in entry, path, "band_noise source cannot carry freq_hz")
            kwargs.update(lo_hz=float(entry["lo_hz"]), hi_hz=float(entry["hi_hz"]),
                          seed=entry["seed"])
        sources.append(SourceSpec(
            position=tuple(pos), kind=kind, level_dbfs=float(level), **kwargs,
        ))
    duration = doc.get("duration_s")
    _require(isinstance(duration, (int, float)) and duration > 0,
             "$.duration_s", "must be a positive number")
    rate = doc.get("sample_rate", 44100)
    _require(isinstance(rate, int) and rate > 0, "$.sample_rate", "must be a positive integer")
    noise = doc.get("noise_floor_dbfs")
    if noise is not None:
        _require(isinstance(noise, (int, float)) and noise <= 0,
                 "$.noise_floor_dbfs", "must be a number <= 0 dBFS or null")
        noise = float(noise)
    seed = doc.get("seed", 0)
    _require(isinstance(seed, int), "$.seed", "must be an integer")
    return SceneSpec(
        sources=tuple(sources), duration_s=float(duration), sample_rate=rate,
        noise_floor_dbfs=noise, seed=seed,
    )


def scene_to_json(scene: SceneSpec) -> str:
    """Serialize a scene so scene_from_json round-trips it exactly."""
    doc = {
        "schema": SCENE_SCHEMA_VERSION,
        "duration_s": scene.duration_s,
        "sample_rate": scene.sample_rate,
        "noise_floor_dbfs": scene.noise_floor_dbfs,
        "seed": scene.seed,
        "sources": [],
    }
    for src in scene.sources:
        entry = {
            "kind": src.kind,
            "position": list(src.position),
            "level_dbfs": src.level_dbfs,
        }
        if src.kind == "tone":
            entry["freq_hz"] = src.freq_hz
        else:
            entry.update(lo_hz=src.lo_hz, hi_hz=src.hi_hz, seed=src.seed)
        doc["sources"].append(entry)
    return json.dumps(doc, indent=2) + "\n"
