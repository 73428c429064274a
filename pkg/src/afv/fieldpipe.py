"""Per-band dB maps to one normalized composite field per frame.

Stages, in pipeline order: per-band noise-floor subtraction, top-dynamic-
range clipping to [0, 1], four-band averaging, temporal median over a short
window, bilinear upsampling to image resolution. Every stage keeps values in
[0, 1] once normalized.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .beamform import FieldMap
from .errors import ValidationError

DEFAULT_MEDIAN_WINDOW = 8


@dataclass(frozen=True)
class BandConfig:
    """One analysis band: center frequency, noise floor, top clip range."""

    center_hz: float
    floor_db: float
    clip_db: float

    def __post_init__(self):
        if self.floor_db < 0.0:
            raise ValidationError(f"floor_db must be >= 0, got {self.floor_db}")
        if self.clip_db <= 0.0:
            raise ValidationError(f"clip_db must be > 0, got {self.clip_db}")


@dataclass(frozen=True, eq=False)
class NormalizedField:
    """Per-cell values in [0, 1] on the steering grid."""

    values: np.ndarray  # (rows, cols)
    frame_index: int = -1

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def argmax_cell(self) -> tuple[int, int]:
        r, c = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return int(c), int(r)


def floor_subtract(map_db: FieldMap, floor_db: float) -> FieldMap:
    """Subtract the band's noise floor and clamp at zero."""
    if map_db.units != "db":
        raise ValidationError("floor_subtract expects a dB map")
    return replace(map_db, values=np.maximum(map_db.values - floor_db, 0.0))


def clip_top(map_db: FieldMap, clip_db: float) -> NormalizedField:
    """Keep only the top clip_db of the map's dynamic range, scaled to [0, 1].

    With m the map maximum, cell values are clamped to [m - clip_db, m] and
    rescaled; a map that never rose above its floor comes out all zero.
    """
    if clip_db <= 0.0:
        raise ValidationError(f"clip_db must be positive, got {clip_db}")
    v = map_db.values
    m = float(v.max())
    if m <= 0.0:
        out = np.zeros_like(v)
    else:
        # same as (clamp(v, m-clip, m) - (m-clip)) / clip, but exact at v == m
        out = (clip_db - np.minimum(m - v, clip_db)) / clip_db
    return NormalizedField(values=out, frame_index=map_db.chunk_index)


def composite(fields: list[NormalizedField]) -> NormalizedField:
    """Cellwise arithmetic mean of the per-band fields (order-independent)."""
    if not fields:
        raise ValidationError("composite needs at least one field")
    shape = fields[0].shape
    for f in fields[1:]:
        if f.shape != shape:
            raise ValidationError(f"grid mismatch: {f.shape} vs {shape}")
    mean = np.mean([f.values for f in fields], axis=0)
    return NormalizedField(values=mean, frame_index=fields[0].frame_index)


class MedianWindow:
    """Ring buffer emitting the cellwise running median of the last W fields.

    Emits from the first frame using however many entries exist; even counts
    take the lower median so the output is always an element of the window's
    per-cell history. Single-writer: one instance per stream.
    """

    def __init__(self, size: int = DEFAULT_MEDIAN_WINDOW):
        if size < 1:
            raise ValidationError(f"median window must hold >= 1 frame, got {size}")
        self.size = size
        self._frames: deque[np.ndarray] = deque(maxlen=size)

    def __len__(self) -> int:
        return len(self._frames)

    def push(self, field: NormalizedField) -> NormalizedField:
        if self._frames and self._frames[0].shape != field.values.shape:
            raise ValidationError("field shape does not match window contents")
        self._frames.append(field.values)
        stack = np.sort(np.stack(self._frames), axis=0)
        lower_median = stack[(len(self._frames) - 1) // 2]
        return NormalizedField(values=lower_median, frame_index=field.frame_index)


def median_push(window: MedianWindow, field: NormalizedField) -> NormalizedField:
    """Push one frame and return the current windowed median field."""
    return window.push(field)


def upsample(field: NormalizedField, width: int, height: int) -> np.ndarray:
    """Bilinear interpolation of the grid to (height, width) pixels.

    Cell centers are the sample points: output pixel center (u+0.5, v+0.5)
    maps to grid coordinate (u+0.5)/cell_w - 0.5; coordinates outside the
    center lattice clamp to the edge cells. Output stays in [0, 1].
    """
    rows, cols = field.shape
    if width < cols or height < rows:
        raise ValidationError(
            f"target {width}x{height} is smaller than the {cols}x{rows} grid"
        )
    gx = (np.arange(width) + 0.5) * cols / width - 0.5
    gy = (np.arange(height) + 0.5) * rows / height - 0.5
    gx = np.clip(gx, 0.0, cols - 1.0)
    gy = np.clip(gy, 0.0, rows - 1.0)
    x0 = np.floor(gx).astype(int)
    y0 = np.floor(gy).astype(int)
    x1 = np.minimum(x0 + 1, cols - 1)
    y1 = np.minimum(y0 + 1, rows - 1)
    fx = gx - x0
    fy = gy - y0
    v = field.values
    top = v[y0][:, x0] * (1 - fx)[None, :] + v[y0][:, x1] * fx[None, :]
    bot = v[y1][:, x0] * (1 - fx)[None, :] + v[y1][:, x1] * fx[None, :]
    return top * (1 - fy)[:, None] + bot * fy[:, None]
