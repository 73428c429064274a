"""Jet-colormapped overlays on grayscale frames, stacking, and frame output.

The jet map is the classic piecewise-linear formula (not a library LUT) so
rendered values are reproducible bit for bit across platforms.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ValidationError

DEFAULT_ALPHA = 0.5

FRAME_NAME = "frame_{:06d}.png"
MANIFEST_NAME = "manifest.json"


def jet(v) -> np.ndarray:
    """Map values in [0, 1] to jet RGB in [0, 1]^3 (input clamped first).

    jet(0) is dark blue (0, 0, 0.5); jet(1) is dark red (0.5, 0, 0).
    Accepts scalars or arrays; returns an array with a trailing axis of 3.
    """
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, 1.0)
    r = np.clip(1.5 - np.abs(4.0 * v - 3.0), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * v - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * v - 1.0), 0.0, 1.0)
    return np.stack([r, g, b], axis=-1)


def grayscale(frame: np.ndarray) -> np.ndarray:
    """Luma-weighted grayscale, replicated to all three channels (uint8)."""
    frame = _check_frame(frame)
    f = frame.astype(np.float64)
    y = 0.299 * f[..., 0] + 0.587 * f[..., 1] + 0.114 * f[..., 2]
    y8 = np.rint(y).astype(np.uint8)
    return np.repeat(y8[..., None], 3, axis=-1)


def overlay(gray: np.ndarray, field: np.ndarray, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Alpha-blend the jet-colored field onto a grayscale frame.

    out = (1 - alpha) * gray + alpha * 255 * jet(field), rounded to nearest.
    """
    gray = _check_frame(gray)
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must be in [0, 1], got {alpha}")
    if field.shape != gray.shape[:2]:
        raise ValidationError(
            f"field {field.shape} does not match frame {gray.shape[:2]}"
        )
    blended = (1.0 - alpha) * gray.astype(np.float64) + alpha * 255.0 * jet(field)
    return np.clip(np.rint(blended), 0, 255).astype(np.uint8)


def stack_pair(conventional: np.ndarray, af: np.ndarray) -> np.ndarray:
    """Stack the conventional frame on top of the acoustic-field frame."""
    conventional = _check_frame(conventional)
    af = _check_frame(af)
    if conventional.shape != af.shape:
        raise ValidationError(
            f"frame shapes differ: {conventional.shape} vs {af.shape}"
        )
    return np.concatenate([conventional, af], axis=0)


def write_frame_sequence(frames, out_dir, meta: dict) -> dict:
    """Write frames as lossless PNGs plus a JSON manifest; returns the manifest.

    Files are named frame_000000.png onward. ``meta`` supplies the stream
    metadata recorded in the manifest (fps, resolution, bands, floors, clips,
    grid, alpha). I/O failures are re-raised with the frame index.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for i, frame in enumerate(frames):
        name = FRAME_NAME.format(i)
        try:
            Image.fromarray(_check_frame(frame)).save(out / name)
        except OSError as e:
            raise OSError(f"failed writing frame {i} ({name}): {e}") from e
        names.append(name)
    manifest = dict(meta)
    manifest["frame_count"] = len(names)
    manifest["frames"] = names
    with open(out / MANIFEST_NAME, "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    return manifest


def _check_frame(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3 or frame.dtype != np.uint8:
        raise ValidationError("frame must be an (H, W, 3) uint8 array")
    return frame
