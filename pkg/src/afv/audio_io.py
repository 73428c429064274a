"""Multichannel WAV I/O and fixed-size chunking for the pipeline.

Reads/writes the three flavours the capture chain produces: PCM16, PCM24 and
IEEE float32. Samples are held as float64 normalized to [-1, 1], shaped
(channels, frames).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError, WavFormatError

_FORMAT_PCM = 1
_FORMAT_IEEE_FLOAT = 3
_FORMAT_EXTENSIBLE = 0xFFFE

#: Supported bit depths for write_wav.
BIT_DEPTHS = ("pcm16", "pcm24", "float32")


@dataclass(frozen=True, eq=False)
class MultichannelBuffer:
    """Time-domain samples, shape (channels, frames), float in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2:
            raise ValidationError("samples must be a (channels, frames) array")
        if self.sample_rate <= 0:
            raise ValidationError(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_frames(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate


@dataclass(frozen=True, eq=False)
class AudioChunk:
    """Read-only view of one fixed-size slice of a MultichannelBuffer."""

    samples: np.ndarray
    chunk_index: int
    sample_rate: int

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_frames(self) -> int:
        return self.samples.shape[1]


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise OSError(f"truncated WAV file: expected {n} bytes for {what}, got {len(data)}")
    return data


def read_wav(path) -> MultichannelBuffer:
    """Read a PCM16/PCM24/float32 WAV file into a normalized buffer.

    Raises:
        WavFormatError: not a RIFF/WAVE file or an unsupported codec.
        OSError: file shorter than its declared chunk sizes.
    """
    with open(path, "rb") as f:
        header = f.read(12)
        if len(header) < 12 or header[:4] != b"RIFF" or header[8:12] != b"WAVE":
            raise WavFormatError(f"{path}: not a RIFF/WAVE file")
        fmt = None
        while True:
            chead = f.read(8)
            if len(chead) == 0:
                raise WavFormatError(f"{path}: no data chunk found")
            if len(chead) < 8:
                raise OSError(f"{path}: truncated chunk header")
            cid, csize = struct.unpack("<4sI", chead)
            if cid == b"fmt ":
                body = _read_exact(f, csize, "fmt chunk")
                fmt = struct.unpack("<HHIIHH", body[:16])
                if fmt[0] == _FORMAT_EXTENSIBLE:
                    if csize < 40:
                        raise WavFormatError(f"{path}: malformed extensible fmt chunk")
                    # sub-format GUID starts with the ordinary format tag
                    sub = struct.unpack("<H", body[24:26])[0]
                    fmt = (sub,) + fmt[1:]
            elif cid == b"data":
                if fmt is None:
                    raise WavFormatError(f"{path}: data chunk before fmt chunk")
                raw = _read_exact(f, csize, "data chunk")
                break
            else:
                f.seek(csize + (csize & 1), 1)

    audio_format, n_channels, sample_rate, _, block_align, bits = fmt
    if n_channels < 1 or block_align != n_channels * (bits // 8):
        raise WavFormatError(f"{path}: inconsistent fmt chunk")
    if audio_format == _FORMAT_PCM and bits == 16:
        flat = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == _FORMAT_PCM and bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3)
        ints = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        flat = ints.astype(np.float64) / float(1 << 23)
    elif audio_format == _FORMAT_IEEE_FLOAT and bits == 32:
        flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    else:
        raise WavFormatError(
            f"{path}: unsupported codec (format tag {audio_format}, {bits}-bit); "
            "expected PCM16, PCM24 or float32"
        )
    frames = flat.reshape(-1, n_channels)
    return MultichannelBuffer(samples=frames.T.copy(), sample_rate=sample_rate)


def write_wav(buffer: MultichannelBuffer, path, bit_depth: str = "float32") -> None:
    """Write a buffer as WAV; read_wav(write_wav(b)) matches b within 1 LSB.

    bit_depth is one of "pcm16", "pcm24", "float32". float32 round-trips
    exactly; PCM depths quantize with round-to-nearest.
    """
    if bit_depth not in BIT_DEPTHS:
        raise ValidationError(f"bit_depth must be one of {BIT_DEPTHS}, got {bit_depth!r}")
    interleaved = buffer.samples.T  # (frames, channels)
    if bit_depth == "float32":
        audio_format, bits = _FORMAT_IEEE_FLOAT, 32
        payload = interleaved.astype("<f4").tobytes()
    elif bit_depth == "pcm16":
        audio_format, bits = _FORMAT_PCM, 16
        q = np.clip(np.rint(interleaved * 32768.0), -32768, 32767)
        payload = q.astype("<i2").tobytes()
    else:
        audio_format, bits = _FORMAT_PCM, 24
        full = float(1 << 23)
        q = np.clip(np.rint(interleaved * full), -full, full - 1).astype(np.int32)
        q = np.where(q < 0, q + (1 << 24), q).astype(np.uint32).ravel()
        b = np.empty((q.size, 3), dtype=np.uint8)
        b[:, 0] = q & 0xFF
        b[:, 1] = (q >> 8) & 0xFF
        b[:, 2] = (q >> 16) & 0xFF
        payload = b.tobytes()

    n_channels = buffer.n_channels
    block_align = n_channels * (bits // 8)
    byte_rate = buffer.sample_rate * block_align
    fmt_chunk = struct.pack(
        "<HHIIHH", audio_format, n_channels, buffer.sample_rate, byte_rate, block_align, bits
    )
    riff_size = 4 + (8 + len(fmt_chunk)) + (8 + len(payload))
    with open(path, "wb") as f:
        f.write(struct.pack("<4sI4s", b"RIFF", riff_size, b"WAVE"))
        f.write(struct.pack("<4sI", b"fmt ", len(fmt_chunk)))
        f.write(fmt_chunk)
        f.write(struct.pack("<4sI", b"data", len(payload)))
        f.write(payload)


def chunk_stream(buffer: MultichannelBuffer, chunk_size: int) -> list[AudioChunk]:
    """Slice a buffer into contiguous fixed-size chunks, oldest first.

    The trailing partial chunk is dropped, matching a fixed-cadence live
    pipeline: floor(frames / chunk_size) chunks come back.
    """
    if chunk_size <= 0:
        raise ValidationError(f"chunk size must be positive, got {chunk_size}")
    n = buffer.n_frames // chunk_size
    chunks = []
    for i in range(n):
        view = buffer.samples[:, i * chunk_size : (i + 1) * chunk_size]
        chunks.append(AudioChunk(samples=view, chunk_index=i, sample_rate=buffer.sample_rate))
    return chunks


def extract_stereo(buffer: MultichannelBuffer, left_channel: int, right_channel: int) -> MultichannelBuffer:
    """Pick two device channels as a stereo pair (channel 0 = left)."""
    m = buffer.n_channels
    for idx in (left_channel, right_channel):
        if not 0 <= idx < m:
            raise ValidationError(f"channel index {idx} out of range for {m} channels")
    if left_channel == right_channel:
        raise ValidationError("stereo channels must be distinct")
    pair = buffer.samples[[left_channel, right_channel], :].copy()
    return MultichannelBuffer(samples=pair, sample_rate=buffer.sample_rate)
