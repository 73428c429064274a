"""Short-time spectral analysis and cross-spectral matrix estimation.

Each audio chunk is sliced into overlapping windowed segments ("snapshots"),
FFT'd per channel, and the per-bin channel covariance (the cross-spectral
matrix, CSM) is estimated by averaging snapshot outer products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioChunk
from .errors import ValidationError

#: Default diagonal loading, as a fraction of trace/M added to the diagonal.
DEFAULT_LOADING_EPS = 1e-6

WINDOWS = ("hann", "rect")


def _window(name: str, n: int) -> np.ndarray:
    if name == "hann":
        return np.hanning(n)  # 0.5 * (1 - cos(2*pi*n/(N-1)))
    if name == "rect":
        return np.ones(n)
    raise ValidationError(f"unknown window {name!r}; expected one of {WINDOWS}")


@dataclass(frozen=True, eq=False)
class SpectralSnapshots:
    """Complex STFT frames, shape (snapshots, channels, bins).

    bins = fft_size // 2 + 1 (one-sided spectrum of real input).
    """

    data: np.ndarray
    fft_size: int
    hop: int
    window: str
    sample_rate: int

    @property
    def n_snapshots(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_bins(self) -> int:
        return self.data.shape[2]

    @property
    def bin_hz(self) -> float:
        """Frequency spacing between adjacent bins."""
        return self.sample_rate / self.fft_size


@dataclass(frozen=True, eq=False)
class CrossSpectralMatrix:
    """Hermitian channel covariance at one frequency bin."""

    matrix: np.ndarray
    bin_index: int
    n_snapshots: int
    loading_eps: float

    @property
    def n_channels(self) -> int:
        return self.matrix.shape[0]


def stft_snapshots(
    chunk: AudioChunk, fft_size: int, hop: int, window: str = "hann"
) -> SpectralSnapshots:
    """Windowed one-sided FFTs of every channel of a chunk.

    Snapshot s of channel m is FFT(window * x_m[s*hop : s*hop + fft_size]).
    The snapshot count is floor((frames - fft_size) / hop) + 1.

    Raises:
        ValidationError: chunk shorter than fft_size, or hop <= 0.
    """
    if hop <= 0:
        raise ValidationError(f"hop must be positive, got {hop}")
    frames = chunk.n_frames
    if frames < fft_size:
        raise ValidationError(
            f"chunk of {frames} frames is shorter than fft_size {fft_size}"
        )
    w = _window(window, fft_size)
    n_snapshots = (frames - fft_size) // hop + 1
    segs = np.lib.stride_tricks.sliding_window_view(chunk.samples, fft_size, axis=1)
    segs = segs[:, :: hop, :][:, :n_snapshots, :]  # (channels, snapshots, fft_size)
    spectra = np.fft.rfft(segs * w, axis=-1)
    return SpectralSnapshots(
        data=np.ascontiguousarray(spectra.transpose(1, 0, 2)),
        fft_size=fft_size,
        hop=hop,
        window=window,
        sample_rate=chunk.sample_rate,
    )


def band_bin(center_hz: float, sample_rate: int, fft_size: int) -> int:
    """Nearest FFT bin for a band center frequency.

    Raises:
        ValidationError: frequency outside (0, Nyquist).
    """
    if not 0.0 < center_hz < sample_rate / 2.0:
        raise ValidationError(
            f"band center {center_hz} Hz outside (0, {sample_rate / 2}) Hz"
        )
    return int(round(center_hz * fft_size / sample_rate))


def estimate_csm(
    snapshots: SpectralSnapshots,
    bin_index: int,
    loading_eps: float = DEFAULT_LOADING_EPS,
) -> CrossSpectralMatrix:
    """Snapshot-averaged CSM at one bin, with diagonal loading.

    R = (1/S) * sum_s x_s x_s^H + loading_eps * (trace(R)/M) * I, where x_s
    is the M-vector of channel spectra at the bin. Loading keeps R positive
    definite when the snapshot count is below the channel count.
    """
    if snapshots.n_snapshots < 1:
        raise ValidationError("need at least one snapshot")
    if not 0 <= bin_index < snapshots.n_bins:
        raise ValidationError(
            f"bin {bin_index} out of range for {snapshots.n_bins} bins"
        )
    x = snapshots.data[:, :, bin_index]  # (S, M)
    r = (x.T @ x.conj()) / x.shape[0]
    if loading_eps > 0.0:
        m = r.shape[0]
        r = r + (loading_eps * np.trace(r).real / m) * np.eye(m)
    return CrossSpectralMatrix(
        matrix=r,
        bin_index=bin_index,
        n_snapshots=snapshots.n_snapshots,
        loading_eps=loading_eps,
    )


def pool_snapshots(parts: list[SpectralSnapshots]) -> SpectralSnapshots:
    """Concatenate snapshot blocks from consecutive chunks (same settings).

    Used to accumulate the CSM over the last K chunks for higher-rank
    estimates.
    """
    if not parts:
        raise ValidationError("nothing to pool")
    first = parts[0]
    for p in parts[1:]:
        if (p.fft_size, p.hop, p.window, p.sample_rate) != (
            first.fft_size, first.hop, first.window, first.sample_rate,
        ):
            raise ValidationError("cannot pool snapshots with different settings")
    return SpectralSnapshots(
        data=np.concatenate([p.data for p in parts], axis=0),
        fft_size=first.fft_size,
        hop=first.hop,
        window=first.window,
        sample_rate=first.sample_rate,
    )
