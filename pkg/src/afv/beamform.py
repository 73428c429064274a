"""Steering vectors, MUSIC and Bartlett maps over the grid, and dB scaling.

The steering model is phase-only and unit-norm: element m of the vector for
grid point g at frequency f is

    a_m = (1 / sqrt(M)) * exp(-j * 2*pi*f * (r_m - r_0) / c)

with r_m the grid-point-to-mic distance and r_0 the grid-point-to-origin
distance. MUSIC scores each grid point by 1 over the power of the steering
vector inside the noise subspace of the CSM; the Bartlett (delay-and-sum)
map a^H R a serves as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .geometry import SPEED_OF_SOUND, ArrayGeometry, SteeringGrid
from .spectral import CrossSpectralMatrix

#: Floor applied to the MUSIC denominator so on-grid sources stay finite.
MUSIC_DENOM_FLOOR = 1e-12

#: Floor for linear map values before any log is taken.
LINEAR_FLOOR = 1e-30

#: Reference pressure squared: linear map value equal to full scale maps to
#: 10*log10(1/REF_PRESSURE_SQ) ~ 94 dB, the usual 1 Pa <-> 94 dB SPL anchor.
REF_PRESSURE_SQ = (2e-5) ** 2


@dataclass(frozen=True, eq=False)
class FieldMap:
    """Per-grid-cell scalar field, either linear pseudo-spectrum or dB.

    ``power`` carries the dominant CSM eigenvalue so dB conversion can track
    absolute source power.
    """

    values: np.ndarray  # (rows, cols)
    band_hz: float
    chunk_index: int
    units: str  # "linear" | "db"
    power: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def argmax_cell(self) -> tuple[int, int]:
        """(col, row) of the strongest cell; exhaustive scan, no peak logic."""
        r, c = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return int(c), int(r)


def steering_vector(
    point, geom: ArrayGeometry, freq_hz: float, c: float = SPEED_OF_SOUND
) -> np.ndarray:
    """Unit-norm steering vector for one grid point at one frequency."""
    if freq_hz <= 0.0:
        raise ValidationError(f"frequency must be positive, got {freq_hz}")
    p = np.asarray(point, dtype=np.float64)
    r_m = np.linalg.norm(p[None, :] - geom.mics, axis=1)
    r_0 = np.linalg.norm(p)
    m = geom.n_mics
    return np.exp(-2j * np.pi * freq_hz * (r_m - r_0) / c) / np.sqrt(m)


def steering_matrix(
    grid: SteeringGrid, geom: ArrayGeometry, freq_hz: float, c: float = SPEED_OF_SOUND
) -> np.ndarray:
    """Steering vectors for every grid cell, shape (rows*cols, M), row-major.

    Computed once per (grid, geometry, frequency) and reused across chunks.
    """
    if freq_hz <= 0.0:
        raise ValidationError(f"frequency must be positive, got {freq_hz}")
    pts = grid.flat_points  # (N, 3)
    r_m = np.linalg.norm(pts[:, None, :] - geom.mics[None, :, :], axis=2)
    r_0 = np.linalg.norm(pts, axis=1)
    m = geom.n_mics
    return np.exp(-2j * np.pi * freq_hz * (r_m - r_0[:, None]) / c) / np.sqrt(m)


def noise_subspace(csm: CrossSpectralMatrix, n_sources: int) -> np.ndarray:
    """Orthonormal eigenvectors of the M - n_sources smallest eigenvalues.

    Raises:
        ValidationError: n_sources outside [1, M).
        np.linalg.LinAlgError: eigendecomposition failure.
    """
    m = csm.n_channels
    if not 1 <= n_sources < m:
        raise ValidationError(f"n_sources must be in [1, {m}), got {n_sources}")
    _, vecs = np.linalg.eigh(csm.matrix)  # ascending eigenvalues
    return vecs[:, : m - n_sources]


def _largest_eigenvalue(csm: CrossSpectralMatrix) -> float:
    return float(np.linalg.eigvalsh(csm.matrix)[-1])


def music_map(
    csm: CrossSpectralMatrix,
    grid: SteeringGrid,
    geom: ArrayGeometry,
    freq_hz: float,
    n_sources: int = 1,
    c: float = SPEED_OF_SOUND,
    steering: np.ndarray | None = None,
) -> FieldMap:
    """MUSIC pseudo-spectrum over the grid (linear units).

    P(g) = 1 / ||E_n^H a(g)||^2 with E_n the noise subspace; the denominator
    is floored at MUSIC_DENOM_FLOOR so on-grid sources produce a large but
    finite peak. Invariant to positive scaling of the input samples.

    ``steering`` may pass a precomputed steering_matrix for this
    (grid, geom, freq) to skip rebuilding it per chunk.
    """
    a = steering if steering is not None else steering_matrix(grid, geom, freq_hz, c)
    en = noise_subspace(csm, n_sources)
    proj = a @ en.conj()  # (N, M-n): components of each a inside the noise subspace
    denom = np.einsum("ij,ij->i", proj, proj.conj()).real
    values = 1.0 / np.maximum(denom, MUSIC_DENOM_FLOOR)
    return FieldMap(
        values=values.reshape(grid.rows, grid.cols),
        band_hz=freq_hz,
        chunk_index=-1,
        units="linear",
        power=_largest_eigenvalue(csm),
    )


def bartlett_map(
    csm: CrossSpectralMatrix,
    grid: SteeringGrid,
    geom: ArrayGeometry,
    freq_hz: float,
    c: float = SPEED_OF_SOUND,
    steering: np.ndarray | None = None,
) -> FieldMap:
    """Delay-and-sum power map a(g)^H R a(g) (linear units).

    Algorithmically independent of MUSIC (no eigendecomposition enters the
    map values), which is what makes it useful as an oracle.
    """
    a = steering if steering is not None else steering_matrix(grid, geom, freq_hz, c)
    values = np.einsum("im,mn,in->i", a.conj(), csm.matrix, a).real
    values = np.maximum(values, LINEAR_FLOOR)
    return FieldMap(
        values=values.reshape(grid.rows, grid.cols),
        band_hz=freq_hz,
        chunk_index=-1,
        units="linear",
        power=_largest_eigenvalue(csm),
    )


def default_ref_power(n_mics: int, fft_size: int) -> float:
    """Reference power anchoring the dB scale.

    A full-scale sine received at the mics puts roughly (fft_size/4)^2 of
    power in its bin per channel, so the dominant CSM eigenvalue is about
    M * (fft_size/4)^2. Referencing that to 20 uPa makes a full-scale tone
    sit near 94 dB, and digital silence land far below the working floors.
    """
    return n_mics * (fft_size / 4.0) ** 2 * REF_PRESSURE_SQ


def to_spl(field: FieldMap, ref_power: float) -> FieldMap:
    """Convert a linear map to dB: L = 10*log10(power * P / ref_power).

    Strictly monotone in P, so peak locations are preserved. Values are
    floored before the log so silence stays finite.
    """
    if field.units != "linear":
        raise ValidationError("to_spl expects a linear map")
    if ref_power <= 0.0:
        raise ValidationError(f"ref_power must be positive, got {ref_power}")
    scaled = np.maximum(field.power * field.values, LINEAR_FLOOR)
    return replace(field, values=10.0 * np.log10(scaled / ref_power), units="db")
