"""Array geometry, pinhole camera model, and the camera-aligned steering grid.

Coordinate convention: camera at the origin, +z forward, +x right, +y down.
The microphone array plane is coincident with the camera plane unless the
geometry file says otherwise (mics may carry arbitrary x/y/z).
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import BehindCameraError, GeometryXmlError, ValidationError

#: Two mics closer than this are treated as duplicates.
MIN_MIC_SPACING_M = 1e-6

#: Default speed of sound (m/s, dry air at 20 degC).
SPEED_OF_SOUND = 343.0

GEOMETRY_ROOT_TAG = "arraygeometry"


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Microphone positions in meters, row i = device channel i.

    Attributes:
        mics: (M, 3) float64 array of positions, read-only.
        name: optional label carried through serialization.
    """

    mics: np.ndarray
    name: str = ""

    def __post_init__(self):
        mics = np.array(self.mics, dtype=np.float64)
        if mics.ndim != 2 or mics.shape[1] != 3:
            raise ValidationError("mic positions must be an (M, 3) array")
        if mics.shape[0] < 2:
            raise ValidationError(
                f"array needs at least 2 microphones, got {mics.shape[0]}"
            )
        dist = np.linalg.norm(mics[:, None, :] - mics[None, :, :], axis=-1)
        np.fill_diagonal(dist, np.inf)
        if dist.min() <= MIN_MIC_SPACING_M:
            i, j = np.unravel_index(int(dist.argmin()), dist.shape)
            raise ValidationError(
                f"microphones {i} and {j} are closer than {MIN_MIC_SPACING_M} m"
            )
        mics.setflags(write=False)
        object.__setattr__(self, "mics", mics)

    @property
    def n_mics(self) -> int:
        return self.mics.shape[0]


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera defined by resolution and diagonal field of view.

    The focal length in pixels is derived from the diagonal FOV:
    focal_px = (sqrt(width^2 + height^2) / 2) / tan(diagonal_fov / 2).
    """

    width: int
    height: int
    diagonal_fov_deg: float
    principal: tuple[float, float] | None = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("camera resolution must be positive")
        if not 0.0 < self.diagonal_fov_deg < 180.0:
            raise ValidationError(
                f"diagonal FOV must be in (0, 180) deg, got {self.diagonal_fov_deg}"
            )
        if self.principal is None:
            object.__setattr__(
                self, "principal", (self.width / 2.0, self.height / 2.0)
            )

    @property
    def focal_px(self) -> float:
        half_diag = math.hypot(self.width, self.height) / 2.0
        return half_diag / math.tan(math.radians(self.diagonal_fov_deg) / 2.0)


@dataclass(frozen=True, eq=False)
class SteeringGrid:
    """Planar lattice of candidate source locations at a fixed camera depth.

    Cell (col, row) sits on the ray through the center of its pixel tile, so
    grid cells and image tiles correspond one to one.

    Attributes:
        points: (rows, cols, 3) positions in camera coordinates.
        cell_px: (cell_width, cell_height) of one grid cell in pixels.
    """

    cols: int
    rows: int
    distance_m: float
    points: np.ndarray
    cell_px: tuple[float, float]

    @property
    def n_cells(self) -> int:
        return self.cols * self.rows

    @property
    def flat_points(self) -> np.ndarray:
        """(rows*cols, 3) view, row-major."""
        return self.points.reshape(-1, 3)

    def cell_center_pixel(self, col: int, row: int) -> tuple[float, float]:
        return ((col + 0.5) * self.cell_px[0], (row + 0.5) * self.cell_px[1])

    def pixel_to_cell(self, u: float, v: float) -> tuple[int, int]:
        """Grid cell containing pixel (u, v), clamped to the grid."""
        col = min(max(int(u / self.cell_px[0]), 0), self.cols - 1)
        row = min(max(int(v / self.cell_px[1]), 0), self.rows - 1)
        return col, row


def parse_geometry(xml_text: str) -> ArrayGeometry:
    """Parse array geometry XML into an ArrayGeometry.

    The schema is a root ``arraygeometry`` element (optional ``name``
    attribute) with one ``pos`` child per microphone, in channel order, each
    carrying numeric ``x``, ``y``, ``z`` attributes and an optional ``name``.

    Raises:
        GeometryXmlError: malformed XML (message carries the line number) or
            a pos element with a missing/non-numeric attribute.
        ValidationError: fewer than 2 mics or duplicate positions.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as e:
        line, col = e.position
        raise GeometryXmlError(f"malformed XML at line {line}, column {col}: {e.msg}") from e
    if root.tag != GEOMETRY_ROOT_TAG:
        raise GeometryXmlError(
            f"root element must be <{GEOMETRY_ROOT_TAG}>, got <{root.tag}>"
        )
    positions = []
    for i, pos in enumerate(root.findall("pos")):
        label = pos.get("name") or f"pos #{i + 1}"
        coords = []
        for attr in ("x", "y", "z"):
            raw = pos.get(attr)
            if raw is None:
                raise GeometryXmlError(f"{label}: missing attribute '{attr}'")
            try:
                coords.append(float(raw))
            except ValueError:
                raise GeometryXmlError(
                    f"{label}: attribute '{attr}' is not numeric: {raw!r}"
                ) from None
        positions.append(coords)
    if not positions:
        raise ValidationError("geometry contains no <pos> elements")
    return ArrayGeometry(mics=np.array(positions), name=root.get("name", ""))


def serialize_geometry(geom: ArrayGeometry) -> str:
    """Serialize geometry to XML such that parse(serialize(g)) is exact.

    Coordinates are written with repr(), which round-trips float64 exactly.
    An empty geometry name omits the name attribute.
    """
    root = ET.Element(GEOMETRY_ROOT_TAG)
    if geom.name:
        root.set("name", geom.name)
    for x, y, z in geom.mics:
        ET.SubElement(root, "pos", x=repr(float(x)), y=repr(float(y)), z=repr(float(z)))
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def load_default_geometry() -> ArrayGeometry:
    """Bundled 16-mic geometry: 4x4 planar lattice, 42 mm pitch.

    Channels run row-major from the upper-left mic (image convention, +y
    down), so channels 0 and 3 are the upper-left/upper-right pair 12.6 cm
    apart.
    """
    text = resources.files("afv.data").joinpath("uma16.xml").read_text()
    return parse_geometry(text)


def project(cam: CameraModel, point) -> tuple[float, float]:
    """Project a camera-frame point (x, y, z) in meters to pixel (u, v).

    Raises:
        BehindCameraError: if z <= 0.
    """
    x, y, z = (float(c) for c in point)
    if z <= 0.0:
        raise BehindCameraError(f"point with z={z} is not in front of the camera")
    f = cam.focal_px
    return (cam.principal[0] + f * x / z, cam.principal[1] + f * y / z)


def build_grid(cam: CameraModel, cols: int, rows: int, distance_m: float) -> SteeringGrid:
    """Build the steering grid covering the camera frustum at a fixed depth.

    Grid point (c, r) is placed on the ray through pixel
    ((c + 0.5) * width / cols, (r + 0.5) * height / rows) at depth
    ``distance_m``, so projecting it back recovers that pixel center.

    Raises:
        ValidationError: cols/rows < 2 or non-positive distance.
    """
    if cols < 2 or rows < 2:
        raise ValidationError(f"grid must be at least 2x2, got {cols}x{rows}")
    if distance_m <= 0.0:
        raise ValidationError(f"steering distance must be positive, got {distance_m}")
    cell_w = cam.width / cols
    cell_h = cam.height / rows
    u = (np.arange(cols) + 0.5) * cell_w
    v = (np.arange(rows) + 0.5) * cell_h
    f = cam.focal_px
    x = (u - cam.principal[0]) * distance_m / f
    y = (v - cam.principal[1]) * distance_m / f
    points = np.empty((rows, cols, 3))
    points[:, :, 0] = x[None, :]
    points[:, :, 1] = y[:, None]
    points[:, :, 2] = distance_m
    points.setflags(write=False)
    return SteeringGrid(
        cols=cols, rows=rows, distance_m=distance_m,
        points=points, cell_px=(cell_w, cell_h),
    )
