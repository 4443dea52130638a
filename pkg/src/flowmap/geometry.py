"""Shared geometry: flat-earth projection, track-aligned frames, box intersection.

Horizontal coordinates are nautical miles East/North of the airspace origin,
altitudes are feet.  Track-aligned frames keep the vertical axis equal to the
global up axis, so all frame math reduces to 2D rotations in the horizontal
plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InvalidInputError

NM_PER_DEG_LAT = 60.0
FT_PER_NM = 6076.11549

DEFAULT_PROX_HALF_LATERAL_NM = 2.5
DEFAULT_PROX_HALF_VERTICAL_FT = 1000.0

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class PointENU:
    """A point in the flat-earth frame: x NM East, y NM North, z ft altitude."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise InvalidInputError(f"non-finite coordinates ({self.x}, {self.y}, {self.z})")
        if self.z < 0:
            raise InvalidInputError(f"negative altitude {self.z} ft")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


def project_lat_lon(lat: float, lon: float, origin_lat: float, origin_lon: float) -> tuple[float, float]:
    """Equirectangular projection of (lat, lon) degrees to (x, y) NM.

    One degree of latitude maps to 60 NM; longitude is scaled by the cosine
    of the origin latitude.  The origin maps to (0, 0) exactly.
    """
    for name, val, bound in (("lat", lat, 90.0), ("lon", lon, 180.0)):
        if not math.isfinite(val) or abs(val) > bound:
            raise InvalidInputError(f"{name}={val} outside +/-{bound}")
    if abs(origin_lat) > 90.0 or abs(origin_lon) > 180.0:
        raise InvalidInputError("projection origin outside valid lat/lon range")
    y = NM_PER_DEG_LAT * (lat - origin_lat)
    x = NM_PER_DEG_LAT * (lon - origin_lon) * math.cos(math.radians(origin_lat))
    return x, y


def great_circle_nm(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Haversine great-circle distance in NM on a 60 NM/deg sphere."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * math.asin(math.sqrt(a)) * math.degrees(1.0) * NM_PER_DEG_LAT


@dataclass(frozen=True)
class LocalFrame:
    """Track-aligned frame at a point: longitudinal along track (horizontal),
    lateral left of track, vertical equal to global up."""

    origin: PointENU
    longitudinal: np.ndarray
    lateral: np.ndarray
    vertical: np.ndarray

    def __post_init__(self):
        lon, lat, up = self.longitudinal, self.lateral, self.vertical
        if not np.array_equal(up, np.array([0.0, 0.0, 1.0])):
            raise InvalidInputError("vertical axis must equal global up exactly")
        if lon[2] != 0.0:
            raise InvalidInputError("longitudinal axis must be horizontal")
        for a, b in ((lon, lat), (lon, up), (lat, up)):
            if abs(float(np.dot(a, b))) > _ORTHO_TOL:
                raise InvalidInputError("frame axes are not orthogonal")
        for a in (lon, lat):
            if abs(float(np.dot(a, a)) - 1.0) > _ORTHO_TOL:
                raise InvalidInputError("frame axes are not unit length")
        self.longitudinal.setflags(write=False)
        self.lateral.setflags(write=False)
        self.vertical.setflags(write=False)

    def horizontal_coords(self, p: PointENU) -> tuple[float, float]:
        """(along-track, lateral) NM coordinates of p relative to the origin."""
        dx = p.x - self.origin.x
        dy = p.y - self.origin.y
        along = dx * self.longitudinal[0] + dy * self.longitudinal[1]
        lateral = dx * self.lateral[0] + dy * self.lateral[1]
        return along, lateral


def build_local_frame(track_points, k: int) -> LocalFrame:
    """Frame at track point k, aligned with the horizontal heading k -> k+1.

    The lateral axis is up x longitudinal (left of track positive).
    """
    pts = _as_point_array(track_points)
    if k < 0 or k >= len(pts) - 1:
        raise InvalidInputError(f"k={k} needs a successor point (track has {len(pts)})")
    dx = pts[k + 1, 0] - pts[k, 0]
    dy = pts[k + 1, 1] - pts[k, 1]
    norm = math.hypot(dx, dy)
    if norm < 1e-12:
        raise DegenerateGeometryError(f"coincident horizontal positions at track index {k}")
    ex, ey = dx / norm, dy / norm
    origin = PointENU(float(pts[k, 0]), float(pts[k, 1]), float(pts[k, 2]))
    return LocalFrame(
        origin=origin,
        longitudinal=np.array([ex, ey, 0.0]),
        lateral=np.array([-ey, ex, 0.0]),
        vertical=np.array([0.0, 0.0, 1.0]),
    )


def _as_point_array(track_points) -> np.ndarray:
    if isinstance(track_points, np.ndarray):
        return track_points
    return np.array([[p.x, p.y, p.z] for p in track_points], dtype=float)


@dataclass(frozen=True)
class ProximityBox:
    """Conflict-criterion volume: cylinder of radius half_lateral NM and
    half-height half_vertical ft, handled via its circumscribing box."""

    center: PointENU
    orientation: LocalFrame
    half_lateral: float = DEFAULT_PROX_HALF_LATERAL_NM
    half_vertical: float = DEFAULT_PROX_HALF_VERTICAL_FT

    def __post_init__(self):
        if self.half_lateral <= 0 or self.half_vertical <= 0:
            raise InvalidInputError("proximity box half-dimensions must be positive")


@dataclass(frozen=True)
class BoxExtents:
    """Axis-aligned extents in a LocalFrame: along/lateral NM, vertical ft."""

    along_lo: float
    along_hi: float
    lat_lo: float
    lat_hi: float
    vert_lo: float
    vert_hi: float


@dataclass(frozen=True)
class IntersectionExtents:
    """Per-axis entry/exit coordinates of a box intersection; empty when any
    axis interval is empty."""

    along_lo: float = 0.0
    along_hi: float = 0.0
    lat_lo: float = 0.0
    lat_hi: float = 0.0
    vert_lo: float = 0.0
    vert_hi: float = 0.0
    empty: bool = False

    @property
    def along_length(self) -> float:
        return self.along_hi - self.along_lo


def intersect_extents(a: BoxExtents, b: BoxExtents) -> IntersectionExtents:
    """Per-axis interval intersection of two axis-aligned boxes."""
    along_lo, along_hi = max(a.along_lo, b.along_lo), min(a.along_hi, b.along_hi)
    lat_lo, lat_hi = max(a.lat_lo, b.lat_lo), min(a.lat_hi, b.lat_hi)
    vert_lo, vert_hi = max(a.vert_lo, b.vert_lo), min(a.vert_hi, b.vert_hi)
    if along_lo >= along_hi or lat_lo >= lat_hi or vert_lo >= vert_hi:
        return IntersectionExtents(empty=True)
    return IntersectionExtents(along_lo, along_hi, lat_lo, lat_hi, vert_lo, vert_hi)


def prox_box_extents(prox: ProximityBox, frame: LocalFrame) -> BoxExtents:
    """Circumscribing box of the proximity cylinder, expressed in `frame`.

    The box is 2*half_lateral x 2*half_lateral x 2*half_vertical, centered on
    the cylinder center and aligned with the frame axes.
    """
    along, lateral = frame.horizontal_coords(prox.center)
    a = prox.half_lateral
    b = prox.half_vertical
    return BoxExtents(along - a, along + a, lateral - a, lateral + a,
                      prox.center.z - b, prox.center.z + b)


def intersect_box(flow_extents: BoxExtents, prox: ProximityBox, frame: LocalFrame) -> IntersectionExtents:
    """Intersection of a flow box with the circumscribing box of the proximity
    cylinder, both expressed in the flow box's frame."""
    return intersect_extents(flow_extents, prox_box_extents(prox, frame))
