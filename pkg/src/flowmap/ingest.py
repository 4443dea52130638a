"""Trajectory file parsing, physical-consistency cleaning, spatial resampling.

The trajectory file format (shared with the scenario generator) is CSV with a
header line::

    flight_id,timestamp_s,lat_deg,lon_deg,alt_ft

one radar-like sample per line, timestamps in integer seconds since epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, FormatError, InvalidInputError
from .geometry import NM_PER_DEG_LAT, project_lat_lon

TRAJECTORY_HEADER = "flight_id,timestamp_s,lat_deg,lon_deg,alt_ft"

DEFAULT_RESAMPLE_POINTS = 8


@dataclass(frozen=True)
class RawTrajectory:
    """Time-ordered radar samples of one flight."""

    flight_id: str
    times: np.ndarray    # s since epoch, strictly increasing
    lats: np.ndarray     # deg
    lons: np.ndarray     # deg
    alts: np.ndarray     # ft

    def __post_init__(self):
        if self.times.size < 2:
            raise InvalidInputError(f"{self.flight_id}: needs at least 2 samples")
        if np.any(np.diff(self.times) <= 0):
            raise InvalidInputError(f"{self.flight_id}: timestamps not strictly increasing")
        for arr in (self.times, self.lats, self.lons, self.alts):
            arr.setflags(write=False)

    @property
    def n_samples(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class ResampledTrajectory:
    """Trajectory resampled to n points at equal horizontal arc-length steps."""

    flight_id: str
    points: np.ndarray        # (l, 3): x NM, y NM, z ft
    entry_time: float
    exit_time: float
    ground_speeds: np.ndarray  # kt, one per original segment

    def __post_init__(self):
        self.points.setflags(write=False)
        self.ground_speeds.setflags(write=False)

    @property
    def n_points(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class CleaningThresholds:
    """Rejection limits for physically inconsistent flights."""

    max_ground_speed: float = 700.0    # kt
    max_climb_rate: float = 8000.0     # ft/min
    max_gap: float = 600.0             # s
    min_top_altitude: float = 25000.0  # ft, at least one sample must reach this

    def __post_init__(self):
        if min(self.max_ground_speed, self.max_climb_rate, self.max_gap,
               self.min_top_altitude) <= 0:
            raise InvalidInputError("cleaning thresholds must be positive")


@dataclass
class ParseResult:
    trajectories: list[RawTrajectory] = field(default_factory=list)
    malformed_lines: int = 0
    total_lines: int = 0


def parse_trajectory_file(path) -> ParseResult:
    """Parse a trajectory CSV into one RawTrajectory per flight id.

    Samples are sorted by timestamp per flight; duplicate timestamps within a
    flight are counted as malformed and dropped.  Raises FormatError when the
    header is wrong or more than half of the data lines are malformed.
    """
    per_flight: dict[str, list[tuple[int, float, float, float]]] = {}
    malformed = 0
    total = 0
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != TRAJECTORY_HEADER:
            raise FormatError(f"bad header {header!r}, expected {TRAJECTORY_HEADER!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            total += 1
            parts = line.split(",")
            if len(parts) != 5:
                malformed += 1
                continue
            try:
                fid = parts[0]
                t = int(parts[1])
                lat, lon, alt = float(parts[2]), float(parts[3]), float(parts[4])
            except ValueError:
                malformed += 1
                continue
            if not fid or abs(lat) > 90 or abs(lon) > 180 or not math.isfinite(alt) or alt < 0:
                malformed += 1
                continue
            per_flight.setdefault(fid, []).append((t, lat, lon, alt))
    if total > 0 and malformed > total / 2:
        raise FormatError(f"{malformed}/{total} lines malformed")

    result = ParseResult(malformed_lines=malformed, total_lines=total)
    for fid in sorted(per_flight):
        rows = sorted(per_flight[fid])
        # drop duplicate timestamps (keep first occurrence)
        deduped = [rows[0]]
        for row in rows[1:]:
            if row[0] == deduped[-1][0]:
                result.malformed_lines += 1
            else:
                deduped.append(row)
        if len(deduped) < 2:
            result.malformed_lines += len(deduped)
            continue
        arr = np.array(deduped, dtype=float)
        result.trajectories.append(RawTrajectory(
            flight_id=fid, times=arr[:, 0], lats=arr[:, 1], lons=arr[:, 2], alts=arr[:, 3]))
    return result


def serialize_trajectories(trajectories, path) -> None:
    """Write trajectories in the shared CSV format (lossless float round-trip)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        for traj in trajectories:
            for t, lat, lon, alt in zip(traj.times, traj.lats, traj.lons, traj.alts):
                fh.write(f"{traj.flight_id},{int(t)},{float(lat)!r},{float(lon)!r},{float(alt)!r}\n")


def _segment_speeds_kt(traj: RawTrajectory) -> np.ndarray:
    """Ground speed of each consecutive-sample segment, from an equirectangular
    distance at the segment's mean latitude."""
    dt_h = np.diff(traj.times) / 3600.0
    mean_lat = np.radians(0.5 * (traj.lats[:-1] + traj.lats[1:]))
    dy = NM_PER_DEG_LAT * np.diff(traj.lats)
    dx = NM_PER_DEG_LAT * np.diff(traj.lons) * np.cos(mean_lat)
    return np.hypot(dx, dy) / dt_h


def clean_trajectories(raw: list[RawTrajectory], thresholds: CleaningThresholds | None = None
                       ) -> tuple[list[RawTrajectory], list[tuple[RawTrajectory, str]]]:
    """Split trajectories into (clean, rejected-with-reason).

    A flight is rejected iff any segment implies a ground speed or climb rate
    beyond the thresholds, any sampling gap exceeds max_gap, or no sample
    reaches min_top_altitude.
    """
    th = thresholds or CleaningThresholds()
    clean: list[RawTrajectory] = []
    rejected: list[tuple[RawTrajectory, str]] = []
    for traj in raw:
        reason = _rejection_reason(traj, th)
        if reason is None:
            clean.append(traj)
        else:
            rejected.append((traj, reason))
    return clean, rejected


def _rejection_reason(traj: RawTrajectory, th: CleaningThresholds) -> str | None:
    dt = np.diff(traj.times)
    if np.any(dt > th.max_gap):
        return "gap"
    if np.any(_segment_speeds_kt(traj) > th.max_ground_speed):
        return "speed"
    climb = np.abs(np.diff(traj.alts) / (dt / 60.0))
    if np.any(climb > th.max_climb_rate):
        return "climb"
    if np.max(traj.alts) < th.min_top_altitude:
        return "altitude"
    return None


def resample(traj: RawTrajectory, l: int = DEFAULT_RESAMPLE_POINTS,
             origin_lat: float = 0.0, origin_lon: float = 0.0) -> ResampledTrajectory:
    """Resample to l points at equal horizontal arc-length fractions.

    The trajectory is projected to the flat-earth frame, then x, y, z are
    interpolated linearly against cumulative horizontal arc length at the
    fractions 0, 1/(l-1), ..., 1.  Altitude rides along the same parameter.
    """
    if l < 2:
        raise InvalidInputError(f"need at least 2 resample points, got {l}")
    cos0 = math.cos(math.radians(origin_lat))
    xs = NM_PER_DEG_LAT * (traj.lons - origin_lon) * cos0
    ys = NM_PER_DEG_LAT * (traj.lats - origin_lat)
    seg = np.hypot(np.diff(xs), np.diff(ys))
    arc = np.concatenate(([0.0], np.cumsum(seg)))
    total = arc[-1]
    if total <= 1e-9:
        raise DegenerateGeometryError(f"{traj.flight_id}: zero-length horizontal path")
    targets = np.linspace(0.0, total, l)
    points = np.column_stack([
        np.interp(targets, arc, xs),
        np.interp(targets, arc, ys),
        np.interp(targets, arc, traj.alts),
    ])
    return ResampledTrajectory(
        flight_id=traj.flight_id,
        points=points,
        entry_time=float(traj.times[0]),
        exit_time=float(traj.times[-1]),
        ground_speeds=_segment_speeds_kt(traj),
    )
