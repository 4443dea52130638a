"""Synthetic scenario generation and Monte Carlo snapshot oracles.

Scenarios write the shared trajectory CSV format plus a ground-truth label
file, so the full ingest/cluster/fit pipeline is testable end to end.  The
snapshot oracle places aircraft along each flow by a renewal process started
many mean gaps upstream (so the window of interest sees the stationary law)
and estimates the presence, conflict and outlier-proximity probabilities by
counting.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import FormatError, InvalidInputError
from .flowmodel import Region, TLocationScale
from .geometry import (DEFAULT_PROX_HALF_LATERAL_NM, DEFAULT_PROX_HALF_VERTICAL_FT,
                       NM_PER_DEG_LAT, PointENU)
from .ingest import RawTrajectory, serialize_trajectories

SCENARIO_FORMAT = "flowmap-scenario"
SCENARIO_VERSION = 1

DEFAULT_START_EPOCH = int(datetime(2005, 5, 2, tzinfo=timezone.utc).timestamp())  # a Monday
BIN_SECONDS = 900.0
SAMPLE_INTERVAL_S = 60.0

TRUTH_OUTLIER = "OUTLIER"


@dataclass(frozen=True)
class FlowSpec:
    """Ground-truth flow: waypoints (x NM, y NM, z ft), spread, speed, rate."""

    name: str
    waypoints: tuple
    lateral_std_nm: float
    vertical_std_ft: float
    speed: TLocationScale
    rate_per_bin: float  # arrivals per 15 minutes

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise InvalidInputError(f"flow {self.name}: needs at least 2 waypoints")
        if self.rate_per_bin < 0:
            raise InvalidInputError(f"flow {self.name}: rate must be >= 0")


@dataclass(frozen=True)
class OutlierSpec:
    """Outliers: straight random chords through a region box."""

    rate_per_bin: float
    region: Region
    speed_lo_kt: float = 350.0
    speed_hi_kt: float = 500.0


@dataclass(frozen=True)
class ScenarioSpec:
    origin_lat: float
    origin_lon: float
    flows: tuple
    outliers: OutlierSpec | None = None
    duration_days: int = 1
    start_epoch: int = DEFAULT_START_EPOCH

    def to_json(self) -> dict:
        doc = {
            "format": SCENARIO_FORMAT,
            "version": SCENARIO_VERSION,
            "origin_lat": self.origin_lat,
            "origin_lon": self.origin_lon,
            "duration_days": self.duration_days,
            "start_epoch": self.start_epoch,
            "flows": [
                {
                    "name": f.name,
                    "waypoints": [list(w) for w in f.waypoints],
                    "lateral_std_nm": f.lateral_std_nm,
                    "vertical_std_ft": f.vertical_std_ft,
                    "speed": {"mu": f.speed.mu, "sigma": f.speed.sigma, "nu": f.speed.nu},
                    "rate_per_bin": f.rate_per_bin,
                }
                for f in self.flows
            ],
        }
        if self.outliers is not None:
            o = self.outliers
            doc["outliers"] = {
                "rate_per_bin": o.rate_per_bin,
                "region": [o.region.x_lo, o.region.x_hi, o.region.y_lo, o.region.y_hi,
                           o.region.z_lo, o.region.z_hi],
                "speed_range": [o.speed_lo_kt, o.speed_hi_kt],
            }
        return doc

    @staticmethod
    def from_json(doc: dict) -> "ScenarioSpec":
        if doc.get("format") != SCENARIO_FORMAT:
            raise FormatError(f"not a scenario spec: format={doc.get('format')!r}")
        if doc.get("version") != SCENARIO_VERSION:
            raise FormatError(f"unsupported scenario version {doc.get('version')!r}")
        flows = tuple(
            FlowSpec(
                name=f["name"],
                waypoints=tuple(tuple(float(c) for c in w) for w in f["waypoints"]),
                lateral_std_nm=float(f["lateral_std_nm"]),
                vertical_std_ft=float(f["vertical_std_ft"]),
                speed=TLocationScale(float(f["speed"]["mu"]), float(f["speed"]["sigma"]),
                                     float(f["speed"]["nu"])),
                rate_per_bin=float(f["rate_per_bin"]),
            )
            for f in doc["flows"]
        )
        outliers = None
        if "outliers" in doc and doc["outliers"] is not None:
            o = doc["outliers"]
            r = [float(v) for v in o["region"]]
            outliers = OutlierSpec(float(o["rate_per_bin"]), Region(*r),
                                   float(o["speed_range"][0]), float(o["speed_range"][1]))
        return ScenarioSpec(
            origin_lat=float(doc["origin_lat"]),
            origin_lon=float(doc["origin_lon"]),
            flows=flows,
            outliers=outliers,
            duration_days=int(doc.get("duration_days", 1)),
            start_epoch=int(doc.get("start_epoch", DEFAULT_START_EPOCH)),
        )


def load_scenario(path) -> ScenarioSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return ScenarioSpec.from_json(json.load(fh))


@dataclass
class GeneratedScenario:
    trajectories: list[RawTrajectory]
    truth: dict[str, str]            # flight id -> flow name or OUTLIER
    flights_per_flow: dict[str, int] = field(default_factory=dict)


def _unproject(xs: np.ndarray, ys: np.ndarray, origin_lat: float, origin_lon: float
               ) -> tuple[np.ndarray, np.ndarray]:
    lats = origin_lat + ys / NM_PER_DEG_LAT
    lons = origin_lon + xs / (NM_PER_DEG_LAT * math.cos(math.radians(origin_lat)))
    return lats, lons


def _polyline_arcs(waypoints: np.ndarray) -> np.ndarray:
    seg = np.hypot(np.diff(waypoints[:, 0]), np.diff(waypoints[:, 1]))
    return np.concatenate(([0.0], np.cumsum(seg)))


def _offset_polyline(waypoints: np.ndarray, lateral: float) -> np.ndarray:
    """Shift a polyline sideways: each vertex moves along the left normal of
    the mean direction of its adjacent segments."""
    d = np.diff(waypoints[:, :2], axis=0)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    vertex_dir = np.empty_like(waypoints[:, :2])
    vertex_dir[0] = d[0]
    vertex_dir[-1] = d[-1]
    if len(d) > 1:
        mids = d[:-1] + d[1:]
        mids /= np.linalg.norm(mids, axis=1, keepdims=True)
        vertex_dir[1:-1] = mids
    normals = np.column_stack([-vertex_dir[:, 1], vertex_dir[:, 0]])
    out = waypoints.copy()
    out[:, :2] += lateral * normals
    return out


def _arrival_times(rng: np.random.Generator, rate_per_bin: float, duration_s: float) -> np.ndarray:
    """Homogeneous Poisson arrivals over [0, duration_s) via exponential gaps."""
    if rate_per_bin <= 0:
        return np.array([])
    lam = rate_per_bin / BIN_SECONDS
    n_guess = int(lam * duration_s * 1.5 + 30)
    times: list[float] = []
    t = 0.0
    while True:
        gaps = rng.exponential(1.0 / lam, size=n_guess)
        for g in gaps:
            t += g
            if t >= duration_s:
                return np.array(times)
            times.append(t)


def _flight_samples(path_xy: np.ndarray, alts: np.ndarray, speed_kt: float,
                    t0: float, spec: ScenarioSpec) -> RawTrajectory | None:
    arcs = _polyline_arcs(path_xy)
    total = arcs[-1]
    v_nm_s = speed_kt / 3600.0
    duration = total / v_nm_s
    n = int(duration // SAMPLE_INTERVAL_S) + 1
    if n < 2:
        return None
    ts = t0 + SAMPLE_INTERVAL_S * np.arange(n)
    s = v_nm_s * (ts - t0)
    xs = np.interp(s, arcs, path_xy[:, 0])
    ys = np.interp(s, arcs, path_xy[:, 1])
    zs = np.interp(s, arcs, alts)
    lats, lons = _unproject(xs, ys, spec.origin_lat, spec.origin_lon)
    return RawTrajectory("pending", np.floor(ts), lats, lons, np.maximum(zs, 0.0))


def generate_scenario(spec: ScenarioSpec, seed: int, traj_path=None, truth_path=None
                      ) -> GeneratedScenario:
    """Sample a full scenario; deterministic for a fixed seed.

    Per flow: Poisson arrivals at the flow rate, each flight with one lateral
    and one vertical offset held for the whole flight and a speed drawn from
    the flow's model.  Outliers fly straight random chords through their
    region.  Radar-like samples are emitted every 60 s.
    """
    rng = np.random.default_rng(seed)
    duration_s = spec.duration_days * 86400.0
    trajectories: list[RawTrajectory] = []
    truth: dict[str, str] = {}
    per_flow: dict[str, int] = {}

    for fs in spec.flows:
        waypoints = np.array(fs.waypoints, dtype=float)
        arrivals = _arrival_times(rng, fs.rate_per_bin, duration_s)
        per_flow[fs.name] = 0
        for idx, rel_t in enumerate(arrivals):
            lateral = rng.normal(0.0, fs.lateral_std_nm)
            vertical = rng.normal(0.0, fs.vertical_std_ft)
            speed = float(np.clip(fs.speed.sample(rng, 1)[0], 120.0, 650.0))
            path = _offset_polyline(waypoints, lateral)
            alts = waypoints[:, 2] + vertical
            traj = _flight_samples(path, alts, speed, spec.start_epoch + rel_t, spec)
            if traj is None:
                continue
            fid = f"{fs.name}{idx:05d}"
            trajectories.append(RawTrajectory(fid, traj.times, traj.lats, traj.lons, traj.alts))
            truth[fid] = fs.name
            per_flow[fs.name] += 1

    if spec.outliers is not None:
        o = spec.outliers
        arrivals = _arrival_times(rng, o.rate_per_bin, duration_s)
        per_flow[TRUTH_OUTLIER] = 0
        for idx, rel_t in enumerate(arrivals):
            path, alt = _random_chord(rng, o.region)
            speed = float(rng.uniform(o.speed_lo_kt, o.speed_hi_kt))
            traj = _flight_samples(path, np.full(len(path), alt), speed,
                                   spec.start_epoch + rel_t, spec)
            if traj is None:
                continue
            fid = f"OUT{idx:05d}"
            trajectories.append(RawTrajectory(fid, traj.times, traj.lats, traj.lons, traj.alts))
            truth[fid] = TRUTH_OUTLIER
            per_flow[TRUTH_OUTLIER] += 1

    trajectories.sort(key=lambda t: t.flight_id)
    if traj_path is not None:
        serialize_trajectories(trajectories, traj_path)
    if truth_path is not None:
        with open(truth_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("flight_id,flow\n")
            for fid in sorted(truth):
                fh.write(f"{fid},{truth[fid]}\n")
    return GeneratedScenario(trajectories, truth, per_flow)


def _random_chord(rng: np.random.Generator, region: Region) -> tuple[np.ndarray, float]:
    """Straight path through a random interior point at a random heading,
    clipped to the region's horizontal rectangle."""
    px = rng.uniform(region.x_lo, region.x_hi)
    py = rng.uniform(region.y_lo, region.y_hi)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    dx, dy = math.cos(theta), math.sin(theta)
    ts = []
    for d, p, lo, hi in ((dx, px, region.x_lo, region.x_hi),
                         (dy, py, region.y_lo, region.y_hi)):
        if abs(d) > 1e-12:
            ts.extend([(lo - p) / d, (hi - p) / d])
    t_lo = max(t for t in ts if t <= 0) if any(t <= 0 for t in ts) else 0.0
    t_hi = min(t for t in ts if t >= 0) if any(t >= 0 for t in ts) else 0.0
    a = np.array([px + t_lo * dx, py + t_lo * dy])
    b = np.array([px + t_hi * dx, py + t_hi * dy])
    alt = rng.uniform(region.z_lo, region.z_hi)
    path = np.array([[a[0], a[1], alt], [b[0], b[1], alt]])
    return path, alt


# ---------------------------------------------------------------------------
# Monte Carlo snapshot oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    half_width_99: float
    n_samples: int


def _mc_estimate(hits: int, n: int) -> MonteCarloEstimate:
    p = hits / n
    return MonteCarloEstimate(p, 2.576 * math.sqrt(p * (1.0 - p) / n), n)


@dataclass(frozen=True)
class McFlowLaw:
    """Snapshot law of one straight flow for the oracle: renewal spacing along
    the track, independent lateral/vertical offsets."""

    start: tuple[float, float]
    direction: tuple[float, float]      # unit horizontal
    mean_gap: float                     # NM
    gap_sampler: object                 # (rng, size) -> gaps NM
    lateral_sampler: object             # (rng, size) -> offsets NM
    vertical_sampler: object            # (rng, size) -> altitudes ft

    @staticmethod
    def exponential(start, direction, mean_gap: float, lateral_std: float,
                    alt_mean: float, alt_std: float) -> "McFlowLaw":
        norm = math.hypot(*direction)
        d = (direction[0] / norm, direction[1] / norm)
        return McFlowLaw(
            tuple(start), d, mean_gap,
            gap_sampler=lambda rng, size: rng.exponential(mean_gap, size),
            lateral_sampler=lambda rng, size: rng.normal(0.0, lateral_std, size)
            if lateral_std > 0 else np.zeros(size),
            vertical_sampler=lambda rng, size: rng.normal(alt_mean, alt_std, size)
            if alt_std > 0 else np.full(size, alt_mean),
        )

    @staticmethod
    def speed_time_product(start, direction, speed: TLocationScale, lam_per_s: float,
                           lateral_std: float, alt_mean: float, alt_std: float) -> "McFlowLaw":
        """Gaps sampled as speed x inter-arrival time (both independent)."""
        norm = math.hypot(*direction)
        d = (direction[0] / norm, direction[1] / norm)
        mean_gap = speed.mu / 3600.0 / lam_per_s

        def gaps(rng, size):
            v = np.clip(speed.sample(rng, size), 1.0, None) / 3600.0
            return v * rng.exponential(1.0 / lam_per_s, size)

        return McFlowLaw(
            tuple(start), d, mean_gap, gap_sampler=gaps,
            lateral_sampler=lambda rng, size: rng.normal(0.0, lateral_std, size)
            if lateral_std > 0 else np.zeros(size),
            vertical_sampler=lambda rng, size: rng.normal(alt_mean, alt_std, size)
            if alt_std > 0 else np.full(size, alt_mean),
        )


@dataclass(frozen=True)
class UniformOutlierLaw:
    """Outliers uniform over a region box with Poisson-distributed count."""

    region: Region
    expected_count: float  # mean number present at a random instant

    def occupancy_grid(self, step_xy: float = 1.0, step_z: float = 1000.0):
        """The analytically matching occupancy-mode OutlierDensity."""
        from .flowmodel import MODE_OCCUPANCY, OutlierDensity, _grid_shape
        nx, ny, nz = _grid_shape(self.region, step_xy, step_z)
        r = self.region
        vol = (r.x_hi - r.x_lo) * (r.y_hi - r.y_lo) * (r.z_hi - r.z_lo)
        cube = step_xy * step_xy * step_z
        values = np.full((nx, ny, nz), self.expected_count * cube / vol)
        return OutlierDensity(self.region, step_xy, step_z, values, MODE_OCCUPANCY, 1.0)


@dataclass
class McResult:
    p1: MonteCarloEstimate
    p2: MonteCarloEstimate
    po: MonteCarloEstimate | None = None


def mc_presence(laws: list[McFlowLaw], point: PointENU, n: int, seed: int,
                half_lateral: float = DEFAULT_PROX_HALF_LATERAL_NM,
                half_vertical: float = DEFAULT_PROX_HALF_VERTICAL_FT,
                outlier: UniformOutlierLaw | None = None,
                warmup_gaps: int = 25, chunk: int = 200_000) -> McResult:
    """Estimate P1/P2/PO at a point from n independent traffic snapshots.

    Aircraft are placed along each flow by drawing successive gaps starting
    warmup_gaps mean gaps upstream of the proximity window, which makes the
    law at the window stationary to far better than the Monte Carlo noise.
    Deterministic for fixed (seed, chunk).
    """
    if n < 1000:
        raise InvalidInputError("need at least 1000 snapshots")
    rng = np.random.default_rng(seed)
    p1_hits = p2_hits = po_hits = 0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        n_present = np.zeros(m, dtype=np.int64)
        for law in laws:
            n_present += _law_snapshot_presence(law, point, half_lateral, half_vertical,
                                                m, rng, warmup_gaps)
        p1_snap = n_present >= 1
        p1_hits += int(np.sum(p1_snap))
        p2_hits += int(np.sum(n_present >= 2))
        if outlier is not None:
            out_present = _outlier_snapshot_presence(outlier, point, half_lateral,
                                                     half_vertical, m, rng)
            po_hits += int(np.sum(p1_snap & out_present))
        done += m
    po = _mc_estimate(po_hits, n) if outlier is not None else None
    return McResult(_mc_estimate(p1_hits, n), _mc_estimate(p2_hits, n), po)


def _law_snapshot_presence(law: McFlowLaw, point: PointENU, a_p: float, b_p: float,
                           m: int, rng: np.random.Generator, warmup_gaps: int) -> np.ndarray:
    ex, ey = law.direction
    dx = point.x - law.start[0]
    dy = point.y - law.start[1]
    t_p = dx * ex + dy * ey
    u_p = dx * (-ey) + dy * ex
    lo = t_p - a_p
    hi = t_p + a_p
    start = lo - warmup_gaps * law.mean_gap
    pos = np.full(m, start)
    present = np.zeros(m, dtype=bool)
    active = np.ones(m, dtype=bool)
    # advance every snapshot's renewal chain until it passes the window
    for _ in range(100 * (warmup_gaps + 4)):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        pos[idx] += law.gap_sampler(rng, idx.size)
        inside = idx[(pos[idx] >= lo) & (pos[idx] <= hi)]
        if inside.size:
            lat = law.lateral_sampler(rng, inside.size)
            alt = law.vertical_sampler(rng, inside.size)
            hit = (np.abs(lat - u_p) <= a_p) & (np.abs(alt - point.z) <= b_p)
            present[inside[hit]] = True
        active[idx[pos[idx] > hi]] = False
    return present.astype(np.int64)


def _outlier_snapshot_presence(outlier: UniformOutlierLaw, point: PointENU,
                               a_p: float, b_p: float, m: int,
                               rng: np.random.Generator) -> np.ndarray:
    r = outlier.region
    counts = rng.poisson(outlier.expected_count, m)
    total = int(counts.sum())
    present = np.zeros(m, dtype=bool)
    if total == 0:
        return present
    xs = rng.uniform(r.x_lo, r.x_hi, total)
    ys = rng.uniform(r.y_lo, r.y_hi, total)
    zs = rng.uniform(r.z_lo, r.z_hi, total)
    inside = ((np.abs(xs - point.x) <= a_p) & (np.abs(ys - point.y) <= a_p)
              & (np.abs(zs - point.z) <= b_p))
    starts = np.concatenate(([0], np.cumsum(counts)))[:-1]
    hits = np.add.reduceat(inside.astype(np.int64), np.minimum(starts, total - 1))
    hits[counts == 0] = 0  # reduceat yields a[idx] for empty segments
    return hits > 0
