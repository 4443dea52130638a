"""Flow geometry and per-flow statistical models.

A flow is the centroid track of one trajectory cluster plus, at each of its
resampled points, a window carrying sampled lateral and vertical aircraft
densities, a fitted speed distribution, and an arrival-rate share per time
bin.  Outlier traffic is modeled separately as a 3D occupancy grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .density import DiscretePdf, pdf_from_samples
from .errors import InsufficientDataError, InvalidInputError
from .geometry import LocalFrame, PointENU, build_local_frame
from .ingest import ResampledTrajectory

DEFAULT_LATERAL_BIN_NM = 0.5
DEFAULT_VERTICAL_BIN_FT = 200.0

SIGMA_MIN_KT = 0.5
NU_MIN, NU_MAX = 1.0, 100.0


@dataclass(frozen=True)
class TLocationScale:
    """t location-scale speed model with location mu (kt), scale sigma (kt),
    shape nu.  (x - mu)/sigma follows a Student t with nu degrees of freedom."""

    mu: float
    sigma: float
    nu: float

    def __post_init__(self):
        if self.sigma <= 0 or self.nu <= 0:
            raise InvalidInputError("sigma and nu must be positive")

    def logpdf(self, x) -> np.ndarray:
        t = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        nu = self.nu
        return (special.gammaln((nu + 1.0) / 2.0) - special.gammaln(nu / 2.0)
                - 0.5 * math.log(nu * math.pi) - math.log(self.sigma)
                - (nu + 1.0) / 2.0 * np.log1p(t * t / nu))

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def cdf(self, x) -> np.ndarray:
        t = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return special.stdtr(self.nu, t)

    def quantile(self, q: float) -> float:
        return self.mu + self.sigma * float(special.stdtrit(self.nu, q))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.mu + self.sigma * rng.standard_t(self.nu, size=n)


def _neg_loglike(params: np.ndarray, x: np.ndarray) -> float:
    mu, log_sigma, log_nu = params
    sigma = math.exp(log_sigma)
    nu = min(max(math.exp(log_nu), NU_MIN), NU_MAX)
    t = (x - mu) / sigma
    ll = (x.size * (special.gammaln((nu + 1.0) / 2.0) - special.gammaln(nu / 2.0)
                    - 0.5 * math.log(nu * math.pi) - log_sigma)
          - (nu + 1.0) / 2.0 * float(np.sum(np.log1p(t * t / nu))))
    return -ll


def fit_speed(speeds, min_samples: int = 30) -> TLocationScale:
    """Maximum-likelihood t location-scale fit of speed samples (kt).

    Simplex descent on (mu, log sigma, log nu) from a median/MAD start with
    nu0 = 5; nu is capped to [1, 100].  All-equal samples fall back to a
    point-mass-like model with the minimum scale.
    """
    x = np.asarray(speeds, dtype=float)
    if x.size < min_samples:
        raise InsufficientDataError(f"{x.size} speed samples < {min_samples}")
    if float(np.std(x)) < 1e-9:
        return TLocationScale(float(x[0]), SIGMA_MIN_KT, NU_MAX)
    mu0 = float(np.median(x))
    sigma0 = max(1.4826 * float(np.median(np.abs(x - mu0))), 1e-3)
    x0 = np.array([mu0, math.log(sigma0), math.log(5.0)])
    res = optimize.minimize(_neg_loglike, x0, args=(x,), method="Nelder-Mead",
                            options={"xatol": 1e-6, "fatol": 1e-8, "maxiter": 2000})
    best = res.x if res.fun <= _neg_loglike(x0, x) else x0
    mu, log_sigma, log_nu = best
    return TLocationScale(float(mu), math.exp(log_sigma),
                          min(max(math.exp(log_nu), NU_MIN), NU_MAX))


def moment_speed_model(speeds) -> TLocationScale:
    """Moment-matched quasi-Gaussian model for flows too small for the MLE."""
    x = np.asarray(speeds, dtype=float)
    return TLocationScale(float(np.mean(x)), max(float(np.std(x)), SIGMA_MIN_KT), NU_MAX)


@dataclass(frozen=True)
class Window:
    """Cross-section of a flow at one track point: a track-aligned frame and
    the sampled lateral (signed offset, NM) and vertical (altitude, ft)
    aircraft densities, with extents covering both supports."""

    frame: LocalFrame
    lateral_extent: tuple[float, float]
    vertical_extent: tuple[float, float]
    lateral_density: DiscretePdf
    vertical_density: DiscretePdf


@dataclass(frozen=True)
class Flow:
    """A 3D tube of similar trajectories and its traffic model."""

    id: int
    track: np.ndarray            # (l, 3)
    windows: tuple[Window, ...]
    speed: TLocationScale
    member_count: int
    rate_share: dict = field(default_factory=dict)  # "weekday-bin" -> pi

    def __post_init__(self):
        self.track.setflags(write=False)

    @property
    def n_points(self) -> int:
        return len(self.track)

    def box_length(self, k: int) -> float:
        dx = self.track[k + 1, 0] - self.track[k, 0]
        dy = self.track[k + 1, 1] - self.track[k, 1]
        return math.hypot(dx, dy)


def _window_frame(track: np.ndarray, k: int) -> LocalFrame:
    """Frame at track point k; the last window reuses the last segment heading."""
    if k < len(track) - 1:
        return build_local_frame(track, k)
    base = build_local_frame(track, len(track) - 2)
    origin = PointENU(float(track[k, 0]), float(track[k, 1]), float(track[k, 2]))
    return LocalFrame(origin, base.longitudinal, base.lateral, base.vertical)


def member_offsets(trajs: list[ResampledTrajectory], track: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Signed lateral offsets (l, m) NM and altitudes (l, m) ft of members at
    each window of the given track."""
    l = len(track)
    lateral = np.empty((l, len(trajs)))
    vertical = np.empty((l, len(trajs)))
    for k in range(l):
        frame = _window_frame(track, k)
        lx, ly = frame.lateral[0], frame.lateral[1]
        for m, traj in enumerate(trajs):
            dx = traj.points[k, 0] - track[k, 0]
            dy = traj.points[k, 1] - track[k, 1]
            lateral[k, m] = dx * lx + dy * ly
            vertical[k, m] = traj.points[k, 2]
    return lateral, vertical


def build_flow(cluster_trajs: list[ResampledTrajectory], flow_id: int = 0,
               speed: TLocationScale | None = None,
               lateral_bin: float = DEFAULT_LATERAL_BIN_NM,
               vertical_bin: float = DEFAULT_VERTICAL_BIN_FT) -> Flow:
    """Build a flow from its cluster members.

    The track is the pointwise mean of the members; each window's densities
    are normalized histograms of the members' signed lateral offsets and
    altitudes there.  Window extents are the density supports (which contain
    the sample extrema).  When no speed model is supplied, one is fitted from
    the members' mean ground speeds (moment fallback below 30 members).
    """
    if len(cluster_trajs) < 2:
        raise InsufficientDataError("a flow needs at least 2 member trajectories")
    l = cluster_trajs[0].n_points
    if any(t.n_points != l for t in cluster_trajs):
        raise InvalidInputError("member trajectories disagree on point count")
    track = np.mean([t.points for t in cluster_trajs], axis=0)
    lateral, vertical = member_offsets(cluster_trajs, track)
    windows = []
    for k in range(l):
        lat_pdf = pdf_from_samples(lateral[k], lateral_bin)
        vert_pdf = pdf_from_samples(vertical[k], vertical_bin)
        windows.append(Window(
            frame=_window_frame(track, k),
            lateral_extent=lat_pdf.support,
            vertical_extent=vert_pdf.support,
            lateral_density=lat_pdf,
            vertical_density=vert_pdf,
        ))
    if speed is None:
        samples = np.array([float(np.mean(t.ground_speeds)) for t in cluster_trajs])
        try:
            speed = fit_speed(samples)
        except InsufficientDataError:
            speed = moment_speed_model(samples)
    return Flow(flow_id, track, tuple(windows), speed, len(cluster_trajs))


def lateral_vertical_correlation(trajs: list[ResampledTrajectory], flow: Flow
                                 ) -> tuple[np.ndarray, np.ndarray]:
    """Pearson correlation of (lateral offset, altitude) at each window.

    Returns (correlations, degenerate_flags); windows with zero variance in
    either coordinate report 0 with the flag set.
    """
    if len(trajs) < 3:
        raise InsufficientDataError("correlation needs at least 3 members")
    lateral, vertical = member_offsets(trajs, flow.track)
    l = lateral.shape[0]
    corr = np.zeros(l)
    degenerate = np.zeros(l, dtype=bool)
    for k in range(l):
        a, b = lateral[k], vertical[k]
        sa, sb = np.std(a), np.std(b)
        if sa < 1e-12 or sb < 1e-12:
            degenerate[k] = True
        else:
            corr[k] = float(np.corrcoef(a, b)[0, 1])
    return corr, degenerate


def correlation_summary(per_window_corrs: list[np.ndarray], percentile: float = 90.0) -> float:
    """Percentile of |correlation| pooled over all windows of all flows."""
    if not per_window_corrs:
        return 0.0
    pooled = np.abs(np.concatenate(per_window_corrs))
    return float(np.percentile(pooled, percentile))


@dataclass(frozen=True)
class Region:
    """Axis-aligned airspace region: x/y NM, z ft."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    z_lo: float
    z_hi: float

    def __post_init__(self):
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi and self.z_lo < self.z_hi):
            raise InvalidInputError("region bounds must be ordered lo < hi")

    def contains(self, x: float, y: float, z: float) -> bool:
        return (self.x_lo <= x <= self.x_hi and self.y_lo <= y <= self.y_hi
                and self.z_lo <= z <= self.z_hi)


MODE_PAPER = "paper"
MODE_OCCUPANCY = "occupancy"


@dataclass(frozen=True)
class OutlierDensity:
    """Outlier traffic on a cube grid (default 1 NM x 1 NM x 1000 ft).

    paper mode: flights-through-cube counts rescaled to max 1 (a relative
    index, not a probability).  occupancy mode: expected number of outlier
    aircraft present in each cube at a random instant.
    """

    region: Region
    step_xy: float
    step_z: float
    values: np.ndarray  # (nx, ny, nz)
    mode: str
    observation_time: float = 0.0  # s, occupancy mode only

    def __post_init__(self):
        if self.mode not in (MODE_PAPER, MODE_OCCUPANCY):
            raise InvalidInputError(f"unknown outlier density mode {self.mode!r}")
        if np.any(self.values < 0):
            raise InvalidInputError("outlier density values must be nonnegative")
        self.values.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


def _grid_shape(region: Region, step_xy: float, step_z: float) -> tuple[int, int, int]:
    nx = int(math.ceil((region.x_hi - region.x_lo) / step_xy - 1e-9))
    ny = int(math.ceil((region.y_hi - region.y_lo) / step_xy - 1e-9))
    nz = int(math.ceil((region.z_hi - region.z_lo) / step_z - 1e-9))
    return max(nx, 1), max(ny, 1), max(nz, 1)


def build_outlier_density(outlier_trajs: list[ResampledTrajectory], region: Region,
                          mode: str = MODE_OCCUPANCY, step_xy: float = 1.0,
                          step_z: float = 1000.0, observation_time: float | None = None,
                          interp_step_nm: float = 0.5) -> OutlierDensity:
    """Rasterize outlier trajectories onto the cube grid.

    Each trajectory is spatially interpolated at steps of at most
    interp_step_nm.  In paper mode each traversed cube counts once per flight
    and the grid is rescaled to max 1; in occupancy mode each cube accumulates
    the flight's dwell time there (constant ground speed along the path) and
    the grid is divided by the observation time.
    """
    nx, ny, nz = _grid_shape(region, step_xy, step_z)
    grid = np.zeros((nx, ny, nz))
    if mode == MODE_OCCUPANCY:
        if observation_time is None or observation_time <= 0:
            raise InvalidInputError("occupancy mode requires a positive observation_time")
    for traj in outlier_trajs:
        _rasterize(traj, region, step_xy, step_z, grid, mode, interp_step_nm)
    if mode == MODE_PAPER:
        peak = grid.max()
        if peak > 0:
            grid /= peak
        return OutlierDensity(region, step_xy, step_z, grid, mode)
    grid /= observation_time
    return OutlierDensity(region, step_xy, step_z, grid, mode, observation_time)


def _rasterize(traj: ResampledTrajectory, region: Region, step_xy: float, step_z: float,
               grid: np.ndarray, mode: str, interp_step_nm: float) -> None:
    pts = traj.points
    seg = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    arc = np.concatenate(([0.0], np.cumsum(seg)))
    total = arc[-1]
    if total <= 0:
        return
    n_seg = max(1, int(math.ceil(total / interp_step_nm)))
    edges = np.linspace(0.0, total, n_seg + 1)
    s = 0.5 * (edges[:-1] + edges[1:])  # segment midpoints
    ds = edges[1] - edges[0]
    xs = np.interp(s, arc, pts[:, 0])
    ys = np.interp(s, arc, pts[:, 1])
    zs = np.interp(s, arc, pts[:, 2])
    ix = np.floor((xs - region.x_lo) / step_xy).astype(int)
    iy = np.floor((ys - region.y_lo) / step_xy).astype(int)
    iz = np.floor((zs - region.z_lo) / step_z).astype(int)
    nx, ny, nz = grid.shape
    ok = ((ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny) & (iz >= 0) & (iz < nz))
    if not np.any(ok):
        return
    flat = (ix[ok] * ny + iy[ok]) * nz + iz[ok]
    if mode == MODE_PAPER:
        grid.reshape(-1)[np.unique(flat)] += 1.0
    else:
        duration = traj.exit_time - traj.entry_time
        speed_nm_s = total / duration if duration > 0 else 0.0
        if speed_nm_s <= 0:
            return
        dt = ds / speed_nm_s
        np.add.at(grid.reshape(-1), flat, dt)
