"""Proximity probabilities: inter-aircraft distances, residual distances, and
the presence / conflict / outlier point probabilities behind the 3D maps.

The longitudinal position of traffic in a flow is a stationary renewal
process with inter-aircraft distance density f_dd.  The distance from an
observation point to the next aircraft (the "residual distance") then has
density (1 - F_dd(r)) / mean_dd, the renewal residual-life law; downstream
aircraft add one convolution with f_dd each.  Presence inside a proximity
volume factors into independent along-track, lateral and vertical integrals,
evaluated over the intersection of the flow box with the circumscribing box
of the proximity cylinder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .density import (DEFAULT_DISTANCE_STEP_NM, DEFAULT_SPEED_STEP_KT, DiscretePdf,
                      exponential_pdf, normalized_pdf, pdf_convolve, pdf_integrate,
                      pdf_mix, truncate_tails)
from .errors import InvalidInputError
from .flowmodel import (MODE_OCCUPANCY, MODE_PAPER, Flow, OutlierDensity, Region,
                        TLocationScale)
from .geometry import (DEFAULT_PROX_HALF_LATERAL_NM, DEFAULT_PROX_HALF_VERTICAL_FT,
                       FT_PER_NM, BoxExtents, PointENU, ProximityBox, intersect_box)

KT_TO_NM_PER_S = 1.0 / 3600.0

MODE_CONSTANT_SPEED = "constant-speed"
MODE_PRODUCT = "product"

KIND_PRESENCE = "presence"
KIND_CONFLICT = "conflict"
KIND_OUTLIER = "outlier"
MAP_KINDS = (KIND_PRESENCE, KIND_CONFLICT, KIND_OUTLIER)


@dataclass(frozen=True)
class FlowDistanceModel:
    """Along-track spacing model of one flow: inter-aircraft distance density,
    its mean, and the first residual-distance density."""

    flow_id: int
    inter_distance: DiscretePdf | None
    mean_inter_distance: float
    residual_first: DiscretePdf | None

    @property
    def no_traffic(self) -> bool:
        return self.inter_distance is None


def inter_aircraft_pdf(speed: TLocationScale, lam_per_s: float,
                       mode: str = MODE_CONSTANT_SPEED,
                       step: float = DEFAULT_DISTANCE_STEP_NM,
                       flow_id: int = 0, v_hat: float | None = None) -> FlowDistanceModel:
    """Distance density between consecutive aircraft of a flow with arrival
    rate lam_per_s (1/s) and the given speed model.

    constant-speed mode: all aircraft at v_hat (default: the location
    parameter of the speed model), so the distance is exponential with mean
    v_hat / lam.  product mode: distance = speed x inter-arrival time with the
    two independent, evaluated by quadrature over the speed support.
    """
    if lam_per_s < 0:
        raise InvalidInputError("arrival rate must be nonnegative")
    if lam_per_s == 0.0:
        return FlowDistanceModel(flow_id, None, math.inf, None)
    if mode == MODE_CONSTANT_SPEED:
        v = (v_hat if v_hat is not None else speed.mu) * KT_TO_NM_PER_S
        if v <= 0:
            raise InvalidInputError("speed estimate must be positive")
        mean_d = v / lam_per_s
        inter = exponential_pdf(mean_d, step)
    elif mode == MODE_PRODUCT:
        inter = _product_distance_pdf(speed, lam_per_s, step)
    else:
        raise InvalidInputError(f"unknown inter-aircraft mode {mode!r}")
    model = FlowDistanceModel(flow_id, inter, inter.mean(), None)
    residual = residual_pdf_first(model)
    return FlowDistanceModel(flow_id, inter, model.mean_inter_distance, residual)


def _product_distance_pdf(speed: TLocationScale, lam_per_s: float, step: float) -> DiscretePdf:
    """f_dd(d) = integral of f_V(v) * f_dt(d/v) / v dv, f_dt exponential."""
    v_lo = max(speed.quantile(1e-6), 1.0) * KT_TO_NM_PER_S
    v_hi = max(speed.quantile(1.0 - 1e-6), 2.0) * KT_TO_NM_PER_S
    n_v = max(200, int(math.ceil((v_hi - v_lo) / (DEFAULT_SPEED_STEP_KT * KT_TO_NM_PER_S))))
    n_v = min(n_v, 2000)
    vs = np.linspace(v_lo, v_hi, n_v)
    w = speed.pdf(vs / KT_TO_NM_PER_S) / KT_TO_NM_PER_S  # density per NM/s
    w /= np.trapezoid(w, vs)
    d_hi = -math.log(1e-9) * v_hi / lam_per_s
    n_d = int(math.ceil(d_hi / step)) + 1
    ds = step * np.arange(n_d)
    # f(d) = sum_v w(v) * lam/v * exp(-lam d / v)
    rate_v = lam_per_s / vs
    dens = np.trapezoid(w[None, :] * rate_v[None, :] * np.exp(-np.outer(ds, rate_v)), vs, axis=1)
    return truncate_tails(normalized_pdf(0.0, step, dens), 1e-9)


def residual_pdf_first(model: FlowDistanceModel) -> DiscretePdf:
    """First residual-distance density (1 - F_dd(r)) / mean_dd on the
    inter-distance grid extended to start at 0."""
    inter = model.inter_distance
    if inter is None:
        raise InvalidInputError("no-traffic model has no residual distance")
    if model.mean_inter_distance <= 0:
        raise InvalidInputError("mean inter-aircraft distance must be positive")
    hi = inter.support[1]
    n = int(math.ceil(hi / inter.step)) + 1
    rs = inter.step * np.arange(n)
    raw = (1.0 - inter.cdf(rs)) / model.mean_inter_distance
    return normalized_pdf(0.0, inter.step, raw)


def residual_pdf_k(model: FlowDistanceModel, k: int) -> DiscretePdf:
    """Residual-distance density of the k-th next aircraft: the first residual
    convolved k-1 times with the inter-aircraft distance."""
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if model.residual_first is not None:
        out = model.residual_first
    else:
        out = residual_pdf_first(model)
    for _ in range(k - 1):
        out = pdf_convolve(out, model.inter_distance)
    return out


def interp_window_density(f_k: DiscretePdf, f_k1: DiscretePdf, s: float) -> DiscretePdf:
    """Density between two windows at along-box fraction s: the renormalized
    pointwise mixture (1-s) f_k + s f_k1."""
    return pdf_mix(f_k, f_k1, s)


def _flow_box_extents(flow: Flow, k: int) -> BoxExtents:
    """Axis-aligned hull of windows k and k+1 in the frame of window k."""
    wk, wk1 = flow.windows[k], flow.windows[k + 1]
    return BoxExtents(
        0.0, flow.box_length(k),
        min(wk.lateral_extent[0], wk1.lateral_extent[0]),
        max(wk.lateral_extent[1], wk1.lateral_extent[1]),
        min(wk.vertical_extent[0], wk1.vertical_extent[0]),
        max(wk.vertical_extent[1], wk1.vertical_extent[1]),
    )


def p1_box(p: PointENU, flow: Flow, k: int, dist: FlowDistanceModel,
           half_lateral: float = DEFAULT_PROX_HALF_LATERAL_NM,
           half_vertical: float = DEFAULT_PROX_HALF_VERTICAL_FT) -> float:
    """Probability that at least one aircraft of box k of the flow is inside
    the proximity box centered at p.

    Product of three independent factors over the intersection volume: the
    first-residual CDF at the along-track extent length, and the integrals of
    the window densities (linearly interpolated at the entry point between
    windows k and k+1) over the lateral and vertical extents.
    """
    if dist.no_traffic:
        return 0.0
    frame = flow.windows[k].frame
    prox = ProximityBox(p, frame, half_lateral, half_vertical)
    inter = intersect_box(_flow_box_extents(flow, k), prox, frame)
    if inter.empty:
        return 0.0
    length = flow.box_length(k)
    s = min(max(inter.along_lo / length, 0.0), 1.0)
    wk, wk1 = flow.windows[k], flow.windows[k + 1]
    lat = ((1.0 - s) * pdf_integrate(wk.lateral_density, inter.lat_lo, inter.lat_hi)
           + s * pdf_integrate(wk1.lateral_density, inter.lat_lo, inter.lat_hi))
    vert = ((1.0 - s) * pdf_integrate(wk.vertical_density, inter.vert_lo, inter.vert_hi)
            + s * pdf_integrate(wk1.vertical_density, inter.vert_lo, inter.vert_hi))
    along = float(dist.residual_first.cdf(inter.along_length))
    return max(along * lat * vert, 0.0)


def p1_flow(p: PointENU, flow: Flow, dist: FlowDistanceModel,
            half_lateral: float = DEFAULT_PROX_HALF_LATERAL_NM,
            half_vertical: float = DEFAULT_PROX_HALF_VERTICAL_FT) -> float:
    """Probability of at least one aircraft of the flow near p, combining the
    boxes overlapping the proximity volume as independent contributions:
    1 - prod_k (1 - p1_box)."""
    if dist.no_traffic:
        return 0.0
    q = 1.0
    for k in range(flow.n_points - 1):
        q *= 1.0 - p1_box(p, flow, k, dist, half_lateral, half_vertical)
    return min(max(1.0 - q, 0.0), 1.0)


def flow_presences(p: PointENU, flows, dists,
                   half_lateral: float = DEFAULT_PROX_HALF_LATERAL_NM,
                   half_vertical: float = DEFAULT_PROX_HALF_VERTICAL_FT) -> np.ndarray:
    return np.array([p1_flow(p, f, d, half_lateral, half_vertical)
                     for f, d in zip(flows, dists)])


def p1_point(p: PointENU, flows, dists,
             half_lateral: float = DEFAULT_PROX_HALF_LATERAL_NM,
             half_vertical: float = DEFAULT_PROX_HALF_VERTICAL_FT) -> float:
    """Probability of at least one aircraft from any of N independent flows:
    1 - prod_i (1 - P1(p, flow_i))."""
    return combine_p1(flow_presences(p, flows, dists, half_lateral, half_vertical))


def combine_p1(presences: np.ndarray) -> float:
    q = 1.0
    for v in presences:
        q *= 1.0 - v
    return min(max(1.0 - q, 0.0), 1.0)


def combine_p2(presences: np.ndarray) -> float:
    """P2 = P1 - sum_i p_i prod_{j != i} (1 - p_j), clipped to [0, P1]."""
    p1 = combine_p1(presences)
    single = 0.0
    for i, v in enumerate(presences):
        prod = 1.0
        for j, w in enumerate(presences):
            if j != i:
                prod *= 1.0 - w
        single += v * prod
    return min(max(p1 - single, 0.0), p1)


def p2_point(p: PointENU, flows, dists,
             half_lateral: float = DEFAULT_PROX_HALF_LATERAL_NM,
             half_vertical: float = DEFAULT_PROX_HALF_VERTICAL_FT) -> float:
    """Probability of aircraft from at least two distinct flows near p."""
    if len(flows) == 0:
        raise InvalidInputError("p2 needs at least one flow")
    return combine_p2(flow_presences(p, flows, dists, half_lateral, half_vertical))


def outlier_region_factor(f_o: OutlierDensity, p: PointENU,
                          half_lateral: float = DEFAULT_PROX_HALF_LATERAL_NM,
                          half_vertical: float = DEFAULT_PROX_HALF_VERTICAL_FT) -> float:
    """Outlier weight of the proximity region around p.

    occupancy mode: expected number of outliers present in the region, capped
    at 1 (a probability bound).  paper mode: the grid integral divided by
    a_p^2 b_p, a relative index.  Points outside the grid yield 0.
    """
    r = f_o.region
    if not r.contains(p.x, p.y, p.z):
        return 0.0
    nx, ny, nz = f_o.shape
    x_lo, x_hi = p.x - half_lateral, p.x + half_lateral
    y_lo, y_hi = p.y - half_lateral, p.y + half_lateral
    z_lo, z_hi = p.z - half_vertical, p.z + half_vertical

    def overlaps(lo, hi, origin, step, n):
        i0 = max(int(math.floor((lo - origin) / step)), 0)
        i1 = min(int(math.floor((hi - origin) / step - 1e-12)), n - 1)
        out = []
        for i in range(i0, i1 + 1):
            c_lo = origin + i * step
            seg = min(hi, c_lo + step) - max(lo, c_lo)
            if seg > 0:
                out.append((i, seg))
        return out

    ox = overlaps(x_lo, x_hi, r.x_lo, f_o.step_xy, nx)
    oy = overlaps(y_lo, y_hi, r.y_lo, f_o.step_xy, ny)
    oz = overlaps(z_lo, z_hi, r.z_lo, f_o.step_z, nz)
    total = 0.0
    for ix, wx in ox:
        for iy, wy in oy:
            for iz, wz in oz:
                if f_o.mode == MODE_OCCUPANCY:
                    frac = (wx / f_o.step_xy) * (wy / f_o.step_xy) * (wz / f_o.step_z)
                    total += f_o.values[ix, iy, iz] * frac
                else:
                    vol = wx * wy * (wz / FT_PER_NM)
                    total += f_o.values[ix, iy, iz] * vol
    if f_o.mode == MODE_OCCUPANCY:
        return min(total, 1.0)
    return total / (half_lateral ** 2 * (half_vertical / FT_PER_NM))


def po_point(p: PointENU, flows, dists, f_o: OutlierDensity,
             half_lateral: float = DEFAULT_PROX_HALF_LATERAL_NM,
             half_vertical: float = DEFAULT_PROX_HALF_VERTICAL_FT) -> float:
    """Flow presence times the outlier weight of the proximity region.

    A probability in occupancy mode; a relative index in paper mode.
    """
    base = p1_point(p, flows, dists, half_lateral, half_vertical)
    if base == 0.0:
        return 0.0
    return base * outlier_region_factor(f_o, p, half_lateral, half_vertical)


# ---------------------------------------------------------------------------
# Map generation over a lattice (hot path, delegated to the kernel backend)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MapGrid:
    """3D lattice of probabilities over a region.

    values has shape (nx, ny, nz) for lattice points origin + i*step along
    each axis (bounds inclusive).
    """

    kind: str
    region: Region
    steps: tuple[float, float, float]
    values: np.ndarray
    time_bin: tuple[int, int]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values.setflags(write=False)

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return lattice_axes(self.region, self.steps)


def lattice_axes(region: Region, steps) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    dx, dy, dz = steps
    xs = region.x_lo + dx * np.arange(int(math.floor((region.x_hi - region.x_lo) / dx + 1e-9)) + 1)
    ys = region.y_lo + dy * np.arange(int(math.floor((region.y_hi - region.y_lo) / dy + 1e-9)) + 1)
    zs = region.z_lo + dz * np.arange(int(math.floor((region.z_hi - region.z_lo) / dz + 1e-9)) + 1)
    return xs, ys, zs


def build_flow_tables(flow: Flow, dist: FlowDistanceModel) -> kernels.FlowTables | None:
    """Precompute the per-flow arrays consumed by the presence kernel."""
    if dist.no_traffic:
        return None
    l = flow.n_points
    boxes = np.empty((l - 1, 11))
    for k in range(l - 1):
        frame = flow.windows[k].frame
        ext = _flow_box_extents(flow, k)
        boxes[k] = [
            flow.track[k, 0], flow.track[k, 1],
            frame.longitudinal[0], frame.longitudinal[1],
            frame.lateral[0], frame.lateral[1],
            flow.box_length(k),
            ext.lat_lo, ext.lat_hi, ext.vert_lo, ext.vert_hi,
        ]

    def cdf_table(pdfs):
        values, offsets, origins, inv_steps = [], [0], [], []
        for pdf in pdfs:
            cv = pdf.cdf_values()
            cv = cv / cv[-1]
            values.append(cv)
            offsets.append(offsets[-1] + cv.size)
            origins.append(pdf.origin)
            inv_steps.append(1.0 / pdf.step)
        return (np.concatenate(values), np.array(offsets, dtype=np.int64),
                np.array(origins), np.array(inv_steps))

    lat_cdf, lat_off, lat_orig, lat_inv = cdf_table([w.lateral_density for w in flow.windows])
    vert_cdf, vert_off, vert_orig, vert_inv = cdf_table([w.vertical_density for w in flow.windows])
    r = dist.residual_first
    r_cdf = r.cdf_values()
    r_cdf = r_cdf / r_cdf[-1]
    return kernels.FlowTables(boxes, lat_cdf, lat_off, lat_orig, lat_inv,
                              vert_cdf, vert_off, vert_orig, vert_inv,
                              r_cdf, r.origin, 1.0 / r.step)


def evaluate_flow_presence_grid(tables, xs: np.ndarray, ys: np.ndarray, zs: np.ndarray,
                                half_lateral: float, half_vertical: float,
                                workers: int = 1) -> list[np.ndarray]:
    """Per-flow presence probability arrays of shape (nx*ny, nz) over the
    lattice, evaluated by the active kernel backend.

    All arithmetic is elementwise per lattice point, so chunking the points
    across workers cannot change any value.
    """
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    px = gx.reshape(-1)
    py = gy.reshape(-1)
    n = px.size
    outs = [np.ones((n, zs.size)) for _ in tables]
    if workers <= 1:
        chunks = [(0, n)]
    else:
        bounds = np.linspace(0, n, workers * 4 + 1).astype(int)
        chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    def run(chunk):
        a, b = chunk
        for t, out in zip(tables, outs):
            kernels.flow_presence(px[a:b], py[a:b], zs, t, half_lateral, half_vertical,
                                  out[a:b])

    if workers <= 1:
        for c in chunks:
            run(c)
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(run, chunks))
    for out in outs:
        np.subtract(1.0, out, out=out)
    return outs


def generate_map(bundle, region: Region | None = None,
                 steps: tuple[float, float, float] = (1.0, 1.0, 1000.0),
                 kind: str = KIND_PRESENCE, time_bin: tuple[int, int] = (0, 0),
                 overrides=None, mode: str = MODE_CONSTANT_SPEED,
                 workers: int = 1) -> MapGrid:
    """Evaluate one proximity map over the lattice of a region.

    Flow rates are lambda_i^j = pi_i^j * lambda^j for the requested
    (weekday, bin), with overrides (rate scaling, flow removal, outlier
    density injection, proximity resizing) applied before evaluation.
    The result is deterministic and independent of the worker count.
    """
    from .model import WhatIfOverrides

    if kind not in MAP_KINDS:
        raise InvalidInputError(f"unknown map kind {kind!r}; valid: {MAP_KINDS}")
    ov = overrides or WhatIfOverrides()
    ov.validate_flow_ids(bundle)
    region = region or bundle.region
    half_lat = ov.half_lateral if ov.half_lateral is not None else DEFAULT_PROX_HALF_LATERAL_NM
    half_vert = ov.half_vertical if ov.half_vertical is not None else DEFAULT_PROX_HALF_VERTICAL_FT
    weekday, j = time_bin
    if not (0 <= weekday <= 6 and 0 <= j < bundle.schedule.bins_per_day):
        raise InvalidInputError(
            f"invalid time bin {time_bin}; weekday 0-6, bin 0-{bundle.schedule.bins_per_day - 1}")

    xs, ys, zs = lattice_axes(region, steps)
    shape = (xs.size, ys.size, zs.size)
    tables = []
    for flow in bundle.flows:
        if flow.id in ov.removed_flows:
            continue
        lam = bundle.flow_rate_per_s(flow, weekday, j) * ov.rate_scale.get(flow.id, 1.0)
        if lam <= 0:
            continue
        dist = inter_aircraft_pdf(flow.speed, lam, mode=mode, flow_id=flow.id)
        t = build_flow_tables(flow, dist)
        if t is not None:
            tables.append(t)

    meta = {"kind": kind, "mode": mode, "half_lateral": half_lat, "half_vertical": half_vert,
            "n_flows_active": len(tables), "workers_used": workers}
    if not tables:
        values = np.zeros(shape)
        if kind == KIND_OUTLIER:
            meta["outlier_mode"] = None
        return MapGrid(kind, region, steps, values, time_bin, meta)

    presences = evaluate_flow_presence_grid(tables, xs, ys, zs, half_lat, half_vert,
                                            workers=workers)
    stack = np.stack(presences)                      # (nf, nxy, nz)
    one_minus = 1.0 - stack
    q = np.ones_like(stack[0])
    for layer in one_minus:
        q = q * layer
    p1 = 1.0 - q

    if kind == KIND_PRESENCE:
        flat = p1
    elif kind == KIND_CONFLICT:
        single = np.zeros_like(p1)
        for i in range(len(stack)):
            prod = np.ones_like(p1)
            for jdx in range(len(stack)):
                if jdx != i:
                    prod = prod * one_minus[jdx]
            single = single + stack[i] * prod
        flat = np.minimum(np.maximum(p1 - single, 0.0), p1)
    else:
        f_o = ov.outlier_density if ov.outlier_density is not None else bundle.outlier_density
        if f_o is None:
            raise InvalidInputError("outlier map requested but the model has no outlier density")
        meta["outlier_mode"] = f_o.mode
        meta["probabilistic"] = f_o.mode == MODE_OCCUPANCY
        factors = _outlier_factor_grid(f_o, xs, ys, zs, half_lat, half_vert)
        flat = p1 * factors

    overshoot = int(np.sum(flat > 1.0 + 1e-9))
    if kind != KIND_OUTLIER or meta.get("probabilistic", True):
        flat = np.clip(flat, 0.0, 1.0)
    meta["clip_overshoots"] = overshoot
    return MapGrid(kind, region, steps, flat.reshape(shape), time_bin, meta)


def _outlier_factor_grid(f_o: OutlierDensity, xs, ys, zs,
                         half_lateral: float, half_vertical: float) -> np.ndarray:
    """Outlier region factor at every lattice point, shape (nx*ny, nz)."""
    out = np.empty((xs.size * ys.size, zs.size))
    i = 0
    for x in xs:
        for y in ys:
            for iz, z in enumerate(zs):
                if f_o.region.contains(float(x), float(y), float(z)):
                    out[i, iz] = outlier_region_factor(
                        f_o, PointENU(float(x), float(y), float(z)),
                        half_lateral, half_vertical)
                else:
                    out[i, iz] = 0.0
            i += 1
    return out
