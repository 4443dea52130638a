"""Shared test factories and independent oracle implementations."""

from __future__ import annotations

import math

import numpy as np

from flowmap.density import pdf_from_samples
from flowmap.flowmodel import Flow, TLocationScale, Window, _window_frame


def straight_flow(flow_id: int, start, end, alt_ft: float, lateral_std: float,
                  vertical_std: float, rng=None, n_members: int = 400, l: int = 8,
                  speed: TLocationScale | None = None) -> Flow:
    """Flow with a straight track and Gaussian-sampled window densities."""
    rng = rng or np.random.default_rng(12345)
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    track2 = np.linspace(0.0, 1.0, l)[:, None] * (end - start)[None, :] + start[None, :]
    track = np.column_stack([track2, np.full(l, alt_ft)])
    lat_samples = rng.normal(0.0, lateral_std, n_members) if lateral_std > 0 else np.zeros(n_members)
    vert_samples = alt_ft + (rng.normal(0.0, vertical_std, n_members)
                             if vertical_std > 0 else np.zeros(n_members))
    windows = []
    for k in range(l):
        lat_pdf = pdf_from_samples(lat_samples, 0.5)
        vert_pdf = pdf_from_samples(vert_samples, 200.0)
        windows.append(Window(_window_frame(track, k), lat_pdf.support, vert_pdf.support,
                              lat_pdf, vert_pdf))
    return Flow(flow_id, track, tuple(windows), speed or TLocationScale(450.0, 15.0, 5.0),
                n_members)


def dbscan_oracle(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Textbook O(n^2) DBSCAN, ascending-index visit order, loop-based."""
    n = len(points)
    UNVISITED, NOISE = 0, -1
    labels = [UNVISITED] * n
    cluster = 0

    def region_query(i):
        out = []
        for j in range(n):
            d = 0.0
            for a, b in zip(points[i], points[j]):
                d += (a - b) ** 2
            if d <= eps * eps:
                out.append(j)
        return out

    for i in range(n):
        if labels[i] != UNVISITED:
            continue
        neighbors = region_query(i)
        if len(neighbors) < min_pts:
            labels[i] = NOISE
            continue
        cluster += 1
        labels[i] = cluster
        queue = list(neighbors)
        qi = 0
        while qi < len(queue):
            j = queue[qi]
            qi += 1
            if labels[j] == NOISE:
                labels[j] = cluster
            if labels[j] == UNVISITED:
                labels[j] = cluster
                nb = region_query(j)
                if len(nb) >= min_pts:
                    queue.extend(nb)
    return np.array([lab - 1 if lab > 0 else -1 for lab in labels])


def adjusted_rand_index(a, b) -> float:
    """ARI from the contingency table (comb2 formulation)."""
    a = np.asarray(a)
    b = np.asarray(b)
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ua.size, ub.size), dtype=np.int64)
    for x, y in zip(ia, ib):
        table[x, y] += 1

    def comb2(v):
        return v * (v - 1) // 2

    sum_cells = sum(comb2(int(v)) for v in table.reshape(-1))
    sum_rows = sum(comb2(int(v)) for v in table.sum(axis=1))
    sum_cols = sum(comb2(int(v)) for v in table.sum(axis=0))
    total = comb2(int(a.size))
    expected = sum_rows * sum_cols / total if total else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return (sum_cells - expected) / (max_index - expected)


def haversine_nm(lat1, lon1, lat2, lon2) -> float:
    """Independent great-circle oracle (sphere with 60 NM per degree)."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dphi = p2 - p1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlmb / 2) ** 2
    return 2 * math.asin(math.sqrt(a)) * 180.0 / math.pi * 60.0
