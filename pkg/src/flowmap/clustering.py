"""Trajectory clustering: categorize by altitude/attitude, augment features,
normalize, project onto principal components, two-pass DBSCAN.

Categories are clustered independently.  Within a category the pipeline is
augment -> normalize -> PCA(5) -> DBSCAN, with a second, more discriminating
DBSCAN pass applied to oversized clusters.  Trajectories never assigned to a
cluster are outliers (label -1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, InvalidInputError
from .ingest import ResampledTrajectory

OUTLIER = -1

LEVEL = "level"
ASCENDING = "ascending"
DESCENDING = "descending"

ATTITUDE_ALT_CHANGE_FT = 2000.0


@dataclass(frozen=True, order=True)
class CategoryKey:
    """Hierarchical grouping key: attitude plus the rule's flight level.

    Level flights carry their cruise FL, climbs their destination FL,
    descents their initial FL.  FLs are multiples of 10 (1000 ft).
    """

    attitude: str
    flight_level: int

    def __post_init__(self):
        if self.attitude not in (LEVEL, ASCENDING, DESCENDING):
            raise InvalidInputError(f"unknown attitude {self.attitude!r}")
        if self.flight_level % 10 != 0:
            raise InvalidInputError(f"flight level {self.flight_level} not a multiple of 10")

    def __str__(self) -> str:
        return f"{self.attitude}-FL{self.flight_level}"


def categorize(traj: ResampledTrajectory) -> CategoryKey:
    """Attitude from net altitude change; FL from the attitude's reference altitude."""
    alts = traj.points[:, 2]
    net = alts[-1] - alts[0]
    if net >= ATTITUDE_ALT_CHANGE_FT:
        attitude, ref = ASCENDING, alts[-1]
    elif net <= -ATTITUDE_ALT_CHANGE_FT:
        attitude, ref = DESCENDING, alts[0]
    else:
        attitude, ref = LEVEL, float(np.mean(alts))
    return CategoryKey(attitude, int(round(ref / 1000.0)) * 10)


def augment_features(traj: ResampledTrajectory) -> np.ndarray:
    """Feature row: coordinates, per-segment heading (sin/cos), polar
    coordinates of each point about the airspace origin (r, sin/cos theta).

    Angles are encoded as sin/cos pairs to avoid wrap-around discontinuities.
    Headings use the East = 0 convention, counterclockwise positive.
    """
    pts = traj.points
    dx = np.diff(pts[:, 0])
    dy = np.diff(pts[:, 1])
    heading = np.arctan2(dy, dx)
    r = np.hypot(pts[:, 0], pts[:, 1])
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    return np.concatenate([
        pts[:, 0], pts[:, 1], pts[:, 2],
        np.sin(heading), np.cos(heading),
        r, np.sin(theta), np.cos(theta),
    ])


@dataclass
class FeatureMatrix:
    """Normalized feature matrix with the stats used for normalization."""

    values: np.ndarray        # (rows, kept columns), mean 0 / std 1 per column
    column_means: np.ndarray  # over kept columns
    column_stds: np.ndarray
    kept_columns: np.ndarray  # indices into the raw feature row


def normalize_features(raw: np.ndarray) -> FeatureMatrix:
    """Standardize each column; constant (zero-variance) columns are dropped."""
    raw = np.asarray(raw, dtype=float)
    means = raw.mean(axis=0)
    stds = raw.std(axis=0)
    kept = np.flatnonzero(stds > 1e-12)
    if kept.size == 0:
        raise InsufficientDataError("all feature columns are constant")
    values = (raw[:, kept] - means[kept]) / stds[kept]
    return FeatureMatrix(values, means[kept], stds[kept], kept)


def pca_project(matrix: FeatureMatrix, n_components: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Project rows onto the top principal components of the sample covariance.

    Returns (projections, eigenvalues) with eigenvalues sorted descending.
    Component signs are fixed so each eigenvector's largest-magnitude entry is
    positive, making results reproducible.
    """
    x = matrix.values
    n, d = x.shape
    if n < n_components:
        raise InsufficientDataError(f"{n} rows < {n_components} components")
    cov = (x.T @ x) / (n - 1) if n > 1 else np.zeros((d, d))
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_components]
    vals = eigvals[order]
    vecs = eigvecs[:, order]
    flip = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(vecs.shape[1])])
    flip[flip == 0] = 1.0
    vecs = vecs * flip
    return x @ vecs, vals


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """DBSCAN with deterministic ascending-index expansion order.

    Core points have at least min_pts neighbors within eps (self included).
    Non-reachable points are labeled OUTLIER (-1).
    """
    if eps <= 0:
        raise InvalidInputError("eps must be positive")
    if min_pts < 2:
        raise InvalidInputError("min_pts must be at least 2")
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    labels = np.full(n, OUTLIER, dtype=int)
    visited = np.zeros(n, dtype=bool)
    neighbors = _neighbor_lists(pts, eps)
    cluster = 0
    for i in range(n):
        if visited[i]:
            continue
        visited[i] = True
        seeds = neighbors[i]
        if seeds.size < min_pts:
            continue
        labels[i] = cluster
        queue = list(seeds)
        qi = 0
        while qi < len(queue):
            j = queue[qi]
            qi += 1
            if labels[j] == OUTLIER:
                labels[j] = cluster
            if not visited[j]:
                visited[j] = True
                labels[j] = cluster
                nb = neighbors[j]
                if nb.size >= min_pts:
                    queue.extend(nb)
        cluster += 1
    return labels


def _neighbor_lists(pts: np.ndarray, eps: float, chunk: int = 512) -> list[np.ndarray]:
    """Ascending-index neighbor lists within eps (self included)."""
    n = len(pts)
    eps2 = eps * eps
    out: list[np.ndarray] = []
    for start in range(0, n, chunk):
        block = pts[start:start + chunk]
        d2 = ((block[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        for row in d2:
            out.append(np.flatnonzero(row <= eps2))
    return out


@dataclass(frozen=True)
class ClusterParams:
    """Knobs for the per-category clustering pipeline.

    eps values are distances in the whitened projection space (each principal
    component scaled to unit variance), so one default works across corpora.
    """

    eps: float = 1.5
    min_pts: int = 10
    second_pass_size_threshold: int = 200
    second_pass_eps: float = 0.75
    n_components: int = 5

    def __post_init__(self):
        if self.eps <= 0 or self.min_pts < 2:
            raise InvalidInputError("eps must be > 0 and min_pts >= 2")
        if self.second_pass_eps >= self.eps:
            raise InvalidInputError("second-pass eps must be below the first-pass eps")


def cluster_category(trajs: list[ResampledTrajectory], params: ClusterParams | None = None
                     ) -> np.ndarray:
    """Cluster one category's trajectories; returns per-trajectory labels.

    Pipeline: augment -> normalize -> PCA -> DBSCAN, then oversized clusters
    are re-clustered with the tighter second-pass eps on their own members.
    Categories smaller than min_pts (or too small for the PCA) are all
    outliers, which is a valid result.
    """
    p = params or ClusterParams()
    n = len(trajs)
    if n < max(p.min_pts, p.n_components):
        return np.full(n, OUTLIER, dtype=int)
    raw = np.array([augment_features(t) for t in trajs])
    proj, eigvals = pca_project(normalize_features(raw), p.n_components)
    # whiten the informative components so eps is corpus-independent; a
    # component carrying less than one standardized feature's variance
    # (eigenvalue < 1) is within-cluster noise and contributes no distance
    scale = np.sqrt(np.maximum(eigvals, 1e-12))
    white = np.where(eigvals >= 1.0, proj / scale, 0.0)
    labels = dbscan(white, p.eps, p.min_pts)
    labels = _second_pass(white, labels, p)
    return _renumber(labels)


def _second_pass(proj: np.ndarray, labels: np.ndarray, p: ClusterParams) -> np.ndarray:
    out = labels.copy()
    next_id = labels.max() + 1 if labels.max() >= 0 else 0
    for cid in np.unique(labels[labels >= 0]):
        members = np.flatnonzero(labels == cid)
        if members.size <= p.second_pass_size_threshold:
            continue
        sub = dbscan(proj[members], p.second_pass_eps, p.min_pts)
        out[members] = np.where(sub == OUTLIER, OUTLIER, sub + next_id)
        if sub.max() >= 0:
            next_id += sub.max() + 1
    return out


def _renumber(labels: np.ndarray) -> np.ndarray:
    """Renumber cluster ids densely in order of first appearance."""
    out = labels.copy()
    mapping: dict[int, int] = {}
    for i, lab in enumerate(labels):
        if lab == OUTLIER:
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


@dataclass
class ClusterLabeling:
    """Corpus-wide assignment: global flow id per trajectory or OUTLIER."""

    labels: np.ndarray                      # per trajectory, aligned with input order
    categories: list[CategoryKey]           # per trajectory
    cluster_sizes: dict[int, int] = field(default_factory=dict)
    cluster_categories: dict[int, CategoryKey] = field(default_factory=dict)

    @property
    def n_clusters(self) -> int:
        return len(self.cluster_sizes)

    @property
    def outlier_fraction(self) -> float:
        return float(np.mean(self.labels == OUTLIER)) if self.labels.size else 0.0


def cluster_all(trajs: list[ResampledTrajectory], params: ClusterParams | None = None
                ) -> ClusterLabeling:
    """Categorize and cluster the whole corpus; flow ids are globally unique,
    assigned in sorted category order."""
    categories = [categorize(t) for t in trajs]
    labels = np.full(len(trajs), OUTLIER, dtype=int)
    sizes: dict[int, int] = {}
    cluster_cats: dict[int, CategoryKey] = {}
    next_id = 0
    by_cat: dict[CategoryKey, list[int]] = {}
    for idx, cat in enumerate(categories):
        by_cat.setdefault(cat, []).append(idx)
    for cat in sorted(by_cat):
        idxs = by_cat[cat]
        local = cluster_category([trajs[i] for i in idxs], params)
        for offset, lab in zip(idxs, local):
            if lab != OUTLIER:
                labels[offset] = next_id + lab
        for lab in np.unique(local[local >= 0]):
            gid = next_id + int(lab)
            sizes[gid] = int(np.sum(local == lab))
            cluster_cats[gid] = cat
        if local.max() >= 0:
            next_id += int(local.max()) + 1
    return ClusterLabeling(labels, categories, sizes, cluster_cats)


def export_labels(path, trajs: list[ResampledTrajectory], labeling: ClusterLabeling) -> None:
    """Write the labeling as `flight_id,category,cluster_id` (outliers as -1)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("flight_id,category,cluster_id\n")
        for traj, cat, lab in zip(trajs, labeling.categories, labeling.labels):
            fh.write(f"{traj.flight_id},{cat},{int(lab)}\n")
