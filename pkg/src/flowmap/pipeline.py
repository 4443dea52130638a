"""End-to-end pipeline: trajectory file -> clusters -> fitted model bundle.

Every stage is deterministic for a fixed input file and configuration, so
rerunning the pipeline produces a byte-identical bundle.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math

import numpy as np

from . import __version__
from .arrivals import (OUTLIER_FLOW, chi2_exponential, chi2_poisson, estimate_arrival_rates,
                       pooled_inter_arrivals, proportion_rates)
from .clustering import OUTLIER, ClusterLabeling, ClusterParams, cluster_all
from .errors import DegenerateGeometryError, FormatError, InvalidInputError
from .flowmodel import (MODE_OCCUPANCY, Region, build_flow, build_outlier_density,
                        correlation_summary, lateral_vertical_correlation)
from .ingest import (CleaningThresholds, ResampledTrajectory, clean_trajectories,
                     parse_trajectory_file, resample)
from .model import ModelBundle

CONFIG_FORMAT = "flowmap-config"
CONFIG_VERSION = 1


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    origin_lat: float
    origin_lon: float
    resample_points: int = 8
    cleaning: CleaningThresholds = dataclasses.field(default_factory=CleaningThresholds)
    clustering: ClusterParams = dataclasses.field(default_factory=ClusterParams)
    tau_s: float = 900.0
    lateral_bin_nm: float = 0.5
    vertical_bin_ft: float = 200.0
    region: Region | None = None          # derived from the data when omitted
    outlier_mode: str = MODE_OCCUPANCY
    speed_mode: str = "constant-speed"

    def to_json(self) -> dict:
        doc = {
            "format": CONFIG_FORMAT,
            "version": CONFIG_VERSION,
            "origin_lat": self.origin_lat,
            "origin_lon": self.origin_lon,
            "resample_points": self.resample_points,
            "cleaning": dataclasses.asdict(self.cleaning),
            "clustering": dataclasses.asdict(self.clustering),
            "tau_s": self.tau_s,
            "lateral_bin_nm": self.lateral_bin_nm,
            "vertical_bin_ft": self.vertical_bin_ft,
            "region": None if self.region is None else
            [self.region.x_lo, self.region.x_hi, self.region.y_lo,
             self.region.y_hi, self.region.z_lo, self.region.z_hi],
            "outlier_mode": self.outlier_mode,
            "speed_mode": self.speed_mode,
        }
        return doc

    @staticmethod
    def from_json(doc: dict) -> "PipelineConfig":
        if doc.get("format", CONFIG_FORMAT) != CONFIG_FORMAT:
            raise FormatError(f"not a pipeline config: format={doc.get('format')!r}")
        known = {"format", "version", "origin_lat", "origin_lon", "resample_points",
                 "cleaning", "clustering", "tau_s", "lateral_bin_nm", "vertical_bin_ft",
                 "region", "outlier_mode", "speed_mode"}
        unknown = set(doc) - known
        if unknown:
            raise FormatError(f"unknown config keys: {sorted(unknown)}")
        region = doc.get("region")
        return PipelineConfig(
            origin_lat=float(doc["origin_lat"]),
            origin_lon=float(doc["origin_lon"]),
            resample_points=int(doc.get("resample_points", 8)),
            cleaning=CleaningThresholds(**doc.get("cleaning", {})),
            clustering=ClusterParams(**doc.get("clustering", {})),
            tau_s=float(doc.get("tau_s", 900.0)),
            lateral_bin_nm=float(doc.get("lateral_bin_nm", 0.5)),
            vertical_bin_ft=float(doc.get("vertical_bin_ft", 200.0)),
            region=None if region is None else Region(*(float(v) for v in region)),
            outlier_mode=doc.get("outlier_mode", MODE_OCCUPANCY),
            speed_mode=doc.get("speed_mode", "constant-speed"),
        )


def load_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return PipelineConfig.from_json(json.load(fh))


def derive_region(trajs: list[ResampledTrajectory], pad_nm: float = 10.0) -> Region:
    """Smallest 10 NM / 1000 ft aligned region containing all points."""
    pts = np.concatenate([t.points for t in trajs])
    x_lo = math.floor((pts[:, 0].min() - pad_nm) / 10.0) * 10.0
    x_hi = math.ceil((pts[:, 0].max() + pad_nm) / 10.0) * 10.0
    y_lo = math.floor((pts[:, 1].min() - pad_nm) / 10.0) * 10.0
    y_hi = math.ceil((pts[:, 1].max() + pad_nm) / 10.0) * 10.0
    z_lo = max(math.floor(pts[:, 2].min() / 1000.0) * 1000.0, 0.0)
    z_hi = math.ceil((pts[:, 2].max() + 1.0) / 1000.0) * 1000.0
    return Region(x_lo, x_hi, y_lo, y_hi, z_lo, z_hi)


@dataclasses.dataclass
class PipelineResult:
    bundle: ModelBundle
    report: str
    labeling: ClusterLabeling
    resampled: list[ResampledTrajectory]


def _corpus_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_pipeline(config: PipelineConfig, traj_path,
                 labeling: ClusterLabeling | None = None) -> PipelineResult:
    """Run ingest -> clustering -> model fitting and assemble the bundle.

    A precomputed labeling (aligned with the cleaned, resampled corpus in
    flight-id order) can be supplied to skip the clustering stage.
    """
    parsed = parse_trajectory_file(traj_path)
    clean, rejected = clean_trajectories(parsed.trajectories, config.cleaning)
    resampled = []
    for traj in clean:
        try:
            resampled.append(resample(traj, config.resample_points,
                                      config.origin_lat, config.origin_lon))
        except DegenerateGeometryError:
            rejected.append((traj, "degenerate"))
    if not resampled:
        raise InvalidInputError("no clean trajectories")

    if labeling is None:
        labeling = cluster_all(resampled, config.clustering)
    flow_ids = sorted(labeling.cluster_sizes)

    members = {fid: [resampled[i] for i in np.flatnonzero(labeling.labels == fid)]
               for fid in flow_ids}
    flows = [build_flow(members[fid], fid, lateral_bin=config.lateral_bin_nm,
                        vertical_bin=config.vertical_bin_ft) for fid in flow_ids]

    entries = [(t.entry_time, int(lab)) for t, lab in zip(resampled, labeling.labels)]
    schedule = estimate_arrival_rates(entries, config.tau_s)
    shares = proportion_rates(schedule, flow_ids)
    rate_share: dict[int, dict[str, float]] = {fid: {} for fid in flow_ids}
    for key, rs in shares.items():
        for fid, pi in rs.flows.items():
            if pi > 0:
                rate_share[fid][key] = pi
    flows = [dataclasses.replace(f, rate_share=rate_share[f.id]) for f in flows]

    region = config.region or derive_region(resampled)
    outlier_trajs = [resampled[i] for i in np.flatnonzero(labeling.labels == OUTLIER)]
    observation_time = schedule.n_days * 86400.0 if schedule.n_days else 1.0
    outlier_density = build_outlier_density(
        outlier_trajs, region, mode=config.outlier_mode,
        observation_time=observation_time if config.outlier_mode == MODE_OCCUPANCY else None)

    provenance = {
        "corpus_sha256": _corpus_hash(traj_path),
        "config": config.to_json(),
        "package_version": __version__,
        "n_trajectories_parsed": len(parsed.trajectories),
        "n_malformed_lines": parsed.malformed_lines,
        "n_clean": len(resampled),
        "n_rejected": len(rejected),
    }
    bundle = ModelBundle(flows=flows, schedule=schedule, outlier_density=outlier_density,
                         region=region, origin_lat=config.origin_lat,
                         origin_lon=config.origin_lon, provenance=provenance)
    report = _build_report(config, parsed, rejected, labeling, bundle, members)
    return PipelineResult(bundle, report, labeling, resampled)


def _build_report(config, parsed, rejected, labeling, bundle, members) -> str:
    lines = []
    lines.append("flowmap pipeline report")
    lines.append("=======================")
    lines.append(f"parsed flights:        {len(parsed.trajectories)}")
    lines.append(f"malformed lines:       {parsed.malformed_lines}")
    reasons: dict[str, int] = {}
    for _, reason in rejected:
        reasons[reason] = reasons.get(reason, 0) + 1
    lines.append(f"rejected flights:      {len(rejected)} {reasons if reasons else ''}".rstrip())
    lines.append(f"clean flights:         {labeling.labels.size}")
    lines.append(f"clusters (flows):      {labeling.n_clusters}")
    lines.append(f"outlier fraction:      {labeling.outlier_fraction:.4f}")
    lines.append("")
    lines.append("flows:")
    for flow in bundle.flows:
        cat = labeling.cluster_categories.get(flow.id)
        lines.append(f"  flow {flow.id}: members={flow.member_count} category={cat}"
                     f" speed=(mu={flow.speed.mu:.1f}kt sigma={flow.speed.sigma:.2f}"
                     f" nu={flow.speed.nu:.2f})")
    lines.append("")

    # decorrelation check: lateral vs vertical distributions at the windows
    corrs = []
    for flow in bundle.flows:
        try:
            c, flags = lateral_vertical_correlation(members[flow.id], flow)
            corrs.append(c[~flags])
        except Exception:
            pass
    if corrs:
        p90 = correlation_summary([c for c in corrs if c.size], 90.0)
        lines.append(f"lateral/vertical correlation |r| 90th percentile: {p90:.4f}")
    lines.append("")

    # chi-square summaries over populated bins
    exp_total = exp_reject = poi_total = poi_reject = 0
    for key, counts in sorted(bundle.schedule.bins.items()):
        wd, j = (int(v) for v in key.split("-"))
        lam_s = bundle.schedule.lam_per_s(wd, j)
        gaps = pooled_inter_arrivals(bundle.schedule, wd, j)
        if gaps.size >= 30 and lam_s > 0:
            res = chi2_exponential(gaps, lam_s)
            if res.conclusive:
                exp_total += 1
                exp_reject += int(res.reject)
        day_counts = bundle.schedule.per_day_counts(wd, j)
        if day_counts.size >= 3:
            res = chi2_poisson(day_counts, bundle.schedule.lam_tau(wd, j))
            if res.conclusive:
                poi_total += 1
                poi_reject += int(res.reject)
    if exp_total:
        lines.append(f"chi2 exponential: rejected {exp_reject}/{exp_total} populated bins")
    if poi_total:
        lines.append(f"chi2 poisson:     rejected {poi_reject}/{poi_total} populated bins")
    lines.append("")
    lines.append(f"region: {bundle.region}")
    lines.append(f"outlier density mode: {bundle.outlier_density.mode}")
    return "\n".join(lines) + "\n"
