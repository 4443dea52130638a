"""The assembled generative traffic model and what-if overrides."""

from __future__ import annotations

from dataclasses import dataclass, field

from .arrivals import RateSchedule, bin_key
from .errors import InvalidInputError
from .flowmodel import Flow, OutlierDensity, Region

BUNDLE_VERSION = 1


@dataclass
class ModelBundle:
    """Everything needed to compute proximity maps: flows with their traffic
    models, the airspace rate schedule, the outlier density, and provenance."""

    flows: list[Flow]
    schedule: RateSchedule
    outlier_density: OutlierDensity | None
    region: Region
    origin_lat: float
    origin_lon: float
    provenance: dict = field(default_factory=dict)
    version: int = BUNDLE_VERSION

    def __post_init__(self):
        ids = [f.id for f in self.flows]
        if len(ids) != len(set(ids)):
            raise InvalidInputError("flow ids must be unique")

    @property
    def n_flows(self) -> int:
        return len(self.flows)

    def flow_by_id(self, flow_id: int) -> Flow:
        for f in self.flows:
            if f.id == flow_id:
                return f
        raise InvalidInputError(f"unknown flow id {flow_id}; valid: {[f.id for f in self.flows]}")

    def flow_rate_per_s(self, flow: Flow, weekday: int, j: int) -> float:
        """lambda_i^j = pi_i^j * lambda^j, in arrivals per second."""
        share = flow.rate_share.get(bin_key(weekday, j), 0.0)
        return share * self.schedule.lam_per_s(weekday, j)

    def available_bins(self) -> list[str]:
        """Bin keys with nonzero traffic, sorted."""
        return sorted((k for k, c in self.schedule.bins.items() if c.total > 0),
                      key=lambda k: (int(k.split("-")[0]), int(k.split("-")[1])))


@dataclass(frozen=True)
class WhatIfOverrides:
    """Parameter adjustments applied before map evaluation."""

    rate_scale: dict = field(default_factory=dict)      # flow id -> factor >= 0
    removed_flows: frozenset = frozenset()
    outlier_density: OutlierDensity | None = None       # replaces the bundle's
    half_lateral: float | None = None                   # proximity box override, NM
    half_vertical: float | None = None                  # ft

    def __post_init__(self):
        for fid, scale in self.rate_scale.items():
            if scale < 0:
                raise InvalidInputError(f"rate scale for flow {fid} must be >= 0")
        if self.half_lateral is not None and self.half_lateral <= 0:
            raise InvalidInputError("half_lateral override must be positive")
        if self.half_vertical is not None and self.half_vertical <= 0:
            raise InvalidInputError("half_vertical override must be positive")

    def validate_flow_ids(self, bundle: ModelBundle) -> None:
        valid = {f.id for f in bundle.flows}
        unknown = (set(self.rate_scale) | set(self.removed_flows)) - valid
        if unknown:
            raise InvalidInputError(
                f"unknown flow ids {sorted(unknown)}; valid ids: {sorted(valid)}")
