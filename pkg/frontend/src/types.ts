/** Wire types for the flowmap what-if service (schema version 1). */

export const SCHEMA_VERSION = 1;

export type MapKind = "presence" | "conflict" | "outlier";

export interface FlowMarker {
  id: number;
  track_xy: [number, number][];
}

export interface SlicePayload {
  schema: number;
  model_hash: string;
  kind: MapKind;
  fl: number;
  weekday: number;
  bin: number;
  x0: number;
  y0: number;
  dx: number;
  dy: number;
  nx: number;
  ny: number;
  axis_order: "x-fastest";
  values: number[];
  max_value: number;
  probabilistic: boolean;
  overrides: OverridesBody;
  flows: FlowMarker[];
}

export interface FlowSummary {
  id: number;
  member_count: number;
  speed_mu_kt: number;
  mean_rate_share: number;
  track_xy: [number, number][];
}

export interface ModelSummary {
  schema: number;
  model_hash: string;
  n_flows: number;
  tau_s: number;
  region: number[];
  flight_levels: number[];
  bins: string[];
  kinds: MapKind[];
  has_outlier_density: boolean;
  flows: FlowSummary[];
}

export interface OverridesBody {
  rate_scale: Record<string, number>;
  removed_flows: number[];
  half_lateral: number | null;
  half_vertical: number | null;
}

export interface WhatIfRequest {
  kind: MapKind;
  fl: number;
  weekday: number;
  bin: number;
  overrides: OverridesBody;
}

export class SchemaError extends Error {
  constructor(message: string, public readonly version?: number) {
    super(message);
    this.name = "SchemaError";
  }
}
