/**
 * View state and its URL round-trip, so what-if configurations are shareable
 * links that reproduce the identical rendered view.
 */

import { MapKind, OverridesBody, WhatIfRequest } from "./types";

export interface ViewState {
  kind: MapKind;
  fl: number;
  weekday: number;
  bin: number;
  rateScale: Record<number, number>;
  removed: number[];
  /** user-locked color scale maximum; null follows the payload max */
  lockedMax: number | null;
  showDelta: boolean;
}

export function defaultState(fl: number = 350): ViewState {
  return {
    kind: "presence",
    fl,
    weekday: 0,
    bin: 0,
    rateScale: {},
    removed: [],
    lockedMax: null,
    showDelta: false,
  };
}

const KINDS: MapKind[] = ["presence", "conflict", "outlier"];

export function encodeState(state: ViewState): string {
  const params = new URLSearchParams();
  params.set("kind", state.kind);
  params.set("fl", String(state.fl));
  params.set("weekday", String(state.weekday));
  params.set("bin", String(state.bin));
  const scales = Object.keys(state.rateScale)
    .map(Number)
    .sort((a, b) => a - b)
    .filter((id) => state.rateScale[id] !== 1.0)
    .map((id) => `${id}:${state.rateScale[id]}`);
  if (scales.length > 0) {
    params.set("scale", scales.join(","));
  }
  if (state.removed.length > 0) {
    params.set("removed", [...state.removed].sort((a, b) => a - b).join(","));
  }
  if (state.lockedMax !== null) {
    params.set("max", String(state.lockedMax));
  }
  if (state.showDelta) {
    params.set("delta", "1");
  }
  return params.toString();
}

export function decodeState(query: string): ViewState {
  const params = new URLSearchParams(query);
  const state = defaultState();
  const kind = params.get("kind");
  if (kind !== null) {
    if (!KINDS.includes(kind as MapKind)) {
      throw new Error(`unknown map kind in URL: ${kind}`);
    }
    state.kind = kind as MapKind;
  }
  for (const key of ["fl", "weekday", "bin"] as const) {
    const raw = params.get(key);
    if (raw !== null) {
      const value = Number(raw);
      if (!Number.isInteger(value) || value < 0) {
        throw new Error(`bad ${key} in URL: ${raw}`);
      }
      state[key] = value;
    }
  }
  const scale = params.get("scale");
  if (scale) {
    for (const part of scale.split(",")) {
      const [idRaw, valueRaw] = part.split(":");
      const id = Number(idRaw);
      const value = Number(valueRaw);
      if (!Number.isInteger(id) || !(value >= 0)) {
        throw new Error(`bad scale entry in URL: ${part}`);
      }
      state.rateScale[id] = value;
    }
  }
  const removed = params.get("removed");
  if (removed) {
    state.removed = removed.split(",").map((v) => {
      const id = Number(v);
      if (!Number.isInteger(id)) {
        throw new Error(`bad removed flow id in URL: ${v}`);
      }
      return id;
    });
  }
  const max = params.get("max");
  if (max !== null) {
    const value = Number(max);
    if (!(value >= 0)) {
      throw new Error(`bad color max in URL: ${max}`);
    }
    state.lockedMax = value;
  }
  state.showDelta = params.get("delta") === "1";
  return state;
}

export function overridesFromState(state: ViewState): OverridesBody {
  const rate_scale: Record<string, number> = {};
  for (const id of Object.keys(state.rateScale).map(Number).sort((a, b) => a - b)) {
    if (state.rateScale[id] !== 1.0) {
      rate_scale[String(id)] = state.rateScale[id];
    }
  }
  return {
    rate_scale,
    removed_flows: [...state.removed].sort((a, b) => a - b),
    half_lateral: null,
    half_vertical: null,
  };
}

export function requestFromState(state: ViewState): WhatIfRequest {
  return {
    kind: state.kind,
    fl: state.fl,
    weekday: state.weekday,
    bin: state.bin,
    overrides: overridesFromState(state),
  };
}

/** True when every override is at its default (the baseline view). */
export function isBaseline(state: ViewState): boolean {
  const ov = overridesFromState(state);
  return Object.keys(ov.rate_scale).length === 0 && ov.removed_flows.length === 0;
}
