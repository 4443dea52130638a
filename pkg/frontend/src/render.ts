/**
 * Heat-layer rendering: payload values to cell colors, flow centroid
 * overlays, and the baseline/what-if delta view.  All numbers displayed come
 * from the payload; this module performs no probability math.
 */

import { ParsedSlice, cellIndex } from "./payload";

export interface HeatLayer {
  nx: number;
  ny: number;
  /** RGBA, one pixel per cell, row iy=0 at the bottom of the region */
  rgba: Uint8ClampedArray;
  legendMax: number;
  nonZeroCells: number;
}

/** Diverging-free sequential ramp anchored at [0, max]: white -> amber -> red. */
export function colorFor(value: number, max: number): [number, number, number, number] {
  if (value <= 0 || max <= 0) {
    return [255, 255, 255, 255];
  }
  const t = Math.min(value / max, 1.0);
  if (t < 0.5) {
    const u = t / 0.5;
    return [255, Math.round(255 - 60 * u), Math.round(255 - 215 * u), 255];
  }
  const u = (t - 0.5) / 0.5;
  return [Math.round(255 - 75 * u), Math.round(195 - 155 * u), Math.round(40 - 40 * u), 255];
}

export function effectiveMax(slice: ParsedSlice, lockedMax: number | null): number {
  return lockedMax !== null ? lockedMax : slice.doc.max_value;
}

export function renderHeatLayer(slice: ParsedSlice, lockedMax: number | null): HeatLayer {
  const { nx, ny, values } = slice.doc;
  const max = effectiveMax(slice, lockedMax);
  const rgba = new Uint8ClampedArray(nx * ny * 4);
  let nonZero = 0;
  for (let iy = 0; iy < ny; iy++) {
    for (let ix = 0; ix < nx; ix++) {
      const v = values[cellIndex(slice.doc, ix, iy)];
      if (v > 0) {
        nonZero += 1;
      }
      const [r, g, b, a] = colorFor(v, max);
      const p = 4 * (ix + nx * iy);
      rgba[p] = r;
      rgba[p + 1] = g;
      rgba[p + 2] = b;
      rgba[p + 3] = a;
    }
  }
  return { nx, ny, rgba, legendMax: max, nonZeroCells: nonZero };
}

export interface DeltaLayer {
  nx: number;
  ny: number;
  /** what-if minus baseline, per cell */
  delta: Float64Array;
  maxAbs: number;
}

export function deltaLayer(baseline: ParsedSlice, whatif: ParsedSlice): DeltaLayer {
  const { nx, ny } = whatif.doc;
  if (baseline.doc.nx !== nx || baseline.doc.ny !== ny) {
    throw new Error("baseline and what-if grids differ in shape");
  }
  const delta = new Float64Array(nx * ny);
  let maxAbs = 0;
  for (let i = 0; i < delta.length; i++) {
    delta[i] = whatif.doc.values[i] - baseline.doc.values[i];
    maxAbs = Math.max(maxAbs, Math.abs(delta[i]));
  }
  return { nx, ny, delta, maxAbs };
}

/** Grid cell under a pixel of the scaled canvas, or null outside. */
export function cellAtPixel(slice: ParsedSlice, pxX: number, pxY: number,
                            cellSize: number): { ix: number; iy: number } | null {
  const ix = Math.floor(pxX / cellSize);
  // canvas y grows downward; cell iy=0 is the southern row
  const iyFromTop = Math.floor(pxY / cellSize);
  const iy = slice.doc.ny - 1 - iyFromTop;
  if (ix < 0 || ix >= slice.doc.nx || iy < 0 || iy >= slice.doc.ny) {
    return null;
  }
  return { ix, iy };
}

/** Flow centroid polylines in cell coordinates for overlay drawing. */
export function flowOverlays(slice: ParsedSlice): { id: number; cells: [number, number][] }[] {
  const { x0, y0, dx, dy } = slice.doc;
  return slice.doc.flows.map((flow) => ({
    id: flow.id,
    cells: flow.track_xy.map(([x, y]) => [(x - x0) / dx, (y - y0) / dy] as [number, number]),
  }));
}

export function legendTicks(max: number, count: number = 5): number[] {
  const ticks: number[] = [];
  for (let i = 0; i < count; i++) {
    ticks.push((max * i) / (count - 1));
  }
  return ticks;
}
