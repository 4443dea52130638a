/**
 * What-if explorer wiring: render a map slice, expose per-flow rate sliders
 * and remove toggles, keep the view state in the URL, and show exact payload
 * values on hover.
 */

import { WhatIfClient } from "./api";
import { ParsedSlice, hoverText } from "./payload";
import { cellAtPixel, deltaLayer, effectiveMax, flowOverlays, legendTicks,
         renderHeatLayer } from "./render";
import { ViewState, decodeState, defaultState, encodeState, isBaseline,
         requestFromState } from "./state";
import { ModelSummary } from "./types";

const CELL_PX = 4;

class App {
  private state: ViewState;
  private baseline: ParsedSlice | null = null;
  private current: ParsedSlice | null = null;
  private summary: ModelSummary | null = null;
  private readonly client: WhatIfClient;

  private readonly canvas = el<HTMLCanvasElement>("map-canvas");
  private readonly tooltip = el<HTMLDivElement>("tooltip");
  private readonly banner = el<HTMLDivElement>("error-banner");
  private readonly legend = el<HTMLDivElement>("legend");
  private readonly controls = el<HTMLDivElement>("flow-controls");
  private readonly kindSelect = el<HTMLSelectElement>("kind-select");
  private readonly flSelect = el<HTMLSelectElement>("fl-select");
  private readonly binSelect = el<HTMLSelectElement>("bin-select");
  private readonly deltaToggle = el<HTMLInputElement>("delta-toggle");
  private readonly lockMax = el<HTMLInputElement>("lock-max");

  constructor(baseUrl: string) {
    this.state = this.stateFromUrl();
    this.client = new WhatIfClient(baseUrl, {
      onSlice: (slice) => this.onSlice(slice),
      onError: (message) => this.showError(message),
    });
  }

  async start(): Promise<void> {
    try {
      this.summary = await this.client.getSummary();
    } catch (err) {
      this.showError(String(err));
      return;
    }
    if (!this.summary.flight_levels.includes(this.state.fl)) {
      this.state.fl = this.summary.flight_levels[
        Math.floor(this.summary.flight_levels.length / 2)];
    }
    if (this.summary.bins.length > 0 && !this.summary.bins.includes(
        `${this.state.weekday}-${this.state.bin}`)) {
      const [wd, bin] = this.summary.bins[0].split("-").map(Number);
      this.state.weekday = wd;
      this.state.bin = bin;
    }
    this.buildControls();
    await this.refreshBaseline();
    this.canvas.addEventListener("mousemove", (ev) => this.onHover(ev));
    this.canvas.addEventListener("mouseleave", () => {
      this.tooltip.style.display = "none";
    });
  }

  private stateFromUrl(): ViewState {
    try {
      return decodeState(window.location.search.replace(/^\?/, ""));
    } catch {
      return defaultState();
    }
  }

  private syncUrl(): void {
    const query = encodeState(this.state);
    window.history.replaceState(null, "", `?${query}`);
  }

  private buildControls(): void {
    if (!this.summary) {
      return;
    }
    this.kindSelect.innerHTML = "";
    for (const kind of this.summary.kinds) {
      if (kind === "outlier" && !this.summary.has_outlier_density) {
        continue;
      }
      this.kindSelect.append(new Option(kind, kind, false, kind === this.state.kind));
    }
    this.kindSelect.onchange = () => {
      this.state.kind = this.kindSelect.value as ViewState["kind"];
      void this.refreshBaseline();
    };
    this.flSelect.innerHTML = "";
    for (const fl of this.summary.flight_levels) {
      this.flSelect.append(new Option(`FL${fl}`, String(fl), false, fl === this.state.fl));
    }
    this.flSelect.onchange = () => {
      this.state.fl = Number(this.flSelect.value);
      void this.refreshBaseline();
    };
    this.binSelect.innerHTML = "";
    for (const bin of this.summary.bins) {
      const selected = bin === `${this.state.weekday}-${this.state.bin}`;
      this.binSelect.append(new Option(bin, bin, false, selected));
    }
    this.binSelect.onchange = () => {
      const [wd, bin] = this.binSelect.value.split("-").map(Number);
      this.state.weekday = wd;
      this.state.bin = bin;
      void this.refreshBaseline();
    };
    this.deltaToggle.onchange = () => {
      this.state.showDelta = this.deltaToggle.checked;
      this.paint();
      this.syncUrl();
    };
    this.lockMax.onchange = () => {
      this.state.lockedMax = this.lockMax.value === "" ? null : Number(this.lockMax.value);
      this.paint();
      this.syncUrl();
    };

    this.controls.innerHTML = "";
    for (const flow of this.summary.flows) {
      const row = document.createElement("div");
      row.className = "flow-row";
      const label = document.createElement("span");
      label.textContent = `flow ${flow.id} (${flow.member_count} flights)`;
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = "0";
      slider.max = "3";
      slider.step = "0.1";
      slider.value = String(this.state.rateScale[flow.id] ?? 1.0);
      slider.oninput = () => {
        this.state.rateScale[flow.id] = Number(slider.value);
        this.submit();
      };
      const remove = document.createElement("input");
      remove.type = "checkbox";
      remove.checked = this.state.removed.includes(flow.id);
      remove.onchange = () => {
        this.state.removed = remove.checked
          ? [...this.state.removed, flow.id]
          : this.state.removed.filter((id) => id !== flow.id);
        this.submit();
      };
      row.append(label, slider, remove);
      this.controls.append(row);
    }
  }

  private async refreshBaseline(): Promise<void> {
    try {
      this.baseline = await this.client.getBaseline(
        this.state.kind, this.state.fl, this.state.weekday, this.state.bin);
    } catch (err) {
      this.showError(String(err));
      return;
    }
    this.banner.style.display = "none";
    if (isBaseline(this.state)) {
      this.current = this.baseline;
      this.paint();
      this.syncUrl();
    } else {
      this.submit();
    }
  }

  private submit(): void {
    this.syncUrl();
    if (isBaseline(this.state) && this.baseline !== null) {
      this.current = this.baseline;
      this.paint();
      return;
    }
    this.client.submitWhatIf(requestFromState(this.state));
  }

  private onSlice(slice: ParsedSlice): void {
    this.banner.style.display = "none";
    this.current = slice;
    this.paint();
  }

  private showError(message: string): void {
    // keep the last good slice on screen
    this.banner.textContent = `service error: ${message} (schema ${1})`;
    this.banner.style.display = "block";
  }

  private paint(): void {
    const slice = this.current;
    if (!slice) {
      return;
    }
    const { nx, ny } = slice.doc;
    this.canvas.width = nx * CELL_PX;
    this.canvas.height = ny * CELL_PX;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) {
      return;
    }
    const layer = renderHeatLayer(slice, this.state.lockedMax);
    const off = new OffscreenCanvas(nx, ny);
    const offCtx = off.getContext("2d") as OffscreenCanvasRenderingContext2D;
    const image = new ImageData(new Uint8ClampedArray(layer.rgba), nx, ny);
    offCtx.putImageData(image, 0, 0);
    ctx.imageSmoothingEnabled = false;
    ctx.save();
    // flip so iy=0 (south) renders at the bottom
    ctx.scale(1, -1);
    ctx.drawImage(off, 0, -this.canvas.height, this.canvas.width, this.canvas.height);
    ctx.restore();

    if (this.state.showDelta && this.baseline && slice !== this.baseline) {
      const delta = deltaLayer(this.baseline, slice);
      ctx.fillStyle = "rgba(0, 60, 200, 0.25)";
      for (let i = 0; i < delta.delta.length; i++) {
        if (Math.abs(delta.delta[i]) > 1e-12) {
          const ix = i % nx;
          const iy = Math.floor(i / nx);
          ctx.fillRect(ix * CELL_PX, (ny - 1 - iy) * CELL_PX, CELL_PX, CELL_PX);
        }
      }
    }

    ctx.strokeStyle = "#c0202a";
    ctx.lineWidth = 1.5;
    for (const overlay of flowOverlays(slice)) {
      ctx.beginPath();
      overlay.cells.forEach(([cx, cy], i) => {
        const px = cx * CELL_PX;
        const py = (ny - 1 - cy) * CELL_PX;
        if (i === 0) {
          ctx.moveTo(px, py);
        } else {
          ctx.lineTo(px, py);
        }
      });
      ctx.stroke();
    }

    const max = effectiveMax(slice, this.state.lockedMax);
    this.legend.textContent = `scale: [0, ${max}] ` +
      legendTicks(max).map((t) => t.toPrecision(3)).join(" | ");
  }

  private onHover(ev: MouseEvent): void {
    const slice = this.current;
    if (!slice) {
      return;
    }
    const rect = this.canvas.getBoundingClientRect();
    const cell = cellAtPixel(slice, ev.clientX - rect.left, ev.clientY - rect.top, CELL_PX);
    if (!cell) {
      this.tooltip.style.display = "none";
      return;
    }
    const x = slice.doc.x0 + cell.ix * slice.doc.dx;
    const y = slice.doc.y0 + cell.iy * slice.doc.dy;
    this.tooltip.style.display = "block";
    this.tooltip.style.left = `${ev.clientX + 12}px`;
    this.tooltip.style.top = `${ev.clientY + 12}px`;
    this.tooltip.textContent =
      `(${x}, ${y}) NM: ${hoverText(slice, cell.ix, cell.iy)}`;
  }
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const base = new URLSearchParams(window.location.search).get("service")
  ?? "http://127.0.0.1:8000";
void new App(base).start();
