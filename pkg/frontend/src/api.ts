/**
 * Service client with latest-wins request coalescing: while a what-if request
 * is in flight, newer submissions replace the single pending slot, so rapid
 * slider drags issue at most one trailing request and the final render always
 * matches the final slider state.
 */

import { ParsedSlice, parseSlice } from "./payload";
import { ModelSummary, SCHEMA_VERSION, SchemaError, WhatIfRequest } from "./types";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ClientEvents {
  onSlice: (slice: ParsedSlice) => void;
  onError: (message: string) => void;
}

export class WhatIfClient {
  private inFlight = false;
  private pending: WhatIfRequest | null = null;
  /** bodies actually sent, for tests and debugging */
  readonly requestLog: string[] = [];

  constructor(
    private readonly baseUrl: string,
    private readonly events: ClientEvents,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  async getSummary(): Promise<ModelSummary> {
    const resp = await this.fetchFn(`${this.baseUrl}/model/summary`);
    if (!resp.ok) {
      throw new Error(`summary request failed: HTTP ${resp.status}`);
    }
    const doc = (await resp.json()) as ModelSummary;
    if (doc.schema !== SCHEMA_VERSION) {
      throw new SchemaError(`unsupported schema version ${doc.schema}`, doc.schema);
    }
    return doc;
  }

  async getBaseline(kind: string, fl: number, weekday: number, bin: number):
      Promise<ParsedSlice> {
    const query = `kind=${kind}&fl=${fl}&weekday=${weekday}&bin=${bin}`;
    const resp = await this.fetchFn(`${this.baseUrl}/map?${query}`);
    if (!resp.ok) {
      throw new Error(`map request failed: HTTP ${resp.status}`);
    }
    return parseSlice(await resp.text());
  }

  /** Queue a what-if; intermediate states may be skipped (latest wins). */
  submitWhatIf(request: WhatIfRequest): void {
    if (this.inFlight) {
      this.pending = request;
      return;
    }
    void this.launch(request);
  }

  get hasPending(): boolean {
    return this.pending !== null;
  }

  private async launch(request: WhatIfRequest): Promise<void> {
    this.inFlight = true;
    const body = JSON.stringify(request);
    this.requestLog.push(body);
    try {
      const resp = await this.fetchFn(`${this.baseUrl}/whatif`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body,
      });
      const text = await resp.text();
      if (!resp.ok) {
        this.events.onError(errorMessage(resp.status, text));
      } else {
        this.events.onSlice(parseSlice(text));
      }
    } catch (err) {
      this.events.onError(`service unreachable: ${String(err)}`);
    } finally {
      this.inFlight = false;
      if (this.pending !== null) {
        const next = this.pending;
        this.pending = null;
        void this.launch(next);
      }
    }
  }
}

function errorMessage(status: number, text: string): string {
  try {
    const doc = JSON.parse(text) as { error?: { field?: string; message?: string } };
    if (doc.error) {
      return `HTTP ${status}: ${doc.error.field}: ${doc.error.message}`;
    }
  } catch {
    // fall through to the generic message
  }
  return `HTTP ${status}`;
}
