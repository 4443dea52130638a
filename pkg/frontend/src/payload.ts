/**
 * Slice payload parsing.
 *
 * The hover tooltip must show exactly the bytes the service sent, so the
 * numeric tokens of the "values" array are extracted from the raw response
 * text alongside the parsed document.  The UI never reformats the numbers.
 */

import { SCHEMA_VERSION, SchemaError, SlicePayload } from "./types";

export interface ParsedSlice {
  doc: SlicePayload;
  /** raw numeric tokens of doc.values, byte-for-byte as served */
  valueTokens: string[];
  rawText: string;
}

/** Extract the untouched numeric tokens of the top-level "values" array. */
export function extractValueTokens(text: string): string[] {
  const key = '"values":[';
  const start = text.indexOf(key);
  if (start < 0) {
    throw new SchemaError('payload has no "values" array');
  }
  const open = start + key.length;
  const close = text.indexOf("]", open);
  if (close < 0) {
    throw new SchemaError('unterminated "values" array');
  }
  const body = text.slice(open, close);
  if (body.length === 0) {
    return [];
  }
  return body.split(",");
}

export function parseSlice(text: string): ParsedSlice {
  let doc: SlicePayload;
  try {
    doc = JSON.parse(text) as SlicePayload;
  } catch (err) {
    throw new SchemaError(`payload is not valid JSON: ${String(err)}`);
  }
  if (doc.schema !== SCHEMA_VERSION) {
    throw new SchemaError(`unsupported schema version ${doc.schema}`, doc.schema);
  }
  if (doc.axis_order !== "x-fastest") {
    throw new SchemaError(`unknown axis order ${doc.axis_order}`);
  }
  const valueTokens = extractValueTokens(text);
  if (valueTokens.length !== doc.values.length) {
    throw new SchemaError(
      `token count ${valueTokens.length} != value count ${doc.values.length}`,
    );
  }
  if (doc.values.length !== doc.nx * doc.ny) {
    throw new SchemaError(`value count ${doc.values.length} != nx*ny`);
  }
  for (let i = 0; i < valueTokens.length; i++) {
    if (Number(valueTokens[i]) !== doc.values[i]) {
      throw new SchemaError(`token ${i} does not parse back to its value`);
    }
  }
  return { doc, valueTokens, rawText: text };
}

/** values are x-fastest: index of cell (ix, iy). */
export function cellIndex(doc: SlicePayload, ix: number, iy: number): number {
  return ix + doc.nx * iy;
}

export function valueAt(slice: ParsedSlice, ix: number, iy: number): number {
  return slice.doc.values[cellIndex(slice.doc, ix, iy)];
}

/** The exact service-provided token for the hover tooltip. */
export function hoverText(slice: ParsedSlice, ix: number, iy: number): string {
  return slice.valueTokens[cellIndex(slice.doc, ix, iy)];
}
