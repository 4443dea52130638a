/** Canned service responses captured from a seeded scenario. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const here = dirname(fileURLToPath(import.meta.url));

export function fixtureText(name: string): string {
  return readFileSync(join(here, "fixtures", name), "utf-8");
}

export const SLICE_PRESENCE = fixtureText("slice_presence.json");
export const SLICE_CONFLICT = fixtureText("slice_conflict.json");
export const WHATIF_DOUBLE = fixtureText("whatif_double.json");
export const WHATIF_REMOVED = fixtureText("whatif_removed.json");
export const SUMMARY = fixtureText("summary.json");
