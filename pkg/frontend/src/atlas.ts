/** View model for the educational atlas grid.
 *
 * One row per patient, in manifest order. Within a row the images are
 * grouped into per-case strips keyed by (shifted) case date; the server
 * sends images newest case first and the grouping preserves that order,
 * so the leftmost strip is always the most recent case. Every tile shows
 * its modality badge (WLC or BLC).
 *
 * Below CONFIDENTIAL clearance the view refuses to build if any raw
 * patient identifier slipped into the payload: better a hard failure
 * than an identifier on screen.
 */

import type { AtlasManifest, AtlasResponse } from "./types.js";

const RAW_UID = /UID\d{4}/;

export class IdentifierLeak extends Error {
  constructor(where: string) {
    super(`raw patient identifier in atlas payload at ${where}`);
    this.name = "IdentifierLeak";
  }
}

export interface AtlasTile {
  ref: string;
  badge: string;
  location: string;
  pathology: string;
}

export interface CaseStrip {
  caseDate: string;
  tiles: AtlasTile[];
}

export interface PatientRow {
  pseudonym: string;
  strips: CaseStrip[];
}

export interface AtlasViewModel {
  patients: PatientRow[];
  tileCount: number;
  license: string;
  bundleId: string;
}

function confidential(access: string): boolean {
  return access === "CONFIDENTIAL" || access === "RESTRICTED";
}

export function buildAtlasView(response: AtlasResponse): AtlasViewModel {
  const manifest = response.manifest;
  if (!confidential(response.access)) {
    guardIdentifiers(manifest);
  }
  let tileCount = 0;
  const patients: PatientRow[] = manifest.items.map((item) => {
    const strips: CaseStrip[] = [];
    for (const image of item.images) {
      const last = strips[strips.length - 1];
      const strip =
        last && last.caseDate === image.case_date
          ? last
          : (strips.push({ caseDate: image.case_date, tiles: [] }),
            strips[strips.length - 1]!);
      strip.tiles.push({
        ref: image.ref,
        badge: image.modality,
        location: image.location,
        pathology: image.pathology,
      });
      tileCount += 1;
    }
    return { pseudonym: item.pseudonym, strips };
  });
  return {
    patients,
    tileCount,
    license: manifest.license,
    bundleId: manifest.bundle_id,
  };
}

function guardIdentifiers(manifest: AtlasManifest): void {
  for (const item of manifest.items) {
    if (RAW_UID.test(item.pseudonym)) throw new IdentifierLeak("patient row");
    for (const image of item.images) {
      for (const [key, value] of Object.entries(image)) {
        if (typeof value === "string" && RAW_UID.test(value)) {
          throw new IdentifierLeak(`image field ${key}`);
        }
      }
    }
  }
}

/** True when every patient's strips run newest case to oldest. */
export function stripsNewestFirst(view: AtlasViewModel): boolean {
  return view.patients.every((row) =>
    row.strips.every(
      (strip, i) => i === 0 || strip.caseDate <= row.strips[i - 1]!.caseDate,
    ),
  );
}
