/** Client-side annotation-document validation.
 *
 * Must accept/reject exactly the documents the server accepts; both sides
 * run the shared fixture in tests/fixtures/annotation_cases.json.
 */

import { ARTIFACT_REASONS, AnnotationDoc } from "./types";

const LEVELS = [0, 1, 2, 3];

function isFiniteNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

/** Returns a list of human-readable problems; empty means valid. */
export function validateAnnotationDoc(doc: unknown): string[] {
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    return ["annotation document must be an object"];
  }
  const d = doc as Record<string, unknown>;
  const errors: string[] = [];
  if (d.v !== 1) {
    return [`unsupported schema version ${JSON.stringify(d.v)}`];
  }
  if (!LEVELS.includes(d.initial_level as number)) {
    errors.push(`unknown initial level ${JSON.stringify(d.initial_level)}`);
  }

  const transitions = Array.isArray(d.transitions) ? d.transitions : [];
  if (d.transitions !== undefined && !Array.isArray(d.transitions)) {
    errors.push("transitions must be an array");
  }
  let prevT = -Infinity;
  let prevLevel = d.initial_level as number;
  transitions.forEach((entry, i) => {
    if (typeof entry !== "object" || entry === null) {
      errors.push(`transition ${i} must be an object`);
      return;
    }
    const { t, level } = entry as { t?: unknown; level?: unknown };
    if (!isFiniteNumber(t)) {
      errors.push(`transition ${i} is missing a time`);
      return;
    }
    if (!LEVELS.includes(level as number)) {
      errors.push(`transition ${i} has unknown level ${JSON.stringify(level)}`);
      return;
    }
    if (t <= prevT) {
      errors.push(`transition ${i} time ${t} is not after ${prevT}`);
    }
    if (level === prevLevel) {
      errors.push(`transition ${i} repeats level ${level}`);
    }
    prevT = t;
    prevLevel = level as number;
  });

  const artifacts = Array.isArray(d.artifacts) ? d.artifacts : [];
  if (d.artifacts !== undefined && !Array.isArray(d.artifacts)) {
    errors.push("artifacts must be an array");
  }
  artifacts.forEach((entry, i) => {
    if (typeof entry !== "object" || entry === null) {
      errors.push(`artifact ${i} must be an object`);
      return;
    }
    const { t_start, t_end, reason } = entry as {
      t_start?: unknown;
      t_end?: unknown;
      reason?: unknown;
    };
    if (!isFiniteNumber(t_start) || !isFiniteNumber(t_end)) {
      errors.push(`artifact ${i} is missing start/end times`);
      return;
    }
    if (t_end <= t_start) {
      errors.push(`artifact ${i} is empty or inverted`);
    }
    // a missing reason defaults to "other" server-side
    if (reason !== undefined && !ARTIFACT_REASONS.includes(reason as never)) {
      errors.push(`artifact ${i} has unknown reason ${JSON.stringify(reason)}`);
    }
  });

  return errors;
}

export function isValidAnnotationDoc(doc: unknown): doc is AnnotationDoc {
  return validateAnnotationDoc(doc).length === 0;
}

/** Level in effect at time t (transitions are right-continuous). */
export function levelAt(doc: AnnotationDoc, t: number): number {
  let level: number = doc.initial_level;
  for (const tr of doc.transitions) {
    if (tr.t <= t) level = tr.level;
    else break;
  }
  return level;
}
