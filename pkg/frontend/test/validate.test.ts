import { describe, expect, it } from "vitest";

import fixture from "../../tests/fixtures/annotation_cases.json";
import { levelAt, validateAnnotationDoc } from "../src/validate";
import { AnnotationDoc } from "../src/types";

interface FixtureCase {
  name: string;
  valid: boolean;
  doc: unknown;
}

describe("shared validation fixture", () => {
  // The server-side suite runs the same file; both must agree on every case.
  for (const testCase of (fixture as { cases: FixtureCase[] }).cases) {
    it(`${testCase.valid ? "accepts" : "rejects"}: ${testCase.name}`, () => {
      const errors = validateAnnotationDoc(testCase.doc);
      if (testCase.valid) {
        expect(errors).toEqual([]);
      } else {
        expect(errors.length).toBeGreaterThan(0);
      }
    });
  }
});

describe("validateAnnotationDoc details", () => {
  it("reports every problem, not just the first", () => {
    const errors = validateAnnotationDoc({
      v: 1,
      initial_level: 0,
      transitions: [
        { t: 100, level: 1 },
        { t: 50, level: 1 },
      ],
      artifacts: [{ t_start: 5, t_end: 2, reason: "movement" }],
    });
    expect(errors.length).toBeGreaterThanOrEqual(3);
  });

  it("rejects reordered markers with an inline-worthy message", () => {
    const errors = validateAnnotationDoc({
      v: 1,
      initial_level: 0,
      transitions: [
        { t: 200, level: 1 },
        { t: 100, level: 2 },
      ],
      artifacts: [],
    });
    expect(errors.some((e) => e.includes("not after"))).toBe(true);
  });
});

describe("levelAt", () => {
  const doc: AnnotationDoc = {
    v: 1,
    initial_level: 0,
    transitions: [
      { t: 100, level: 1 },
      { t: 200, level: 2 },
    ],
    artifacts: [],
  };

  it("is the initial level before the first transition", () => {
    expect(levelAt(doc, 50)).toBe(0);
  });

  it("is right-continuous at the boundary", () => {
    expect(levelAt(doc, 100)).toBe(1);
    expect(levelAt(doc, 99.999)).toBe(0);
  });

  it("holds the last level afterwards", () => {
    expect(levelAt(doc, 500)).toBe(2);
  });
});
