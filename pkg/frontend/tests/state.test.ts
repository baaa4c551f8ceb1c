import { describe, expect, it } from "vitest";

import { SequenceManifest } from "../src/schema.js";
import { ViewerState } from "../src/state.js";
import { setZoom } from "../src/transform.js";

const MANIFEST: SequenceManifest = {
  patient_id: "P0007",
  ica_id: "P0007-I0",
  frame_count: 30,
  height: 64,
  width: 64,
  pixel_spacing_mm: null,
};

function freshState(): ViewerState {
  return new ViewerState(MANIFEST);
}

describe("frame navigation", () => {
  it("stepping forward 30 times stops at the last frame", () => {
    const s = freshState();
    for (let i = 0; i < 30; i++) s.stepFrame(1);
    expect(s.currentFrameIndex).toBe(29);
  });

  it("never reads below frame 0", () => {
    const s = freshState();
    s.stepFrame(-5);
    expect(s.currentFrameIndex).toBe(0);
  });

  it("reset restores frame 0 and an empty draft", () => {
    const s = freshState();
    s.stepFrame(4);
    s.setMode("collateral");
    s.clickAt({ x: 10, y: 10 });
    s.reset();
    expect(s.currentFrameIndex).toBe(0);
    expect(Object.keys(s.landmarks)).toHaveLength(0);
    expect(s.annotatedFrame).toBeUndefined();
  });
});

describe("landmark placement", () => {
  it("stores image pixel coordinates with the current frame", () => {
    const s = freshState();
    s.stepFrame(8);
    s.setMode("collateral");
    const result = s.clickAt({ x: 31.5, y: 22.25 });
    expect(result.accepted).toBe(true);
    expect(s.landmarks.collateral).toEqual([31.5, 22.25]);
    expect(s.annotatedFrame).toBe(8);
  });

  it("maps through the zoom to the same anatomical pixel", () => {
    const s1 = freshState();
    s1.setMode("donor");
    s1.clickAt({ x: 24, y: 40 });
    const s2 = freshState();
    s2.transform = setZoom(s2.transform, 2);
    s2.setMode("donor");
    s2.clickAt({ x: 48, y: 80 });
    const [x1, y1] = s1.landmarks.donor!;
    const [x2, y2] = s2.landmarks.donor!;
    expect(Math.hypot(x2 - x1, y2 - y1)).toBeLessThan(0.5);
  });

  it("re-clicking replaces the landmark of that kind", () => {
    const s = freshState();
    s.setMode("collateral");
    s.clickAt({ x: 5, y: 5 });
    s.clickAt({ x: 20, y: 21 });
    expect(s.landmarks.collateral).toEqual([20, 21]);
  });

  it("ignores clicks outside the image with a reason", () => {
    const s = freshState();
    s.setMode("receiver");
    const result = s.clickAt({ x: 200, y: 10 });
    expect(result.accepted).toBe(false);
    expect(result.reason).toContain("outside");
    expect(s.landmarks.receiver).toBeUndefined();
  });

  it("does nothing without an active mode", () => {
    const s = freshState();
    const result = s.clickAt({ x: 10, y: 10 });
    expect(result.accepted).toBe(false);
  });
});

describe("grades", () => {
  it("accepts the enumerated ranges", () => {
    const s = freshState();
    s.setGrades({ rentrop_grade: 3, flow_grade: 4, blush_grade: 2 });
    expect(s.grades.rentrop_grade).toBe(3);
    expect(s.grades.flow_grade).toBe(4);
  });

  it("rejects a flow grade outside 1..4", () => {
    const s = freshState();
    expect(() => s.setGrades({ flow_grade: 5 })).toThrow(/flow_grade 5 outside 1\.\.4/);
  });

  it("rejects a rentrop grade outside 0..3", () => {
    const s = freshState();
    expect(() => s.setGrades({ rentrop_grade: 4 })).toThrow(/rentrop_grade 4 outside/);
  });

  it("grades persist through frame navigation", () => {
    const s = freshState();
    s.setGrades({ rentrop_grade: 3, flow_grade: 4 });
    s.stepFrame(7);
    s.stepFrame(-3);
    expect(s.grades.rentrop_grade).toBe(3);
    expect(s.grades.flow_grade).toBe(4);
  });
});

describe("size measurement", () => {
  it("computes the euclidean distance of a 3-4-5 triangle", () => {
    const s = freshState();
    s.setMode("measure");
    s.clickAt({ x: 0, y: 0 });
    s.clickAt({ x: 3, y: 4 });
    expect(s.collateralSizePx).toBeCloseTo(5.0, 10);
  });

  it("computes (1,1)-(4,5) as 5.0", () => {
    const s = freshState();
    s.setMode("measure");
    s.clickAt({ x: 1, y: 1 });
    s.clickAt({ x: 4, y: 5 });
    expect(s.collateralSizePx).toBeCloseTo(5.0, 10);
  });

  it("a single point stores no value", () => {
    const s = freshState();
    s.setMode("measure");
    s.clickAt({ x: 10, y: 10 });
    expect(s.collateralSizePx).toBeUndefined();
  });

  it("coincident points are flagged invalid", () => {
    const s = freshState();
    s.setMode("measure");
    s.clickAt({ x: 10, y: 10 });
    const result = s.clickAt({ x: 10, y: 10 });
    expect(result.accepted).toBe(false);
    expect(result.reason).toContain("> 0");
    expect(s.collateralSizePx).toBeUndefined();
  });
});

describe("export gating", () => {
  it("reports field-level problems while incomplete", () => {
    const s = freshState();
    const problems = s.exportProblems();
    expect(problems.join(" ")).toContain("collateral not placed");
    expect(problems.join(" ")).toContain("rentrop_grade unset");
  });

  it("clears once every field is supplied", () => {
    const s = freshState();
    s.stepFrame(8);
    for (const kind of ["collateral", "donor", "receiver"] as const) {
      s.setMode(kind);
      s.clickAt({ x: 20, y: 20 });
    }
    s.setGrades({
      rentrop_grade: 2, flow_grade: 3, blush_grade: 1,
      pathway: "septal", donor_segment: "LAD", receiving_segment: "RCA",
    });
    s.setMode("measure");
    s.clickAt({ x: 1, y: 1 });
    s.clickAt({ x: 4, y: 5 });
    expect(s.exportProblems()).toEqual([]);
  });
});
