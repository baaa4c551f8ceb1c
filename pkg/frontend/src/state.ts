/**
 * Viewer state machine: frame navigation, landmark placement, grading,
 * and the two-point size measurement.
 *
 * Only one frame per ICA is annotated; every landmark placement binds the
 * draft to the frame being viewed at that moment, so the frame of the
 * most recent landmark is the annotated frame.
 */

import {
  AnnotationRecord,
  FLOW_GRADE_RANGE,
  LANDMARK_KINDS,
  LandmarkKind,
  RENTROP_RANGE,
  SequenceManifest,
  validateRecord,
} from "./schema.js";
import { Point, ViewTransform, identityTransform, screenToImage } from "./transform.js";

export type PlacementMode = LandmarkKind | "measure" | "none";

export interface GradeFields {
  rentrop_grade?: number;
  pathway?: string;
  flow_grade?: number;
  blush_grade?: number;
  donor_segment?: string;
  receiving_segment?: string;
}

export interface ClickResult {
  accepted: boolean;
  reason?: string;
  imagePoint?: [number, number];
}

export class ViewerState {
  readonly manifest: SequenceManifest;
  currentFrameIndex = 0;
  transform: ViewTransform = identityTransform();
  mode: PlacementMode = "none";

  landmarks: Partial<Record<LandmarkKind, [number, number]>> = {};
  annotatedFrame?: number;
  grades: GradeFields = {};
  measurePoints: Point[] = [];
  collateralSizePx?: number;

  constructor(manifest: SequenceManifest) {
    this.manifest = manifest;
  }

  /** Step frames, clamped to [0, frame_count - 1]. */
  stepFrame(delta: number): number {
    const last = this.manifest.frame_count - 1;
    this.currentFrameIndex = Math.min(last, Math.max(0, this.currentFrameIndex + delta));
    return this.currentFrameIndex;
  }

  setMode(mode: PlacementMode): void {
    this.mode = mode;
    if (mode === "measure") {
      this.measurePoints = [];
    }
  }

  private inBounds(pt: Point): boolean {
    return pt.x >= 0 && pt.x < this.manifest.width && pt.y >= 0 && pt.y < this.manifest.height;
  }

  /** Handle a click at screen coordinates according to the active mode. */
  clickAt(screen: Point): ClickResult {
    if (this.mode === "none") {
      return { accepted: false, reason: "no placement mode active" };
    }
    const img = screenToImage(this.transform, screen);
    if (!this.inBounds(img)) {
      return { accepted: false, reason: "outside image" };
    }
    const point: [number, number] = [img.x, img.y];
    if (this.mode === "measure") {
      this.measurePoints.push({ x: img.x, y: img.y });
      if (this.measurePoints.length === 2) {
        const [a, b] = this.measurePoints as [Point, Point];
        const dist = Math.hypot(b.x - a.x, b.y - a.y);
        this.measurePoints = [];
        if (dist > 0) {
          this.collateralSizePx = dist;
        } else {
          this.collateralSizePx = undefined;
          return { accepted: false, reason: "coincident points give size 0 (must be > 0)", imagePoint: point };
        }
      }
      return { accepted: true, imagePoint: point };
    }
    // landmark kinds: re-clicking replaces the previous landmark of that kind
    this.landmarks[this.mode] = point;
    this.annotatedFrame = this.currentFrameIndex;
    return { accepted: true, imagePoint: point };
  }

  /** Set graded fields; enumerated ranges are enforced here as well as in the UI. */
  setGrades(fields: GradeFields): void {
    if (fields.rentrop_grade !== undefined) {
      const [lo, hi] = RENTROP_RANGE;
      if (!Number.isInteger(fields.rentrop_grade) || fields.rentrop_grade < lo || fields.rentrop_grade > hi) {
        throw new Error(`rentrop_grade ${fields.rentrop_grade} outside ${lo}..${hi}`);
      }
    }
    if (fields.flow_grade !== undefined) {
      const [lo, hi] = FLOW_GRADE_RANGE;
      if (!Number.isInteger(fields.flow_grade) || fields.flow_grade < lo || fields.flow_grade > hi) {
        throw new Error(`flow_grade ${fields.flow_grade} outside ${lo}..${hi}`);
      }
    }
    if (fields.blush_grade !== undefined && !Number.isInteger(fields.blush_grade)) {
      throw new Error(`blush_grade must be an integer code, got ${fields.blush_grade}`);
    }
    Object.assign(this.grades, fields);
  }

  /** The draft as an exportable record (fields may still be missing). */
  toDraft(): Partial<AnnotationRecord> {
    const draft: Partial<AnnotationRecord> = {
      patient_id: this.manifest.patient_id,
      ica_id: this.manifest.ica_id,
      frame_index: this.annotatedFrame,
      rentrop_grade: this.grades.rentrop_grade,
      pathway: this.grades.pathway,
      flow_grade: this.grades.flow_grade,
      blush_grade: this.grades.blush_grade,
      donor_segment: this.grades.donor_segment,
      receiving_segment: this.grades.receiving_segment,
      collateral_size_px: this.collateralSizePx,
    };
    if (Object.keys(this.landmarks).length > 0) {
      draft.landmarks = { ...this.landmarks } as AnnotationRecord["landmarks"];
    }
    return draft;
  }

  /** Problems that currently block export (empty when ready). */
  exportProblems(): string[] {
    return validateRecord(this.toDraft(), this.manifest);
  }

  reset(): void {
    this.currentFrameIndex = 0;
    this.transform = identityTransform();
    this.mode = "none";
    this.landmarks = {};
    this.annotatedFrame = undefined;
    this.grades = {};
    this.measurePoints = [];
    this.collateralSizePx = undefined;
  }
}

export function landmarkKinds(): readonly LandmarkKind[] {
  return LANDMARK_KINDS;
}
