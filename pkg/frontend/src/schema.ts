/**
 * Annotation record schema shared with the analysis pipeline.
 *
 * Field names, ranges, and the JSON layout are the binding contract: a file
 * exported here must parse with zero errors on the pipeline side.
 */

export const LANDMARK_KINDS = ["collateral", "donor", "receiver"] as const;
export type LandmarkKind = (typeof LANDMARK_KINDS)[number];

export const RENTROP_RANGE: readonly [number, number] = [0, 3];
export const FLOW_GRADE_RANGE: readonly [number, number] = [1, 4];

export const PATHWAY_OPTIONS = ["septal", "epicardial", "atrial"] as const;
export const SEGMENT_OPTIONS = ["LAD", "LCX", "RCA", "DIAG", "OM"] as const;
export const BLUSH_OPTIONS = [0, 1, 2, 3] as const;

export interface AnnotationRecord {
  patient_id: string;
  ica_id: string;
  frame_index: number;
  landmarks: Record<LandmarkKind, [number, number]>;
  rentrop_grade: number;
  pathway: string;
  flow_grade: number;
  blush_grade: number;
  donor_segment: string;
  receiving_segment: string;
  collateral_size_px: number;
}

export interface SequenceManifest {
  patient_id: string;
  ica_id: string;
  frame_count: number;
  height: number;
  width: number;
  pixel_spacing_mm?: number | null;
}

export function validateManifest(raw: unknown): SequenceManifest {
  if (typeof raw !== "object" || raw === null) {
    throw new Error("manifest must be a JSON object");
  }
  const m = raw as Record<string, unknown>;
  for (const key of ["patient_id", "ica_id"]) {
    if (typeof m[key] !== "string" || !m[key]) {
      throw new Error(`manifest ${key} must be a non-empty string`);
    }
  }
  for (const key of ["frame_count", "height", "width"]) {
    const v = m[key];
    if (typeof v !== "number" || !Number.isInteger(v) || v < 1) {
      throw new Error(`manifest ${key} must be a positive integer`);
    }
  }
  return {
    patient_id: m.patient_id as string,
    ica_id: m.ica_id as string,
    frame_count: m.frame_count as number,
    height: m.height as number,
    width: m.width as number,
    pixel_spacing_mm: (m.pixel_spacing_mm as number | null | undefined) ?? null,
  };
}

/** Problems that block export; empty array means the record is valid. */
export function validateRecord(
  rec: Partial<AnnotationRecord>,
  manifest?: SequenceManifest,
): string[] {
  const problems: string[] = [];
  if (!rec.patient_id) problems.push("patient_id missing");
  if (!rec.ica_id) problems.push("ica_id missing");
  if (rec.frame_index === undefined || rec.frame_index < 0 || !Number.isInteger(rec.frame_index)) {
    problems.push("frame_index missing or invalid");
  } else if (manifest && rec.frame_index >= manifest.frame_count) {
    problems.push(`frame_index ${rec.frame_index} outside sequence of ${manifest.frame_count} frames`);
  }
  for (const kind of LANDMARK_KINDS) {
    const pt = rec.landmarks?.[kind];
    if (!pt) {
      problems.push(`landmark ${kind} not placed`);
      continue;
    }
    if (manifest) {
      const [x, y] = pt;
      if (x < 0 || x >= manifest.width || y < 0 || y >= manifest.height) {
        problems.push(`landmark ${kind} outside the image`);
      }
    }
  }
  if (rec.rentrop_grade === undefined) {
    problems.push("rentrop_grade unset");
  } else if (rec.rentrop_grade < RENTROP_RANGE[0] || rec.rentrop_grade > RENTROP_RANGE[1]) {
    problems.push(`rentrop_grade ${rec.rentrop_grade} outside ${RENTROP_RANGE[0]}..${RENTROP_RANGE[1]}`);
  }
  if (rec.flow_grade === undefined) {
    problems.push("flow_grade unset");
  } else if (rec.flow_grade < FLOW_GRADE_RANGE[0] || rec.flow_grade > FLOW_GRADE_RANGE[1]) {
    problems.push(`flow_grade ${rec.flow_grade} outside ${FLOW_GRADE_RANGE[0]}..${FLOW_GRADE_RANGE[1]}`);
  }
  if (rec.blush_grade === undefined || !Number.isInteger(rec.blush_grade)) {
    problems.push("blush_grade unset");
  }
  if (!rec.pathway) problems.push("pathway unset");
  if (!rec.donor_segment) problems.push("donor_segment unset");
  if (!rec.receiving_segment) problems.push("receiving_segment unset");
  if (rec.collateral_size_px === undefined) {
    problems.push("collateral size not measured");
  } else if (!(rec.collateral_size_px > 0)) {
    problems.push("collateral size must be > 0 px");
  }
  return problems;
}
