/**
 * Annotation export: the JSON array format the analysis pipeline parses.
 *
 * Field order and number formatting are fixed so identical drafts always
 * produce identical files.
 */

import { AnnotationRecord, LANDMARK_KINDS, SequenceManifest, validateRecord } from "./schema.js";

/** Coordinates and sizes round to 2 decimals: annotation clicks are not
 *  meaningful below centi-pixel precision and the files stay diff-friendly. */
function round2(v: number): number {
  return Math.round(v * 100) / 100;
}

function orderedRecord(rec: AnnotationRecord): AnnotationRecord {
  const landmarks = {} as AnnotationRecord["landmarks"];
  for (const kind of LANDMARK_KINDS) {
    const [x, y] = rec.landmarks[kind];
    landmarks[kind] = [round2(x), round2(y)];
  }
  return {
    patient_id: rec.patient_id,
    ica_id: rec.ica_id,
    frame_index: rec.frame_index,
    landmarks,
    rentrop_grade: rec.rentrop_grade,
    pathway: rec.pathway,
    flow_grade: rec.flow_grade,
    blush_grade: rec.blush_grade,
    donor_segment: rec.donor_segment,
    receiving_segment: rec.receiving_segment,
    collateral_size_px: round2(rec.collateral_size_px),
  };
}

export class ExportError extends Error {
  readonly problems: string[];

  constructor(problems: string[]) {
    super(`export blocked: ${problems.join("; ")}`);
    this.problems = problems;
  }
}

/** Serialize validated drafts to the annotation file contents. */
export function exportAnnotations(
  drafts: Partial<AnnotationRecord>[],
  manifests?: Map<string, SequenceManifest>,
): string {
  if (drafts.length === 0) {
    throw new ExportError(["no annotations to export"]);
  }
  const records: AnnotationRecord[] = [];
  for (const [i, draft] of drafts.entries()) {
    const manifest = manifests?.get(`${draft.patient_id}/${draft.ica_id}`);
    const problems = validateRecord(draft, manifest);
    if (problems.length > 0) {
      throw new ExportError(problems.map((p) => `record ${i}: ${p}`));
    }
    records.push(orderedRecord(draft as AnnotationRecord));
  }
  return JSON.stringify(records, null, 2) + "\n";
}

/** Parse an annotation file back into records (for re-import). */
export function importAnnotations(text: string): AnnotationRecord[] {
  const raw = JSON.parse(text);
  if (!Array.isArray(raw)) {
    throw new Error("annotation file must hold a JSON array");
  }
  return raw.map((rec, i) => {
    const problems = validateRecord(rec as Partial<AnnotationRecord>);
    if (problems.length > 0) {
      throw new Error(`record ${i}: ${problems.join("; ")}`);
    }
    return rec as AnnotationRecord;
  });
}
