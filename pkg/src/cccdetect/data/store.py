"""On-disk formats: sequence directories, annotation files, centerline files.

Sequence store: one directory per ICA holding ``frame_0000.png`` ... plus
``manifest.json`` with patient_id, ica_id, frame_count, height, width and
optional pixel_spacing_mm.  Annotation files are JSON arrays of records
with the exact field names of :class:`CccAnnotation`; this schema is the
contract shared with the annotation UI.  Centerline files are JSON lists
of polylines, each a list of ``[x, y, radius_px]`` triples.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from cccdetect.data.synth import SynthDataset, SynthSample
from cccdetect.data.types import (
    AngioSequence,
    CccAnnotation,
    CenterlineSet,
    ValidationError,
)

ANNOTATION_FIELDS = (
    "patient_id", "ica_id", "frame_index", "landmarks", "rentrop_grade",
    "pathway", "flow_grade", "blush_grade", "donor_segment",
    "receiving_segment", "collateral_size_px",
)


def save_sequence_dir(seq: AngioSequence, root, centerlines: CenterlineSet | None = None) -> Path:
    """Write one ICA directory: 8-bit grayscale PNG frames plus manifest."""
    out = Path(root) / seq.ica_id
    out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        img = Image.fromarray(np.round(frame * 255.0).astype(np.uint8), mode="L")
        img.save(out / f"frame_{i:04d}.png")
    manifest = {
        "patient_id": seq.patient_id,
        "ica_id": seq.ica_id,
        "frame_count": int(seq.frame_count),
        "height": int(seq.height),
        "width": int(seq.width),
        "pixel_spacing_mm": seq.pixel_spacing_mm,
    }
    manifest.update(seq.meta)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if centerlines is not None:
        write_centerline_file(centerlines, out / "centerlines.json")
    return out


def load_sequence_dir(path) -> AngioSequence:
    """Read an ICA directory back; 8/16-bit grayscale normalizes to [0, 1]."""
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    frames = []
    for i in range(manifest["frame_count"]):
        img = Image.open(path / f"frame_{i:04d}.png")
        arr = np.asarray(img)
        if arr.dtype == np.uint8:
            arr = arr.astype(np.float32) / 255.0
        elif arr.dtype in (np.uint16, np.int32):
            arr = arr.astype(np.float32) / 65535.0
        else:
            raise ValidationError(f"{path.name}: unsupported frame bit depth {arr.dtype}")
        if arr.shape != (manifest["height"], manifest["width"]):
            raise ValidationError(
                f"{path.name}: frame {i} is {arr.shape}, manifest says "
                f"{(manifest['height'], manifest['width'])}")
        frames.append(arr)
    meta = {k: v for k, v in manifest.items()
            if k not in ("patient_id", "ica_id", "frame_count", "height", "width", "pixel_spacing_mm")}
    return AngioSequence(
        patient_id=manifest["patient_id"],
        ica_id=manifest["ica_id"],
        frames=np.stack(frames),
        pixel_spacing_mm=manifest.get("pixel_spacing_mm"),
        meta=meta,
    )


def _annotation_to_record(ann: CccAnnotation) -> dict:
    return {
        "patient_id": ann.patient_id,
        "ica_id": ann.ica_id,
        "frame_index": ann.frame_index,
        "landmarks": {k: [float(v[0]), float(v[1])] for k, v in ann.landmarks.items()},
        "rentrop_grade": ann.rentrop_grade,
        "pathway": ann.pathway,
        "flow_grade": ann.flow_grade,
        "blush_grade": ann.blush_grade,
        "donor_segment": ann.donor_segment,
        "receiving_segment": ann.receiving_segment,
        "collateral_size_px": ann.collateral_size_px,
    }


def _record_to_annotation(rec: dict, index: int) -> CccAnnotation:
    missing = [f for f in ANNOTATION_FIELDS if f not in rec]
    if missing:
        raise ValidationError(f"record {index}: missing required field(s): {', '.join(missing)}")
    if not isinstance(rec["landmarks"], dict):
        raise ValidationError(f"record {index}: landmarks must be an object of kind -> [x, y]")
    landmarks = {k: tuple(float(c) for c in v) for k, v in rec["landmarks"].items()}
    return CccAnnotation(
        patient_id=rec["patient_id"],
        ica_id=rec["ica_id"],
        frame_index=rec["frame_index"],
        landmarks=landmarks,
        rentrop_grade=rec["rentrop_grade"],
        pathway=rec["pathway"],
        flow_grade=rec["flow_grade"],
        blush_grade=rec["blush_grade"],
        donor_segment=rec["donor_segment"],
        receiving_segment=rec["receiving_segment"],
        collateral_size_px=rec["collateral_size_px"],
    )


def write_annotation_file(annotations, path) -> Path:
    """Serialize annotations to a JSON array; lossless against the parser."""
    path = Path(path)
    records = [_annotation_to_record(a) for a in annotations]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(records, indent=2) + "\n")
    return path


def parse_annotation_file(path, sequence_index: dict | None = None) -> list:
    """Read and validate an annotation JSON array.

    ``sequence_index`` optionally maps (patient_id, ica_id) to
    (frame_count, height, width) so frame and landmark bounds can be
    checked; without it only structural and range invariants run.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise ValidationError(f"{path}: top level must be a JSON array of annotation records")
    annotations = []
    for i, rec in enumerate(raw):
        ann = _record_to_annotation(rec, i)
        bounds = (None, None, None)
        if sequence_index is not None:
            key = (ann.patient_id, ann.ica_id)
            if key not in sequence_index:
                raise ValidationError(f"record {i}: unknown sequence {key[0]}/{key[1]}")
            bounds = sequence_index[key]
        ann.validate(frame_count=bounds[0], height=bounds[1], width=bounds[2], record_index=i)
        annotations.append(ann)
    return annotations


def load_annotation_records(path) -> list:
    """Alias used by callers that read annotations without a sequence index."""
    return parse_annotation_file(path)


def write_centerline_file(centerlines: CenterlineSet, path) -> Path:
    path = Path(path)
    data = [[[float(x), float(y), float(r)] for x, y, r in poly] for poly in centerlines.polylines]
    path.write_text(json.dumps(data) + "\n")
    return path


def load_centerline_file(path) -> CenterlineSet:
    data = json.loads(Path(path).read_text())
    return CenterlineSet(polylines=[np.asarray(poly, dtype=np.float64) for poly in data])


def save_dataset_dir(dataset: SynthDataset, root) -> Path:
    """Write a full dataset: sequence dirs, centerlines, annotations.json."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for sample in dataset.samples:
        save_sequence_dir(sample.sequence, root, centerlines=sample.centerlines)
    write_annotation_file(dataset.annotations(), root / "annotations.json")
    return root


def load_dataset_dir(root) -> list:
    """Read a dataset directory back into SynthSample records (sorted by ids)."""
    root = Path(root)
    ann_path = root / "annotations.json"
    seq_dirs = sorted(p for p in root.iterdir() if p.is_dir() and (p / "manifest.json").exists())
    sequences = [load_sequence_dir(p) for p in seq_dirs]
    sequences.sort(key=lambda s: (s.patient_id, s.ica_id))
    index = {(s.patient_id, s.ica_id): (s.frame_count, s.height, s.width) for s in sequences}
    by_ica = {}
    if ann_path.exists():
        for ann in parse_annotation_file(ann_path, sequence_index=index):
            by_ica[(ann.patient_id, ann.ica_id)] = ann
    samples = []
    for seq in sequences:
        cl_path = root / seq.ica_id / "centerlines.json"
        centerlines = load_centerline_file(cl_path) if cl_path.exists() else None
        samples.append(SynthSample(
            sequence=seq,
            centerlines=centerlines,
            annotation=by_ica.get((seq.patient_id, seq.ica_id)),
        ))
    return samples
