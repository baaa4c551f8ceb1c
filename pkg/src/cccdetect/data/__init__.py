"""Sequence/annotation ingestion, clip selection, masks, folds, and synthesis."""

from cccdetect.data.types import (
    LABEL_CCC,
    LABEL_NO_CCC,
    AngioSequence,
    CccAnnotation,
    CenterlineSet,
    Clip,
    ClipError,
    FoldAssignment,
    MaskConfig,
    SynthConfig,
    ValidationError,
)
from cccdetect.data.clips import (
    select_clip_annotated,
    select_clip_by_vesselness,
    zscore_normalize,
)
from cccdetect.data.masks import gaussian_mask
from cccdetect.data.folds import patient_kfold
from cccdetect.data.synth import SynthDataset, SynthSample, synth_generate
from cccdetect.data.store import (
    load_annotation_records,
    load_centerline_file,
    load_dataset_dir,
    load_sequence_dir,
    parse_annotation_file,
    save_dataset_dir,
    save_sequence_dir,
    write_annotation_file,
    write_centerline_file,
)

__all__ = [
    "LABEL_CCC",
    "LABEL_NO_CCC",
    "AngioSequence",
    "CccAnnotation",
    "CenterlineSet",
    "Clip",
    "ClipError",
    "FoldAssignment",
    "MaskConfig",
    "SynthConfig",
    "ValidationError",
    "select_clip_annotated",
    "select_clip_by_vesselness",
    "zscore_normalize",
    "gaussian_mask",
    "patient_kfold",
    "SynthDataset",
    "SynthSample",
    "synth_generate",
    "parse_annotation_file",
    "write_annotation_file",
    "load_annotation_records",
    "load_centerline_file",
    "write_centerline_file",
    "load_sequence_dir",
    "save_sequence_dir",
    "load_dataset_dir",
    "save_dataset_dir",
]
