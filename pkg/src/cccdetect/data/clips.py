"""Clip window selection and normalization."""

from __future__ import annotations

import numpy as np

from cccdetect.data.types import (
    CLIP_FRAMES,
    LABEL_CCC,
    LABEL_NO_CCC,
    AngioSequence,
    CccAnnotation,
    Clip,
    ClipError,
)

HALF_SPAN = CLIP_FRAMES // 2
DEGENERATE_STD = 1e-8


def _fit_window(center: int, frame_count: int) -> list:
    """Indices [center-5 .. center+5], shifted minimally to stay in bounds."""
    if frame_count < CLIP_FRAMES:
        raise ClipError(f"need at least {CLIP_FRAMES} frames for a clip, sequence has {frame_count}")
    start = center - HALF_SPAN
    start = min(max(start, 0), frame_count - CLIP_FRAMES)
    return list(range(start, start + CLIP_FRAMES))


def select_clip_annotated(seq: AngioSequence, ann: CccAnnotation) -> Clip:
    """Window around the annotated frame; labels the clip positive."""
    if (ann.patient_id, ann.ica_id) != (seq.patient_id, seq.ica_id):
        raise ClipError(
            f"annotation for {ann.patient_id}/{ann.ica_id} does not match sequence "
            f"{seq.patient_id}/{seq.ica_id}")
    if ann.frame_index >= seq.frame_count:
        raise ClipError(f"annotated frame {ann.frame_index} outside sequence of {seq.frame_count} frames")
    idx = _fit_window(ann.frame_index, seq.frame_count)
    return Clip(
        frames=seq.frames[idx],
        label=LABEL_CCC,
        patient_id=seq.patient_id,
        ica_id=seq.ica_id,
        selected_indices=idx,
    )


def select_clip_by_vesselness(seq: AngioSequence, scores) -> Clip:
    """Window around the highest-scoring frame (first index on ties); labels negative."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (seq.frame_count,):
        raise ClipError(
            f"vesselness scores length {scores.shape} does not match frame count {seq.frame_count}")
    center = int(np.argmax(scores))
    idx = _fit_window(center, seq.frame_count)
    return Clip(
        frames=seq.frames[idx],
        label=LABEL_NO_CCC,
        patient_id=seq.patient_id,
        ica_id=seq.ica_id,
        selected_indices=idx,
    )


def zscore_normalize(clip: Clip) -> Clip:
    """Zero-mean unit-std over all 11 frames' pixels jointly (population std).

    A constant clip (std below 1e-8) normalizes to all zeros instead of
    blowing up.
    """
    x = clip.frames.astype(np.float64)
    mean = x.mean()
    std = x.std()
    if std < DEGENERATE_STD:
        frames = np.zeros_like(clip.frames)
    else:
        frames = ((x - mean) / std).astype(np.float32)
    return Clip(
        frames=frames,
        label=clip.label,
        patient_id=clip.patient_id,
        ica_id=clip.ica_id,
        selected_indices=list(clip.selected_indices),
    )
