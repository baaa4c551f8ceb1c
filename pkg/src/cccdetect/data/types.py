"""Domain types for the data pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LABEL_CCC = "ccc"
LABEL_NO_CCC = "no_ccc"

CLIP_FRAMES = 11

RENTROP_RANGE = (0, 3)
FLOW_GRADE_RANGE = (1, 4)
LANDMARK_KINDS = ("collateral", "donor", "receiver")


class ValidationError(ValueError):
    """A record violated a declared invariant; the message names the field."""


class ClipError(ValueError):
    """A sequence cannot produce a valid clip window."""


@dataclass
class AngioSequence:
    """One ICA: an ordered stack of grayscale frames in [0, 1]."""

    patient_id: str
    ica_id: str
    frames: np.ndarray                       # (F, H, W) float32
    pixel_spacing_mm: float | None = None
    meta: dict = field(default_factory=dict)  # optional provenance (e.g. synth render params)

    def __post_init__(self):
        if not self.patient_id or not self.ica_id:
            raise ValidationError("sequence ids must be non-empty")
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 3 or self.frames.shape[0] < 1:
            raise ValidationError(f"sequence {self.ica_id}: frames must be (F,H,W) with F>=1, got {self.frames.shape}")
        if self.pixel_spacing_mm is not None and not self.pixel_spacing_mm > 0:
            raise ValidationError(f"sequence {self.ica_id}: pixel_spacing_mm must be positive")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


@dataclass
class CccAnnotation:
    """One annotated frame: landmarks, grades, and measured collateral size."""

    patient_id: str
    ica_id: str
    frame_index: int
    landmarks: dict                 # kind -> (x, y) pixel coordinates
    rentrop_grade: int
    pathway: str
    flow_grade: int
    blush_grade: int
    donor_segment: str
    receiving_segment: str
    collateral_size_px: float

    def validate(self, frame_count=None, width=None, height=None, record_index=None):
        """Check declared ranges; image-bound checks run when dims are known."""
        where = "" if record_index is None else f"record {record_index}: "
        if not self.patient_id or not self.ica_id:
            raise ValidationError(f"{where}patient_id/ica_id must be non-empty")
        if not isinstance(self.frame_index, int) or self.frame_index < 0:
            raise ValidationError(f"{where}frame_index must be a non-negative integer, got {self.frame_index!r}")
        missing = [k for k in LANDMARK_KINDS if k not in self.landmarks]
        if missing:
            raise ValidationError(f"{where}missing landmark(s): {', '.join(missing)}")
        for kind in LANDMARK_KINDS:
            pt = self.landmarks[kind]
            if len(pt) != 2:
                raise ValidationError(f"{where}landmark {kind} must be an (x, y) pair, got {pt!r}")
        lo, hi = RENTROP_RANGE
        if not (isinstance(self.rentrop_grade, int) and lo <= self.rentrop_grade <= hi):
            raise ValidationError(f"{where}rentrop_grade {self.rentrop_grade!r} outside {lo}..{hi}")
        lo, hi = FLOW_GRADE_RANGE
        if not (isinstance(self.flow_grade, int) and lo <= self.flow_grade <= hi):
            raise ValidationError(f"{where}flow_grade {self.flow_grade!r} outside {lo}..{hi}")
        if not isinstance(self.blush_grade, int):
            raise ValidationError(f"{where}blush_grade must be an integer code, got {self.blush_grade!r}")
        if not isinstance(self.pathway, str) or not self.pathway:
            raise ValidationError(f"{where}pathway must be a non-empty string")
        if not self.donor_segment or not self.receiving_segment:
            raise ValidationError(f"{where}donor_segment/receiving_segment must be non-empty")
        if not self.collateral_size_px > 0:
            raise ValidationError(f"{where}collateral_size_px must be positive, got {self.collateral_size_px!r}")
        if frame_count is not None and self.frame_index >= frame_count:
            raise ValidationError(
                f"{where}frame_index {self.frame_index} outside sequence of {frame_count} frames")
        if width is not None and height is not None:
            for kind in LANDMARK_KINDS:
                x, y = self.landmarks[kind]
                if not (0 <= x < width and 0 <= y < height):
                    raise ValidationError(
                        f"{where}landmark {kind} at ({x}, {y}) outside {width}x{height} image")
        return self


@dataclass
class Clip:
    """An 11-frame window cut from a sequence, optionally z-score normalized."""

    frames: np.ndarray              # (11, H, W) float32
    label: str                      # LABEL_CCC or LABEL_NO_CCC
    patient_id: str
    ica_id: str
    selected_indices: list

    def __post_init__(self):
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if self.frames.shape[0] != CLIP_FRAMES:
            raise ClipError(f"clip must hold exactly {CLIP_FRAMES} frames, got {self.frames.shape[0]}")
        if self.label not in (LABEL_CCC, LABEL_NO_CCC):
            raise ValidationError(f"clip label must be {LABEL_CCC!r} or {LABEL_NO_CCC!r}, got {self.label!r}")
        idx = list(self.selected_indices)
        if len(idx) != CLIP_FRAMES or any(b - a != 1 for a, b in zip(idx, idx[1:])) or idx[0] < 0:
            raise ClipError(f"selected_indices must be {CLIP_FRAMES} consecutive ascending in-bounds ints, got {idx}")
        self.selected_indices = idx

    @property
    def target(self) -> int:
        return 1 if self.label == LABEL_CCC else 0


@dataclass
class CenterlineSet:
    """Vessel centerlines: polylines of (x, y, radius_px) points."""

    polylines: list                 # list of (P, 3) float arrays

    def __post_init__(self):
        cleaned = []
        for i, poly in enumerate(self.polylines):
            arr = np.asarray(poly, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 3:
                raise ValidationError(f"polyline {i} must be (P, 3) [x, y, radius], got shape {arr.shape}")
            if arr.shape[0] < 2:
                raise ValidationError(f"polyline {i} needs >= 2 points, got {arr.shape[0]}")
            if not np.all(arr[:, 2] > 0):
                raise ValidationError(f"polyline {i} has non-positive radius")
            cleaned.append(arr)
        self.polylines = cleaned

    def __len__(self):
        return len(self.polylines)


@dataclass
class MaskConfig:
    sigma_px: float = 0.75

    def __post_init__(self):
        if not self.sigma_px > 0:
            raise ValidationError(f"sigma_px must be positive, got {self.sigma_px}")


@dataclass
class FoldAssignment:
    k: int
    by_patient: dict                # patient_id -> fold index
    seed: int

    def fold_of(self, patient_id: str) -> int:
        return self.by_patient[patient_id]

    def patients_in(self, fold: int):
        return sorted(p for p, f in self.by_patient.items() if f == fold)

    def fold_sizes(self):
        sizes = [0] * self.k
        for f in self.by_patient.values():
            sizes[f] += 1
        return sizes


@dataclass
class SynthConfig:
    """Knobs for the procedural angiography generator.

    Vessels are dark curvilinear trees on a noisy bright background with a
    contrast profile over frames; positive sequences add a thin bridging
    vessel between the two trees during a window around the annotated
    frame.
    """

    n_sequences: int
    positive_ratio: float = 0.5
    image_size: int = 64
    frames_per_sequence: int = 15
    seed: int = 0
    noise_sigma: float = 0.02
    texture_amp: float = 0.015
    background_range: tuple = (0.84, 0.92)
    vessel_depth_range: tuple = (0.80, 0.95)
    tree_radius_range: tuple = (1.8, 2.8)
    collateral_radius_range: tuple = (1.1, 1.5)
    collateral_depth_scale: float = 1.0
    collateral_window: int = 2
    max_icas_per_patient: int = 1
    sigma_px: float = 0.75

    def __post_init__(self):
        if self.n_sequences < 1:
            raise ValidationError(f"n_sequences must be >= 1, got {self.n_sequences}")
        if not 0.0 <= self.positive_ratio <= 1.0:
            raise ValidationError(f"positive_ratio must lie in [0, 1], got {self.positive_ratio}")
        if self.image_size < 32:
            raise ValidationError(f"image_size must be >= 32, got {self.image_size}")
        if self.frames_per_sequence < CLIP_FRAMES:
            raise ValidationError(
                f"frames_per_sequence must be >= {CLIP_FRAMES}, got {self.frames_per_sequence}")
        if self.max_icas_per_patient < 1:
            raise ValidationError("max_icas_per_patient must be >= 1")
        if not self.collateral_depth_scale > 0:
            raise ValidationError("collateral_depth_scale must be positive")
