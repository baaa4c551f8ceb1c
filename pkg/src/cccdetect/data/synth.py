"""Procedural angiography generator.

Renders dark curvilinear vessel trees on a noisy bright background, with a
contrast profile that ramps in, plateaus, and washes out over the frame
sequence.  Positive sequences contain an extra thin bridging vessel (the
synthetic collateral) connecting the two trees during a window of frames
around the annotated frame, plus the matching annotation record.  The
emitted centerlines are the ground truth the rendered vessels follow, so
segmentation targets and rendered pixels stay mutually consistent.

Everything is deterministic per seed: each sequence draws from its own
child generator of the master seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cccdetect.data.masks import gaussian_mask
from cccdetect.data.types import (
    LABEL_CCC,
    LABEL_NO_CCC,
    AngioSequence,
    CccAnnotation,
    CenterlineSet,
    MaskConfig,
    SynthConfig,
)

PATHWAYS = ("septal", "epicardial", "atrial")
SEGMENTS = ("LAD", "LCX", "RCA", "DIAG", "OM")


@dataclass
class SynthSample:
    sequence: AngioSequence
    centerlines: CenterlineSet
    annotation: CccAnnotation | None   # None for negative sequences

    @property
    def label(self) -> str:
        return LABEL_CCC if self.annotation is not None else LABEL_NO_CCC


@dataclass
class SynthDataset:
    config: SynthConfig
    samples: list

    def positives(self):
        return [s for s in self.samples if s.annotation is not None]

    def negatives(self):
        return [s for s in self.samples if s.annotation is None]

    def annotations(self):
        return [s.annotation for s in self.samples if s.annotation is not None]


def _bezier(p0, p1, p2, n):
    """Quadratic Bezier sampled at n points (stays in the control hull)."""
    t = np.linspace(0.0, 1.0, n)[:, None]
    return ((1 - t) ** 2) * p0 + 2 * (1 - t) * t * p1 + (t ** 2) * p2


def _arc_length(poly):
    return float(np.sum(np.hypot(np.diff(poly[:, 0]), np.diff(poly[:, 1]))))


def _tree_polylines(rng, size, x_lo, x_hi, r_root, min_arc):
    """One vessel tree inside the [x_lo, x_hi] band: a main path plus as many
    branches as it takes to reach min_arc total length (keeps the dice
    margin between rendered frames and centerline masks deterministic)."""
    margin = 3.0

    def clamp_pt(p):
        return np.array([np.clip(p[0], x_lo, x_hi), np.clip(p[1], margin, size - margin)])

    start = np.array([rng.uniform(x_lo, x_hi), rng.choice([margin, size - margin])])
    end = clamp_pt(np.array([rng.uniform(x_lo, x_hi), size - start[1] + rng.uniform(-size / 6, size / 6)]))
    mid = clamp_pt((start + end) / 2 + rng.uniform(-size / 5, size / 5, size=2))
    n_main = max(12, int(1.5 * np.hypot(*(end - start))))
    main_xy = _bezier(start, mid, end, n_main)
    r_tip = max(0.8, r_root * 0.4)
    radii = np.linspace(r_root, r_tip, n_main)
    main = np.column_stack([main_xy, radii])

    polys = [main]
    total = _arc_length(main)
    for _ in range(8):
        if total >= min_arc and len(polys) >= 3:
            break
        i0 = int(rng.uniform(0.25, 0.75) * n_main)
        b_start = main_xy[i0]
        b_end = clamp_pt(b_start + rng.uniform(-1, 1, size=2) * size * 0.4)
        b_mid = clamp_pt((b_start + b_end) / 2 + rng.uniform(-size / 8, size / 8, size=2))
        if np.hypot(*(b_end - b_start)) < size * 0.12:
            continue
        n_b = max(8, int(1.5 * np.hypot(*(b_end - b_start))))
        b_xy = _bezier(b_start, b_mid, b_end, n_b)
        b_radii = np.linspace(radii[i0] * 0.7, max(0.7, radii[i0] * 0.3), n_b)
        branch = np.column_stack([b_xy, b_radii])
        polys.append(branch)
        total += _arc_length(branch)
    return polys


def _bridge_polyline(rng, size, tree_a, tree_b, radius):
    """Shortest-ish thin connection between the two main paths."""
    main_a, main_b = tree_a[0], tree_b[0]
    cand_a = main_a[:: max(1, len(main_a) // 24)]
    cand_b = main_b[:: max(1, len(main_b) // 24)]
    d = np.hypot(cand_a[:, None, 0] - cand_b[None, :, 0], cand_a[:, None, 1] - cand_b[None, :, 1])
    ia, ib = np.unravel_index(int(np.argmin(d)), d.shape)
    pa, pb = cand_a[ia, :2].copy(), cand_b[ib, :2].copy()
    perp = np.array([-(pb - pa)[1], (pb - pa)[0]])
    norm = np.hypot(*perp)
    if norm > 0:
        perp /= norm
    mid = (pa + pb) / 2 + perp * rng.uniform(-size / 20, size / 20)
    mid = np.clip(mid, 2.0, size - 2.0)
    n = max(8, int(2.0 * np.hypot(*(pb - pa))))
    xy = _bezier(pa, mid, pb, n)
    return np.column_stack([xy, np.full(n, radius)]), pa, pb


def _smooth_field(rng, size, cells=8):
    """Low-frequency bilinear noise field in roughly [-1, 1]."""
    coarse = rng.normal(0.0, 0.6, (cells + 1, cells + 1))
    pos = np.linspace(0.0, cells, size)
    i0 = np.clip(pos.astype(int), 0, cells - 1)
    f = pos - i0
    a = coarse[i0][:, i0]
    b = coarse[i0][:, i0 + 1]
    c = coarse[i0 + 1][:, i0]
    d = coarse[i0 + 1][:, i0 + 1]
    fx = f[None, :]
    fy = f[:, None]
    return a * (1 - fx) * (1 - fy) + b * fx * (1 - fy) + c * (1 - fx) * fy + d * fx * fy


def _contrast_profile(rng, n_frames):
    """Contrast arrival: gentle ramp in over ~25%, plateau, gentle wash out."""
    alpha = np.ones(n_frames)
    ramp = max(1, int(round(0.25 * n_frames)))
    alpha[:ramp] = np.linspace(0.85, 1.0, ramp)
    tail = max(1, int(round(0.2 * n_frames)))
    alpha[n_frames - tail:] = np.linspace(1.0, 0.93, tail)
    alpha += rng.uniform(-0.01, 0.01, n_frames)
    return np.clip(alpha, 0.05, 1.0)


def _bridge_profile(n_frames, center, window):
    """Collateral filling: full inside +-window, a 1-frame shoulder, then gone.

    The clip cut around the annotated frame spans +-5 frames, so with the
    default window the collateral is absent from the outer clip frames and
    present mid-clip; that temporal contrast is the class signal.
    """
    beta = np.zeros(n_frames)
    for t in range(n_frames):
        dist = abs(t - center)
        if dist <= window:
            beta[t] = 1.0
        elif dist == window + 1:
            beta[t] = 0.5
    return beta


def _render_sequence(rng, cfg: SynthConfig, positive: bool):
    size = cfg.image_size
    n_frames = cfg.frames_per_sequence
    mask_cfg = MaskConfig(sigma_px=cfg.sigma_px)

    # a wide central corridor keeps the trees apart so the bridging
    # collateral has an unambiguous span to cross
    gap = size / 3.0
    r_a = rng.uniform(*cfg.tree_radius_range)
    r_b = rng.uniform(*cfg.tree_radius_range)
    min_arc = 2.2 * size
    tree_a = _tree_polylines(rng, size, 2.0, size / 2 - gap / 2, r_a, min_arc)
    tree_b = _tree_polylines(rng, size, size / 2 + gap / 2, size - 2.0, r_b, min_arc)
    tree_mask = gaussian_mask(CenterlineSet(tree_a + tree_b), size, size, mask_cfg)

    annotated_frame = int(rng.integers(5, n_frames - 5))
    bridge_poly = None
    bridge_info = None
    bridge_mask = np.zeros_like(tree_mask)
    if positive:
        radius = rng.uniform(*cfg.collateral_radius_range)
        bridge_poly, pa, pb = _bridge_polyline(rng, size, tree_a, tree_b, radius)
        bridge_mask = gaussian_mask(CenterlineSet([bridge_poly]), size, size, mask_cfg)
        bridge_info = (pa, pb, radius)
        # the collateral is absent from some frames while the centerline
        # ground truth always carries it; growing the trees bounds the
        # resulting per-frame dice deficit
        for _ in range(6):
            t_px = int(np.sum(tree_mask >= 0.5))
            b_px = int(np.sum((bridge_mask >= 0.5) & (tree_mask < 0.5)))
            if b_px == 0 or 2 * t_px / (2 * t_px + b_px) >= 0.935:
                break
            side = tree_a if rng.random() < 0.5 else tree_b
            lo, hi = (2.0, size / 2 - gap / 2) if side is tree_a else (size / 2 + gap / 2, size - 2.0)
            extra = _tree_polylines(rng, size, lo, hi, rng.uniform(*cfg.tree_radius_range), 0.0)
            side.append(extra[0])
            tree_mask = gaussian_mask(CenterlineSet(tree_a + tree_b), size, size, mask_cfg)

    background = rng.uniform(*cfg.background_range)
    depth = rng.uniform(*cfg.vessel_depth_range)
    alpha = _contrast_profile(rng, n_frames)
    beta = _bridge_profile(n_frames, annotated_frame, cfg.collateral_window) if positive else np.zeros(n_frames)
    texture = _smooth_field(rng, size) * cfg.texture_amp

    frames = np.empty((n_frames, size, size), dtype=np.float32)
    for t in range(n_frames):
        vessel = np.maximum(tree_mask * alpha[t],
                            bridge_mask * (alpha[t] * beta[t] * cfg.collateral_depth_scale))
        img = background * (1.0 - depth * vessel) + texture + rng.normal(0.0, cfg.noise_sigma, (size, size))
        # quantize to the 8-bit grid so in-memory frames equal the PNG round trip
        frames[t] = np.round(np.clip(img, 0.005, 0.995) * 255.0).astype(np.float32) / 255.0

    polylines = tree_a + tree_b + ([bridge_poly] if bridge_poly is not None else [])
    meta = {
        "synth": {
            "background": float(background),
            "vessel_depth": float(depth),
            "alpha": [float(a) for a in alpha],
            "beta": [float(b) for b in beta],
            "collateral_depth_scale": float(cfg.collateral_depth_scale),
        }
    }
    return frames, CenterlineSet(polylines), annotated_frame, bridge_info, meta


def synth_generate(cfg: SynthConfig) -> SynthDataset:
    """Generate sequences, centerline ground truth, and positive annotations."""
    n = cfg.n_sequences
    n_pos = int(round(n * cfg.positive_ratio))
    master = np.random.default_rng([cfg.seed, 0xA27])
    pos_slots = set(int(i) for i in master.permutation(n)[:n_pos])

    ica_counts = []
    if cfg.max_icas_per_patient > 1:
        remaining = n
        pidx = 0
        while remaining > 0:
            c = int(master.integers(1, cfg.max_icas_per_patient + 1))
            c = min(c, remaining)
            ica_counts.append(c)
            remaining -= c
            pidx += 1
    else:
        ica_counts = [1] * n

    samples = []
    seq_idx = 0
    for p, count in enumerate(ica_counts):
        patient_id = f"P{p:04d}"
        for j in range(count):
            rng = np.random.default_rng([cfg.seed, 1, seq_idx])
            positive = seq_idx in pos_slots
            ica_id = f"{patient_id}-I{j}"
            frames, centerlines, ann_frame, bridge_info, meta = _render_sequence(rng, cfg, positive)
            spacing = float(np.round(rng.uniform(0.25, 0.45), 4)) if rng.random() < 0.3 else None
            seq = AngioSequence(
                patient_id=patient_id,
                ica_id=ica_id,
                frames=frames,
                pixel_spacing_mm=spacing,
                meta=meta,
            )
            annotation = None
            if positive:
                pa, pb, radius = bridge_info
                mid = (pa + pb) / 2
                annotation = CccAnnotation(
                    patient_id=patient_id,
                    ica_id=ica_id,
                    frame_index=ann_frame,
                    landmarks={
                        "collateral": (float(np.clip(mid[0], 0, cfg.image_size - 1)),
                                       float(np.clip(mid[1], 0, cfg.image_size - 1))),
                        "donor": (float(pa[0]), float(pa[1])),
                        "receiver": (float(pb[0]), float(pb[1])),
                    },
                    rentrop_grade=int(rng.integers(1, 4)),
                    pathway=str(rng.choice(PATHWAYS)),
                    flow_grade=int(rng.integers(1, 5)),
                    blush_grade=int(rng.integers(0, 4)),
                    donor_segment=str(rng.choice(SEGMENTS)),
                    receiving_segment=str(rng.choice(SEGMENTS)),
                    collateral_size_px=float(np.round(2.0 * radius, 3)),
                ).validate(frame_count=cfg.frames_per_sequence,
                           width=cfg.image_size, height=cfg.image_size)
            samples.append(SynthSample(sequence=seq, centerlines=centerlines, annotation=annotation))
            seq_idx += 1
    return SynthDataset(config=cfg, samples=samples)


def hard_variant(cfg: SynthConfig) -> SynthConfig:
    """The harder rendering regime: more noise, thinner and fainter collaterals."""
    return SynthConfig(
        n_sequences=cfg.n_sequences,
        positive_ratio=cfg.positive_ratio,
        image_size=cfg.image_size,
        frames_per_sequence=cfg.frames_per_sequence,
        seed=cfg.seed,
        noise_sigma=0.05,
        texture_amp=0.025,
        background_range=cfg.background_range,
        vessel_depth_range=cfg.vessel_depth_range,
        tree_radius_range=cfg.tree_radius_range,
        collateral_radius_range=(0.6, 0.9),
        collateral_depth_scale=0.7,
        collateral_window=cfg.collateral_window,
        max_icas_per_patient=cfg.max_icas_per_patient,
        sigma_px=cfg.sigma_px,
    )
