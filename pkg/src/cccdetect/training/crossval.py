"""Patient-level k-fold cross-validation and the run directory format.

For every fold a fresh classifier trains on the other folds and scores its
held-out fold after each epoch.  Out-of-fold predictions pool over the
whole dataset per epoch; the selected epoch maximizes pooled accuracy
(earliest epoch on ties) and the final metrics come from that epoch's
pooled predictions.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from cccdetect.data.clips import select_clip_annotated, select_clip_by_vesselness, zscore_normalize
from cccdetect.data.folds import patient_kfold
from cccdetect.data.types import FoldAssignment, LABEL_CCC, LABEL_NO_CCC
from cccdetect.evaluation import MetricsReport, confusion, metrics
from cccdetect.models import (
    FREEZE_NONE,
    CccClassifier,
    SegmentationModel,
    apply_freeze,
    load_pretrained,
    vesselness_score,
)
from cccdetect.nn import Checkpoint
from cccdetect.training.classify import (
    EpisodeConfig,
    FrozenFeatureCache,
    TrainConfig,
    fsl_predict,
    train_fsl,
    train_vanilla,
)

log = logging.getLogger(__name__)


@dataclass
class CrossValResult:
    k: int
    mode: str
    freeze: str
    seed: int
    selected_epoch: int                 # 1-based
    epoch_accuracy: list
    metrics: MetricsReport
    predictions: list                   # rows: (ica_id, epoch, fold, probability, label)
    folds: FoldAssignment
    fold_models: list                   # CccClassifier per fold, restored to the selected epoch
    fold_prototypes: list               # per fold: prototypes at the selected epoch (fsl) or None


def select_best_epoch(epoch_accuracy) -> int:
    """1-based epoch of the highest pooled accuracy; earliest wins ties."""
    if not len(epoch_accuracy):
        raise ValueError("no epoch accuracies to select from")
    return int(np.argmax(epoch_accuracy)) + 1


def frame_vesselness_scores(seq, seg_model: SegmentationModel) -> list:
    """Per-frame vesselness from the segmentation model, batched per sequence."""
    preds, _ = seg_model.forward(seq.frames[:, None, :, :], want_cache=False)
    return [vesselness_score(p[0]) for p in preds]


def intensity_vesselness_scores(seq) -> list:
    """Fallback proxy when no segmentation model exists: mean darkness."""
    return [float(1.0 - frame.mean(dtype=np.float64)) for frame in seq.frames]


def build_clips(samples, seg_model: SegmentationModel | None = None):
    """Annotated window for positives, vesselness-centered window for
    negatives, z-score normalized, ordered by (patient_id, ica_id)."""
    clips = []
    for sample in sorted(samples, key=lambda s: (s.sequence.patient_id, s.sequence.ica_id)):
        seq = sample.sequence
        if sample.annotation is not None:
            clip = select_clip_annotated(seq, sample.annotation)
        else:
            if seg_model is not None:
                scores = frame_vesselness_scores(seq, seg_model)
            else:
                scores = intensity_vesselness_scores(seq)
            clip = select_clip_by_vesselness(seq, scores)
        clips.append(zscore_normalize(clip))
    return clips


def run_crossval(samples, cfg: TrainConfig, k: int = 4,
                 ep_cfg: EpisodeConfig | None = None,
                 pretrained: Checkpoint | None = None,
                 seg_model: SegmentationModel | None = None) -> CrossValResult:
    """Train k fold models and select the best pooled epoch.

    ``pretrained`` (a segmentation checkpoint) provides backbone weights
    for the pretrained freeze modes; ``seg_model`` (or the checkpoint,
    from which one is built) also drives vesselness-based clip selection
    for negative sequences.
    """
    if cfg.freeze != FREEZE_NONE and pretrained is None:
        raise ValueError(f"freeze mode {cfg.freeze!r} requires a pretrained checkpoint")
    if seg_model is None and pretrained is not None:
        seg_model = SegmentationModel.from_checkpoint(pretrained)
    if ep_cfg is None:
        ep_cfg = EpisodeConfig()

    clips = build_clips(samples, seg_model=seg_model)
    by_ica = {c.ica_id: c for c in clips}
    if len(by_ica) != len(clips):
        raise ValueError("duplicate ica_id in dataset")

    patients = sorted({c.patient_id for c in clips})
    folds = patient_kfold(patients, k=k, seed=cfg.seed)

    shared_cache = FrozenFeatureCache() if cfg.freeze == "pretrained_frozen" else None
    predictions = []          # (ica_id, epoch, fold, probability, label)
    fold_models = []
    fold_histories = []
    for f in range(k):
        train_clips = [c for c in clips if folds.fold_of(c.patient_id) != f]
        eval_clips = [c for c in clips if folds.fold_of(c.patient_id) == f]
        train_labels = {c.label for c in train_clips}
        if train_labels != {LABEL_CCC, LABEL_NO_CCC}:
            raise ValueError(f"fold {f}: training folds lack a class (have {sorted(train_labels)})")
        fold_cfg = replace(cfg, seed=cfg.seed + f)
        model = CccClassifier(seed=fold_cfg.seed)
        if pretrained is not None and cfg.freeze != FREEZE_NONE:
            load_pretrained(model, pretrained)
        apply_freeze(model, cfg.freeze)
        log.info("fold %d: %d train / %d eval clips (%s, freeze=%s)",
                 f, len(train_clips), len(eval_clips), cfg.mode, cfg.freeze)
        if cfg.mode == "vanilla":
            history = train_vanilla(model, train_clips, fold_cfg, eval_clips=eval_clips,
                                    feature_cache=shared_cache)
        else:
            history = train_fsl(model, train_clips, fold_cfg, ep_cfg, eval_clips=eval_clips,
                                feature_cache=shared_cache)
        for epoch0, probs in enumerate(history.eval_probs):
            for clip, prob in zip(eval_clips, probs):
                predictions.append((clip.ica_id, epoch0 + 1, f, float(prob), clip.target))
        fold_models.append(model)
        fold_histories.append(history)

    n_icas = len(clips)
    epoch_accuracy = []
    for epoch in range(1, cfg.epochs + 1):
        rows = [r for r in predictions if r[1] == epoch]
        if len(rows) != n_icas or len({r[0] for r in rows}) != n_icas:
            raise RuntimeError(f"epoch {epoch}: pooled predictions do not partition the dataset")
        correct = sum(1 for _, _, _, prob, label in rows if (prob > 0.5) == bool(label))
        epoch_accuracy.append(correct / n_icas)
    selected_epoch = select_best_epoch(epoch_accuracy)

    selected_rows = [r for r in predictions if r[1] == selected_epoch]
    report = metrics(confusion([(prob, label) for _, _, _, prob, label in selected_rows]))

    fold_prototypes = []
    for f, (model, history) in enumerate(zip(fold_models, fold_histories)):
        model.restore(history.snapshots[selected_epoch - 1])
        if cfg.mode == "fsl":
            fold_prototypes.append(history.prototypes[selected_epoch - 1])
        else:
            fold_prototypes.append(None)

    return CrossValResult(
        k=k, mode=cfg.mode, freeze=cfg.freeze, seed=cfg.seed,
        selected_epoch=selected_epoch,
        epoch_accuracy=epoch_accuracy,
        metrics=report,
        predictions=predictions,
        folds=folds,
        fold_models=fold_models,
        fold_prototypes=fold_prototypes,
    )


def write_run_dir(result: CrossValResult, out_dir, resolved_config: dict) -> Path:
    """Training run directory: config.json, per-fold checkpoints,
    predictions.csv, result.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    (out / "config.json").write_text(json.dumps(resolved_config, indent=2, sort_keys=True) + "\n")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["ica_id", "epoch", "fold", "probability", "label"])
    for ica_id, epoch, fold, prob, label in sorted(result.predictions, key=lambda r: (r[1], r[2], r[0])):
        writer.writerow([ica_id, epoch, fold, repr(prob), label])
    (out / "predictions.csv").write_text(buf.getvalue())

    payload = {
        "selected_epoch": result.selected_epoch,
        "epoch_accuracy": result.epoch_accuracy,
        "metrics": result.metrics.as_dict(),
        "k": result.k,
        "mode": result.mode,
        "freeze": result.freeze,
        "seed": result.seed,
        "n_icas": len({r[0] for r in result.predictions}),
        "folds": {p: result.folds.by_patient[p] for p in sorted(result.folds.by_patient)},
    }
    (out / "result.json").write_text(json.dumps(payload, indent=2) + "\n")

    for f, model in enumerate(result.fold_models):
        provenance = {
            "seed": result.seed + f,
            "epochs": result.selected_epoch,
            "config_hash": _config_hash(resolved_config),
            "fold": f,
        }
        model.save(out / f"fold{f}.ckpt", provenance)
    return out


def _config_hash(resolved_config: dict) -> str:
    import hashlib
    blob = json.dumps(resolved_config, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
