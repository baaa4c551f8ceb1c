"""Backbone pretraining on the vessel-segmentation proxy task.

Masks come from the centerline ground truth; training is MSE regression
onto the smooth masks.  Sequences split 70/10/20 into train/val/test with
a seeded shuffle, training runs for the configured number of epochs, and
the weights from the epoch with minimum validation loss are retained.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from cccdetect.data.masks import gaussian_mask
from cccdetect.data.types import MaskConfig
from cccdetect.evaluation import dice_pixel_metrics
from cccdetect.models import BackboneConfig, SegmentationModel
from cccdetect.nn import OptimConfig, adam_step, loss_mse

log = logging.getLogger(__name__)


@dataclass
class PretrainConfig:
    epochs: int = 100
    learning_rate: float = 0.001   # the regression proxy task tolerates a hotter rate
    batch_size: int = 4
    seed: int = 0
    sigma_px: float = 0.75
    train_fraction: float = 0.7
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not 0 < self.train_fraction < 1 or not 0 < self.val_fraction < 1:
            raise ValueError("fractions must lie in (0, 1)")
        if self.train_fraction + self.val_fraction >= 1:
            raise ValueError("train + val fractions must leave room for a test split")


@dataclass
class PretrainResult:
    model: SegmentationModel
    best_epoch: int                      # 1-based epoch of minimum validation loss
    train_losses: list
    val_losses: list
    test_dice: float
    test_sensitivity: float
    test_specificity: float
    split: dict                          # ica_id lists per split
    config: PretrainConfig = None


def _split_by_sequence(pairs, cfg: PretrainConfig):
    n = len(pairs)
    order = np.random.default_rng([cfg.seed, 0x59117]).permutation(n)
    n_train = int(round(cfg.train_fraction * n))
    n_val = int(round(cfg.val_fraction * n))
    train = [pairs[i] for i in order[:n_train]]
    val = [pairs[i] for i in order[n_train:n_train + n_val]]
    test = [pairs[i] for i in order[n_train + n_val:]]
    if not train or not val or not test:
        raise ValueError(
            f"70/10/20 split of {n} sequences leaves an empty part "
            f"(train={len(train)}, val={len(val)}, test={len(test)})")
    return train, val, test


def _frame_mask_pairs(seq_pairs, sigma_px):
    mask_cfg = MaskConfig(sigma_px=sigma_px)
    out = []
    for seq, centerlines in seq_pairs:
        mask = gaussian_mask(centerlines, seq.height, seq.width, mask_cfg)
        for frame in seq.frames:
            out.append((frame, mask))
    return out


def _mean_loss(model, items, batch_size=8):
    total = 0.0
    for i in range(0, len(items), batch_size):
        chunk = items[i:i + batch_size]
        x = np.stack([f for f, _ in chunk])[:, None]
        y = np.stack([m for _, m in chunk])[:, None]
        pred, _ = model.forward(x, want_cache=False)
        loss, _ = loss_mse(pred, y)
        total += loss * len(chunk)
    return total / len(items)


def pretrain_segmentation(pairs, cfg: PretrainConfig = None,
                          backbone_cfg: BackboneConfig = None) -> PretrainResult:
    """Train backbone + segmentation head on (sequence, centerlines) pairs.

    Returns the model restored to its best-validation-epoch weights along
    with per-epoch losses and test-set Dice/sensitivity/specificity at
    threshold 0.5.
    """
    cfg = cfg or PretrainConfig()
    if not pairs:
        raise ValueError("pretraining dataset is empty")
    train_seqs, val_seqs, test_seqs = _split_by_sequence(list(pairs), cfg)

    train_items = _frame_mask_pairs(train_seqs, cfg.sigma_px)
    val_items = _frame_mask_pairs(val_seqs, cfg.sigma_px)
    test_items = _frame_mask_pairs(test_seqs, cfg.sigma_px)

    model = SegmentationModel(backbone_cfg, seed=cfg.seed)
    optim = OptimConfig(learning_rate=cfg.learning_rate)
    rng = np.random.default_rng([cfg.seed, 0x7124])

    best_val = np.inf
    best_epoch = 0
    best_snapshot = None
    train_losses = []
    val_losses = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_items))
        epoch_loss = 0.0
        for i in range(0, len(order), cfg.batch_size):
            batch = [train_items[j] for j in order[i:i + cfg.batch_size]]
            x = np.stack([f for f, _ in batch])[:, None]
            y = np.stack([m for _, m in batch])[:, None]
            for p in model.params:
                p.zero_grad()
            pred, cache = model.forward(x)
            loss, grad = loss_mse(pred, y)
            model.backward(grad, cache)
            adam_step(model.params, optim)
            epoch_loss += loss * len(batch)
        train_losses.append(epoch_loss / len(train_items))
        val_loss = _mean_loss(model, val_items)
        val_losses.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_snapshot = {p.name: p.value.copy() for p in model.params}
        log.debug("pretrain epoch %d: train %.5f val %.5f", epoch, train_losses[-1], val_loss)

    for p in model.params:
        p.value[...] = best_snapshot[p.name]

    dices, senss, specs = [], [], []
    for frame, mask in test_items:
        pred = model.predict_mask(frame)
        r = dice_pixel_metrics(pred, mask, threshold=0.5)
        dices.append(r.dice)
        if r.sensitivity is not None:
            senss.append(r.sensitivity)
        if r.specificity is not None:
            specs.append(r.specificity)

    return PretrainResult(
        model=model,
        best_epoch=best_epoch,
        train_losses=train_losses,
        val_losses=val_losses,
        test_dice=float(np.mean(dices)),
        test_sensitivity=float(np.mean(senss)) if senss else 0.0,
        test_specificity=float(np.mean(specs)) if specs else 0.0,
        split={
            "train": [s.ica_id for s, _ in train_seqs],
            "val": [s.ica_id for s, _ in val_seqs],
            "test": [s.ica_id for s, _ in test_seqs],
        },
        config=cfg,
    )
