"""Classification training: the vanilla BCE loop and the prototypical
few-shot loop, plus nearest-prototype inference."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from cccdetect.data.types import LABEL_CCC, LABEL_NO_CCC
from cccdetect.models import CccClassifier
from cccdetect.nn import OptimConfig, adam_step, loss_bce_logits

log = logging.getLogger(__name__)

CLASS_ORDER = (LABEL_NO_CCC, LABEL_CCC)


@dataclass
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.0001
    batch_size: int = 4
    seed: int = 0
    mode: str = "vanilla"        # vanilla | fsl
    freeze: str = "none"         # none | pretrained_unfrozen | pretrained_frozen

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.mode not in ("vanilla", "fsl"):
            raise ValueError(f"mode must be vanilla or fsl, got {self.mode!r}")


@dataclass
class EpisodeConfig:
    n_way: int = 2
    k_shot: int = 5
    n_query: int = 5
    episodes_per_epoch: int = 100

    def __post_init__(self):
        if self.n_way != 2:
            raise ValueError("this binary task always uses 2-way episodes")
        if self.k_shot < 1 or self.n_query < 1 or self.episodes_per_epoch < 1:
            raise ValueError("episode sizes must be >= 1")


@dataclass
class TrainHistory:
    train_losses: list = field(default_factory=list)
    eval_probs: list = field(default_factory=list)     # per epoch: list of probs for eval_clips
    snapshots: list = field(default_factory=list)      # per epoch: name -> value copy
    prototypes: list = field(default_factory=list)     # per epoch (fsl only): label -> embedding


class FrozenFeatureCache:
    """Per-clip concatenated backbone features, valid while the backbone is frozen."""

    def __init__(self):
        self._store = {}

    def get(self, model: CccClassifier, clip) -> np.ndarray:
        feats = self._store.get(clip.ica_id)
        if feats is None:
            feats = model.features(clip.frames)
            self._store[clip.ica_id] = feats
        return feats


def _forward(model, clip, cache, want_cache):
    if cache is not None:
        return model.forward_clip(features=cache.get(model, clip), want_cache=want_cache)
    return model.forward_clip(frames=clip.frames, want_cache=want_cache)


def _check_two_classes(clips):
    labels = {c.label for c in clips}
    if labels != {LABEL_CCC, LABEL_NO_CCC}:
        raise ValueError(f"training set must contain both classes, got labels {sorted(labels)}")


def _predict_probs_vanilla(model, clips, cache):
    return [_forward(model, c, cache, want_cache=False)[0] for c in clips]


def train_vanilla(model: CccClassifier, train_clips, cfg: TrainConfig,
                  eval_clips=(), feature_cache: FrozenFeatureCache | None = None) -> TrainHistory:
    """BCE-on-logits over seeded shuffled mini-batches with Adam updates.

    Per epoch the history records the training loss, probabilities on
    ``eval_clips``, and a full parameter snapshot (cross-validation scores
    every epoch from these).
    """
    _check_two_classes(train_clips)
    if feature_cache is not None and not model.backbone.frozen:
        raise ValueError("feature cache is only valid with a frozen backbone")
    optim = OptimConfig(learning_rate=cfg.learning_rate)
    rng = np.random.default_rng([cfg.seed, 0x7A11])
    history = TrainHistory()
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_clips))
        epoch_loss = 0.0
        for i in range(0, len(order), cfg.batch_size):
            batch = [train_clips[j] for j in order[i:i + cfg.batch_size]]
            for p in model.params:
                p.zero_grad()
            # the per-clip BCE gradient only needs the batch size, so each
            # clip backpropagates immediately and its caches die young
            batch_loss = 0.0
            for clip in batch:
                prob, logit, _, cache = _forward(model, clip, feature_cache, want_cache=True)
                loss_i, dlogit = loss_bce_logits(np.array([logit]), np.array([float(clip.target)]))
                model.backward_clip(cache, dlogit=float(dlogit[0]) / len(batch))
                batch_loss += loss_i / len(batch)
            adam_step(model.params, optim)
            epoch_loss += batch_loss * len(batch)
        history.train_losses.append(epoch_loss / len(train_clips))
        history.eval_probs.append(_predict_probs_vanilla(model, eval_clips, feature_cache))
        history.snapshots.append(model.snapshot())
        log.debug("vanilla epoch %d: loss %.5f", epoch, history.train_losses[-1])
    return history


# ----- prototypical training -----

def _squared_distances(embedding, prototypes):
    return {label: float(np.sum((embedding.astype(np.float64) - prototypes[label]) ** 2))
            for label in CLASS_ORDER}


def fsl_predict(clip_or_embedding, model: CccClassifier | None, prototypes) -> float:
    """Probability of CCC: the softmax-over-negative-squared-distances
    component of the ccc class.  Decides exactly like nearest-prototype."""
    for label in CLASS_ORDER:
        if prototypes is None or label not in prototypes:
            raise ValueError(f"missing prototype for class {label!r}")
    if isinstance(clip_or_embedding, np.ndarray) and clip_or_embedding.ndim == 1:
        emb = clip_or_embedding
    else:
        clip = clip_or_embedding
        _, _, emb, _ = model.forward_clip(frames=clip.frames, want_cache=False)
    d = _squared_distances(np.asarray(emb), {k: np.asarray(v, dtype=np.float64) for k, v in prototypes.items()})
    # softmax of (-d_ccc, -d_no) -> sigmoid of the difference, numerically stable
    return float(1.0 / (1.0 + np.exp(d[LABEL_CCC] - d[LABEL_NO_CCC])))


def episode_loss_and_grads(embeddings, labels, k_shot):
    """Prototypical loss on one episode and gradients w.r.t. each embedding.

    ``embeddings`` is (N, D) ordered support-first per class; ``labels``
    the class label per row.  Prototypes are the support means; queries
    score against softmax over negative squared distances.  Gradients flow
    into queries directly and into supports through the prototype means.
    Returns (loss, grads (N, D), prototypes dict).
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    n, dim = emb.shape
    support_idx = {}
    query_idx = {}
    for label in CLASS_ORDER:
        rows = [i for i in range(n) if labels[i] == label]
        if len(rows) <= k_shot:
            raise ValueError(f"class {label!r} needs more than k_shot={k_shot} rows in an episode")
        support_idx[label] = rows[:k_shot]
        query_idx[label] = rows[k_shot:]
    prototypes = {label: emb[support_idx[label]].mean(axis=0) for label in CLASS_ORDER}

    queries = [(i, label) for label in CLASS_ORDER for i in query_idx[label]]
    n_q = len(queries)
    grads = np.zeros_like(emb)
    dproto = {label: np.zeros(dim) for label in CLASS_ORDER}
    loss = 0.0
    for i, y in queries:
        d2 = np.array([np.sum((emb[i] - prototypes[c]) ** 2) for c in CLASS_ORDER])
        logits = -d2
        m = logits.max()
        logsumexp = m + np.log(np.sum(np.exp(logits - m)))
        y_pos = CLASS_ORDER.index(y)
        loss += (logsumexp - logits[y_pos]) / n_q
        p = np.exp(logits - logsumexp)
        for ci, c in enumerate(CLASS_ORDER):
            dlogit = (p[ci] - (1.0 if ci == y_pos else 0.0)) / n_q
            diff = emb[i] - prototypes[c]
            grads[i] += dlogit * (-2.0) * diff
            dproto[c] += dlogit * 2.0 * diff
    for label in CLASS_ORDER:
        for i in support_idx[label]:
            grads[i] += dproto[label] / k_shot
    return float(loss), grads.astype(np.float32), {k: v.copy() for k, v in prototypes.items()}


def _class_pools(clips):
    pools = {label: [] for label in CLASS_ORDER}
    for i, c in enumerate(clips):
        pools[c.label].append(i)
    return pools


def _mean_prototypes(model, clips, cache):
    sums = {label: None for label in CLASS_ORDER}
    counts = {label: 0 for label in CLASS_ORDER}
    for clip in clips:
        _, _, emb, _ = _forward(model, clip, cache, want_cache=False)
        emb = emb.astype(np.float64)
        if sums[clip.label] is None:
            sums[clip.label] = emb.copy()
        else:
            sums[clip.label] += emb
        counts[clip.label] += 1
    return {label: sums[label] / counts[label] for label in CLASS_ORDER}


def train_fsl(model: CccClassifier, train_clips, cfg: TrainConfig, ep_cfg: EpisodeConfig,
              eval_clips=(), feature_cache: FrozenFeatureCache | None = None) -> TrainHistory:
    """Episodic prototypical training.

    Each episode samples k_shot support and n_query query clips per class,
    takes one Adam step on the episode loss, and after every epoch the
    inference prototypes are recomputed as the per-class mean embedding
    over the full training set; eval probabilities use those prototypes.
    """
    _check_two_classes(train_clips)
    if feature_cache is not None and not model.backbone.frozen:
        raise ValueError("feature cache is only valid with a frozen backbone")
    pools = _class_pools(train_clips)
    needed = ep_cfg.k_shot + ep_cfg.n_query
    for label in CLASS_ORDER:
        if len(pools[label]) < needed:
            raise ValueError(
                f"class {label!r} has {len(pools[label])} clips, episodes need "
                f"k_shot + n_query = {needed}")

    optim = OptimConfig(learning_rate=cfg.learning_rate)
    rng = np.random.default_rng([cfg.seed, 0xF51])
    history = TrainHistory()
    for epoch in range(1, cfg.epochs + 1):
        epoch_loss = 0.0
        for _ in range(ep_cfg.episodes_per_epoch):
            chosen = []
            labels = []
            for label in CLASS_ORDER:
                picks = rng.choice(pools[label], size=needed, replace=False)
                chosen.extend(int(i) for i in picks)
                labels.extend([label] * needed)
            episode = [train_clips[i] for i in chosen]
            embeddings = np.stack([
                _forward(model, clip, feature_cache, want_cache=False)[2] for clip in episode])
            loss, demb, _ = episode_loss_and_grads(embeddings, labels, ep_cfg.k_shot)
            for p in model.params:
                p.zero_grad()
            for clip, grad in zip(episode, demb):
                if not np.any(grad):
                    continue
                _, _, _, cache = _forward(model, clip, feature_cache, want_cache=True)
                model.backward_clip(cache, dembedding=grad)
            adam_step(model.params, optim)
            epoch_loss += loss
        history.train_losses.append(epoch_loss / ep_cfg.episodes_per_epoch)
        prototypes = _mean_prototypes(model, train_clips, feature_cache)
        history.prototypes.append(prototypes)
        probs = []
        for clip in eval_clips:
            _, _, emb, _ = _forward(model, clip, feature_cache, want_cache=False)
            probs.append(fsl_predict(emb, None, prototypes))
        history.eval_probs.append(probs)
        history.snapshots.append(model.snapshot())
        log.debug("fsl epoch %d: loss %.5f", epoch, history.train_losses[-1])
    return history
