"""Model definitions: the six-layer dilated spatial backbone, the
segmentation head used for pretraining and vesselness scoring, and the
temporal classifier that decides CCC presence from an 11-frame clip.

The backbone runs per frame at full resolution (3x3 kernels, dilations
1..32, receptive field 127 px).  The classifier concatenates the 11
per-frame feature stacks along channels, mixes them with a kernel-size-1
convolution, pools globally into a 32-d embedding, and maps that to one
logit; probability = sigmoid(logit) and the decision is strictly
probability > 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cccdetect.nn import (
    Checkpoint,
    Parameter,
    conv2d_forward,
    conv2d_backward,
    dense_forward,
    dense_backward,
    global_avg_pool_forward,
    global_avg_pool_backward,
    relu_forward,
    relu_backward,
    save_checkpoint,
    sigmoid_forward,
)
from cccdetect.nn.checkpoint import ROLE_CLASSIFIER, ROLE_SEGMENTATION, CheckpointError

FREEZE_NONE = "none"
FREEZE_PRETRAINED_UNFROZEN = "pretrained_unfrozen"
FREEZE_PRETRAINED_FROZEN = "pretrained_frozen"
FREEZE_MODES = (FREEZE_NONE, FREEZE_PRETRAINED_UNFROZEN, FREEZE_PRETRAINED_FROZEN)


@dataclass
class BackboneConfig:
    layers: int = 6
    kernel: int = 3
    in_channels: int = 1
    channels: tuple = (16, 16, 16, 16, 16, 16)
    dilations: tuple = (1, 2, 4, 8, 16, 32)

    def __post_init__(self):
        self.channels = tuple(self.channels)
        self.dilations = tuple(self.dilations)
        if len(self.channels) != self.layers or len(self.dilations) != self.layers:
            raise ValueError(
                f"backbone needs {self.layers} channel and dilation entries, got "
                f"{len(self.channels)} and {len(self.dilations)}")
        if self.kernel % 2 != 1:
            raise ValueError(f"backbone kernel must be odd to preserve spatial size, got {self.kernel}")

    def padding(self, layer: int) -> int:
        # keeps H x W constant at stride 1
        return self.dilations[layer] * (self.kernel - 1) // 2

    def receptive_field(self) -> int:
        return 1 + sum(d * (self.kernel - 1) for d in self.dilations)

    @property
    def out_channels(self) -> int:
        return self.channels[-1]

    def to_dict(self) -> dict:
        return {
            "layers": self.layers,
            "kernel": self.kernel,
            "in_channels": self.in_channels,
            "channels": list(self.channels),
            "dilations": list(self.dilations),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BackboneConfig":
        return cls(layers=d["layers"], kernel=d["kernel"], in_channels=d["in_channels"],
                   channels=tuple(d["channels"]), dilations=tuple(d["dilations"]))


@dataclass
class ClassifierConfig:
    temporal_channels: int = 32
    decision_threshold: float = 0.5
    frames: int = 11

    def __post_init__(self):
        if not 0.0 < self.decision_threshold < 1.0:
            raise ValueError(f"decision_threshold must lie in (0, 1), got {self.decision_threshold}")


class Conv2dUnit:
    """A convolution with owned weight/bias parameters and grad accumulation."""

    def __init__(self, name, cin, cout, kernel, rng, stride=1, padding=0, dilation=1):
        fan_in = cin * kernel * kernel
        w = (rng.standard_normal((cout, cin, kernel, kernel)) * np.sqrt(2.0 / fan_in)).astype(np.float32)
        self.weight = Parameter(f"{name}.w", w)
        self.bias = Parameter(f"{name}.b", np.zeros(cout, dtype=np.float32))
        self.stride = stride
        self.padding = padding
        self.dilation = dilation

    def forward(self, x):
        return conv2d_forward(x, self.weight.value, self.bias.value,
                              stride=self.stride, padding=self.padding, dilation=self.dilation)

    def backward(self, dout, cache, need_dx=True):
        dx, dw, db = conv2d_backward(dout, cache, need_dx=need_dx)
        self.weight.grad += dw
        self.bias.grad += db
        return dx

    @property
    def params(self):
        return [self.weight, self.bias]


class DenseUnit:
    def __init__(self, name, din, dout, rng):
        w = (rng.standard_normal((dout, din)) * np.sqrt(2.0 / din)).astype(np.float32)
        self.weight = Parameter(f"{name}.w", w)
        self.bias = Parameter(f"{name}.b", np.zeros(dout, dtype=np.float32))

    def forward(self, x):
        return dense_forward(x, self.weight.value, self.bias.value)

    def backward(self, dout, cache):
        dx, dw, db = dense_backward(dout, cache)
        self.weight.grad += dw
        self.bias.grad += db
        return dx

    @property
    def params(self):
        return [self.weight, self.bias]


class Backbone:
    """Per-frame spatial feature extractor; spatial size is preserved."""

    def __init__(self, cfg: BackboneConfig, rng):
        self.cfg = cfg
        self.convs = []
        cin = cfg.in_channels
        for i in range(cfg.layers):
            self.convs.append(Conv2dUnit(
                f"backbone.conv{i}", cin, cfg.channels[i], cfg.kernel, rng,
                padding=cfg.padding(i), dilation=cfg.dilations[i]))
            cin = cfg.channels[i]

    def forward(self, x, want_cache=True):
        caches = [] if want_cache else None
        for conv in self.convs:
            x, conv_cache = conv.forward(x)
            x, relu_cache = relu_forward(x)
            if want_cache:
                caches.append((conv_cache, relu_cache))
        return x, caches

    def backward(self, dout, caches, need_dx=False):
        for conv, (conv_cache, relu_cache) in zip(reversed(self.convs), reversed(caches)):
            dout = relu_backward(dout, relu_cache)
            dout = conv.backward(dout, conv_cache,
                                 need_dx=need_dx or conv is not self.convs[0])
        return dout

    @property
    def params(self):
        return [p for conv in self.convs for p in conv.params]

    @property
    def frozen(self) -> bool:
        return all(not p.trainable for p in self.params)


class SegmentationModel:
    """Backbone plus a 1x1 linear regression head onto one mask channel."""

    def __init__(self, cfg: BackboneConfig = None, seed: int = 0):
        self.cfg = cfg or BackboneConfig()
        rng = np.random.default_rng([seed, 0x5E6])
        self.backbone = Backbone(self.cfg, rng)
        self.head = Conv2dUnit("seg_head", self.cfg.out_channels, 1, 1, rng)
        self.pretrained_from = None

    def forward(self, x, want_cache=True):
        """x: (N, 1, H, W) -> linear prediction (N, 1, H, W)."""
        feats, bb_caches = self.backbone.forward(x, want_cache=want_cache)
        pred, head_cache = self.head.forward(feats)
        return pred, (bb_caches, head_cache)

    def backward(self, dpred, cache):
        bb_caches, head_cache = cache
        dfeats = self.head.backward(dpred, head_cache)
        if not self.backbone.frozen:
            self.backbone.backward(dfeats, bb_caches)

    def predict_mask(self, frame: np.ndarray) -> np.ndarray:
        """(H, W) frame -> clamped [0, 1] mask; inference consumers see this."""
        pred, _ = self.forward(frame[None, None, :, :].astype(np.float32), want_cache=False)
        return np.clip(pred[0, 0], 0.0, 1.0)

    @property
    def params(self):
        return self.backbone.params + self.head.params

    def param_dict(self):
        return {p.name: p.value for p in self.params}

    def save(self, path, provenance, fixture_seed=7):
        fixture = self._fixture(fixture_seed)
        return save_checkpoint(path, ROLE_SEGMENTATION, {"backbone": self.cfg.to_dict()},
                               self.param_dict(), provenance, fixture=fixture)

    def _fixture(self, seed, size=16):
        rng = np.random.default_rng(seed)
        frame = rng.random((size, size), dtype=np.float32)
        out = self.predict_mask(frame)
        return {
            "input_seed": int(seed),
            "input_size": int(size),
            "output": [float(v) for v in np.asarray(out, dtype=np.float32).ravel()],
        }

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, seed: int = 0) -> "SegmentationModel":
        if ckpt.role != ROLE_SEGMENTATION:
            raise CheckpointError(f"expected a segmentation checkpoint, got role {ckpt.role!r}")
        model = cls(BackboneConfig.from_dict(ckpt.arch["backbone"]), seed=seed)
        for p in model.params:
            if p.name not in ckpt.params:
                raise CheckpointError(f"checkpoint missing parameter {p.name}")
            p.value[...] = ckpt.params[p.name]
        model.pretrained_from = ckpt.provenance
        return model


def vesselness_score(seg_prediction: np.ndarray) -> float:
    """Mean of the [0, 1]-clamped segmentation output over all pixels."""
    return float(np.clip(seg_prediction, 0.0, 1.0).mean(dtype=np.float64))


class CccClassifier:
    """Per-frame backbone features -> channel concat -> 1x1 temporal conv ->
    relu -> global average pool -> 32-d embedding -> FC -> sigmoid."""

    def __init__(self, cfg: BackboneConfig = None, clf_cfg: ClassifierConfig = None, seed: int = 0):
        self.cfg = cfg or BackboneConfig()
        self.clf_cfg = clf_cfg or ClassifierConfig()
        rng = np.random.default_rng([seed, 0xC1A])
        self.backbone = Backbone(self.cfg, rng)
        concat_channels = self.cfg.out_channels * self.clf_cfg.frames
        self.temporal = Conv2dUnit("temporal", concat_channels, self.clf_cfg.temporal_channels, 1, rng)
        self.fc = DenseUnit("fc", self.clf_cfg.temporal_channels, 1, rng)
        self.pretrained_from = None

    # ----- forward -----

    def _check_clip(self, frames):
        frames = np.asarray(frames, dtype=np.float32)
        if frames.ndim == 4 and frames.shape[1] == 1:
            frames = frames[:, 0]
        if frames.ndim != 3 or frames.shape[0] != self.clf_cfg.frames:
            raise ValueError(
                f"classifier expects exactly {self.clf_cfg.frames} frames, got shape {frames.shape}")
        return frames

    def features(self, frames) -> np.ndarray:
        """Concatenated per-frame backbone features: (frames*C, H, W).

        Cacheable when the backbone is frozen; gradients never flow
        through this path.
        """
        frames = self._check_clip(frames)
        f, _, h, w = (self.clf_cfg.frames, 1, frames.shape[1], frames.shape[2])
        feats, _ = self.backbone.forward(frames[:, None, :, :], want_cache=False)
        return feats.reshape(f * self.cfg.out_channels, h, w)

    def forward_clip(self, frames=None, features=None, want_cache=True):
        """Returns (probability, logit, embedding, cache).

        Provide either raw clip ``frames`` (11, H, W) or precomputed
        ``features`` (11*C, H, W) from :meth:`features`.
        """
        if (frames is None) == (features is None):
            raise ValueError("provide exactly one of frames or features")
        bb_caches = None
        if features is None:
            clip = self._check_clip(frames)
            h, w = clip.shape[1], clip.shape[2]
            feats4, bb_caches = self.backbone.forward(clip[:, None, :, :],
                                                      want_cache=want_cache and not self.backbone.frozen)
            concat = feats4.reshape(1, self.clf_cfg.frames * self.cfg.out_channels, h, w)
        else:
            concat = np.asarray(features, dtype=np.float32)[None]
        mixed, conv_cache = self.temporal.forward(concat)
        act, relu_cache = relu_forward(mixed)
        embedding, pool_cache = global_avg_pool_forward(act)   # (1, 32)
        logit_arr, fc_cache = self.fc.forward(embedding)
        logit = float(logit_arr[0, 0])
        prob_arr, _ = sigmoid_forward(np.array([logit], dtype=np.float32))
        prob = float(prob_arr[0])
        cache = None
        if want_cache:
            cache = (bb_caches, conv_cache, relu_cache, pool_cache, fc_cache, concat.shape)
        return prob, logit, embedding[0], cache

    def predict(self, frames=None, features=None) -> bool:
        prob, _, _, _ = self.forward_clip(frames=frames, features=features, want_cache=False)
        return prob > self.clf_cfg.decision_threshold

    # ----- backward -----

    def backward_clip(self, cache, dlogit=0.0, dembedding=None):
        """Backpropagate from the logit and/or the embedding."""
        bb_caches, conv_cache, relu_cache, pool_cache, fc_cache, concat_shape = cache
        demb = np.zeros((1, self.clf_cfg.temporal_channels), dtype=np.float32)
        if dlogit:
            demb += self.fc.backward(np.array([[dlogit]], dtype=np.float32), fc_cache)
        if dembedding is not None:
            demb += np.asarray(dembedding, dtype=np.float32).reshape(1, -1)
        dact = global_avg_pool_backward(demb, pool_cache)
        dmixed = relu_backward(dact, relu_cache)
        dconcat = self.temporal.backward(dmixed, conv_cache, need_dx=not self.backbone.frozen)
        if not self.backbone.frozen:
            if bb_caches is None:
                raise RuntimeError("backbone caches missing; forward was run cache-free")
            f = self.clf_cfg.frames
            c = self.cfg.out_channels
            dfeats = dconcat.reshape(f, c, concat_shape[2], concat_shape[3])
            self.backbone.backward(dfeats, bb_caches)

    # ----- parameters / persistence -----

    @property
    def params(self):
        return self.backbone.params + self.temporal.params + self.fc.params

    @property
    def head_params(self):
        return self.temporal.params + self.fc.params

    def param_dict(self):
        return {p.name: p.value for p in self.params}

    def save(self, path, provenance):
        arch = {"backbone": self.cfg.to_dict(), "classifier": {
            "temporal_channels": self.clf_cfg.temporal_channels,
            "decision_threshold": self.clf_cfg.decision_threshold,
            "frames": self.clf_cfg.frames,
        }}
        return save_checkpoint(path, ROLE_CLASSIFIER, arch, self.param_dict(), provenance)

    def snapshot(self) -> dict:
        return {p.name: p.value.copy() for p in self.params}

    def restore(self, snapshot: dict):
        for p in self.params:
            p.value[...] = snapshot[p.name]


def classify_forward(model: CccClassifier, clip_frames):
    """Functional wrapper: (probability, logit, embedding) for one clip."""
    prob, logit, embedding, _ = model.forward_clip(frames=clip_frames, want_cache=False)
    return prob, logit, embedding


def load_pretrained(model: CccClassifier, ckpt: Checkpoint) -> CccClassifier:
    """Copy checkpoint backbone weights into the classifier; heads stay fresh."""
    if "backbone" not in ckpt.arch:
        raise CheckpointError("checkpoint carries no backbone architecture")
    ours = model.cfg.to_dict()
    theirs = ckpt.arch["backbone"]
    for key in ours:
        if ours[key] != theirs.get(key):
            raise CheckpointError(
                f"backbone config mismatch on {key!r}: model has {ours[key]}, "
                f"checkpoint has {theirs.get(key)}")
    for p in model.backbone.params:
        if p.name not in ckpt.params:
            raise CheckpointError(f"checkpoint missing backbone parameter {p.name}")
        p.value[...] = ckpt.params[p.name]
    model.pretrained_from = ckpt.provenance
    return model


def apply_freeze(model: CccClassifier, mode: str) -> CccClassifier:
    """Set trainable flags for the chosen transfer configuration."""
    if mode not in FREEZE_MODES:
        raise ValueError(f"freeze mode must be one of {FREEZE_MODES}, got {mode!r}")
    if mode in (FREEZE_PRETRAINED_UNFROZEN, FREEZE_PRETRAINED_FROZEN) and model.pretrained_from is None:
        raise ValueError(f"freeze mode {mode!r} requires a loaded pretrained checkpoint")
    for p in model.params:
        p.trainable = True
    if mode == FREEZE_PRETRAINED_FROZEN:
        for p in model.backbone.params:
            p.trainable = False
    return model
