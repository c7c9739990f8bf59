"""Pooled-statistics clip encoder.

Stands in for a 3D CNN backbone: each frame is reduced to its spatial
mean and standard deviation per channel, the statistics are concatenated
across frames, and a shared linear map with ReLU produces the feature.
One parameter block serves all clips of the same length; snippets and
frame-sets get separate blocks because their pooled dimensions differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffcore as dc


@dataclass
class EncoderParams:
    weight: dc.Tensor  # (pooled_dim, feature_dim)
    bias: dc.Tensor    # (feature_dim,)

    @property
    def pooled_dim(self):
        return self.weight.shape[0]

    @property
    def feature_dim(self):
        return self.weight.shape[1]


def pooled_dim(clip_frames, channels):
    """Mean and std per frame per channel, concatenated across frames."""
    return 2 * clip_frames * channels


def init_encoder(rng, clip_frames, channels, feature_dim):
    d = pooled_dim(clip_frames, channels)
    bound = 1.0 / np.sqrt(d)
    weight = dc.Tensor(rng.uniform(-bound, bound, size=(d, feature_dim)),
                       requires_grad=True)
    bias = dc.Tensor(rng.uniform(-bound, bound, size=feature_dim),
                     requires_grad=True)
    return EncoderParams(weight=weight, bias=bias)


def clip_statistics(clip):
    """Per-frame per-channel spatial mean and std, frame-major order."""
    means = clip.mean(axis=(2, 3), dtype=np.float64)
    stds = clip.std(axis=(2, 3), dtype=np.float64)
    return np.stack([means, stds], axis=-1).reshape(-1)


def encode(clip, params: EncoderParams):
    """Feature vector for one clip; differentiable w.r.t. params."""
    if clip.ndim != 4 or clip.size == 0:
        raise ValueError(f"clip must be a non-empty (frames, c, h, w) array, got shape {clip.shape}")
    stats = clip_statistics(clip)
    if stats.size != params.pooled_dim:
        raise ValueError(
            f"clip with {clip.shape[0]} frames x {clip.shape[1]} channels pools to "
            f"{stats.size} statistics, encoder expects {params.pooled_dim}"
        )
    return dc.relu(dc.add(dc.matmul(dc.Tensor(stats), params.weight), params.bias))
