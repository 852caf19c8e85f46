"""Synthetic desk-scale datasets with tunable per-channel class
information.

Each clip draws a balanced emotion label.  A channel with
informativeness rho emits a feature vector from a class-conditional
Gaussian whose mean is a fixed random unit direction scaled by
``base_separation * rho``; at rho = 0 (or for failed channels) the
output carries no label information at all.  The CNN channel emits a
T×7 per-frame score matrix (softmax rows whose logits favor the true
class by the same scaled margin) so temporal pooling is exercised on
the way to its 49-dim clip feature.

Channels use independent seed streams, so failing one channel leaves
the bytes of every other channel untouched for the same seed.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CHANNELS, save_manifest, write_tensor_array
from .features import k_average_pool
from .fusion import SEGMENT_DIMS


@dataclass(frozen=True)
class SynthConfig:
    n_clips: int = 500
    informativeness: tuple = (1.0, 1.0, 1.0, 1.0)  # audio, lbptop, cnn, blstm
    failed_channels: tuple = ()
    seed: int = 0
    base_separation: float = 6.0
    frames_min: int = 8
    frames_max: int = 24

    def __post_init__(self):
        if self.n_clips < 1:
            raise ValueError("n_clips must be >= 1")
        if len(self.informativeness) != len(CHANNELS):
            raise ValueError(f"need one informativeness value per channel {CHANNELS}")
        if any(not 0 <= v <= 1 for v in self.informativeness):
            raise ValueError("informativeness values must lie in [0, 1]")
        unknown = set(self.failed_channels) - set(CHANNELS)
        if unknown:
            raise ValueError(f"unknown failed channels {sorted(unknown)}")
        if not 1 <= self.frames_min <= self.frames_max:
            raise ValueError("frame counts must satisfy 1 <= frames_min <= frames_max")

    def effective_informativeness(self, channel):
        if channel in self.failed_channels:
            return 0.0
        return self.informativeness[CHANNELS.index(channel)]


@dataclass
class SynthDataset:
    labels: np.ndarray      # (n,)
    features: dict          # channel -> (n, dim); cnn holds the pooled 49-dim rows
    cnn_scores: list = field(default_factory=list)  # per-clip (T, 7) probability rows


def _softmax_rows(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


# Per-frame logit noise of the CNN channel.  Softmax saturates quickly, so
# without this the accuracy response to informativeness would be too steep
# to tune onto a target.
CNN_LOGIT_NOISE = 3.0

# Informativeness profile calibrated so the four per-channel SVM baselines
# land near 35.5 / 38.9 / 47.0 / 49.1 % held-out accuracy at desk scale
# (2000 training clips, default base separation).
BASELINE_INFORMATIVENESS = (0.203, 0.229, 0.231, 0.275)


def synth_dataset(config):
    """Generate an in-memory dataset; deterministic under config.seed."""
    streams = np.random.SeedSequence(config.seed).spawn(len(CHANNELS) + 1)
    rng = np.random.default_rng(streams[0])
    n = config.n_clips
    labels = np.arange(n) % 7
    rng.shuffle(labels)
    frames = rng.integers(config.frames_min, config.frames_max + 1, size=n)

    features = {}
    cnn_scores = []
    for idx, channel in enumerate(CHANNELS):
        chan_rng = np.random.default_rng(streams[idx + 1])
        sep = config.base_separation * config.effective_informativeness(channel)
        if channel == "cnn":
            # Per-frame logits favor the true class by sep; rows softmaxed.
            for i in range(n):
                logits = CNN_LOGIT_NOISE * chan_rng.standard_normal((frames[i], 7))
                logits[:, labels[i]] += sep
                cnn_scores.append(_softmax_rows(logits))
            features[channel] = np.stack([k_average_pool(s, 7) for s in cnn_scores])
        else:
            dim = SEGMENT_DIMS[channel]
            directions = chan_rng.standard_normal((7, dim))
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)
            noise = chan_rng.standard_normal((n, dim))
            features[channel] = sep * directions[labels] + noise
    return SynthDataset(labels=labels, features=features, cnn_scores=cnn_scores)


def synth_generate(config, out_dir):
    """Write the dataset as FVT1 files plus a manifest; returns its path.

    Per clip: a 20-dim audio vector, a 150-dim LBP-TOP-style vector, a
    T×7 CNN score matrix, and a 50-dim BLSTM vector, all referenced from
    ``manifest.csv``.  Byte-identical for identical configs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = synth_dataset(config)
    suffix = {"audio": "audio", "lbptop": "lbptop", "cnn": "cnn", "blstm": "blstm"}
    entries = []
    for i in range(config.n_clips):
        clip_id = f"clip_{i:05d}"
        paths = {}
        for channel in CHANNELS:
            path = out_dir / f"{clip_id}.{suffix[channel]}.fvt"
            if channel == "cnn":
                write_tensor_array(path, data.cnn_scores[i])
            else:
                write_tensor_array(path, data.features[channel][i])
            paths[channel] = path
        entries.append((clip_id, int(data.labels[i]), paths))
    manifest_path = out_dir / "manifest.csv"
    save_manifest(manifest_path, entries)
    return manifest_path


def gaussian_blobs(n_per_class, n_classes=7, dim=2, radius=3.0, noise=1.0, seed=0):
    """Toy blobs with class means spaced on a circle (first two dims)."""
    rng = np.random.default_rng(seed)
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
    means = np.zeros((n_classes, dim))
    means[:, 0] = radius * np.cos(angles)
    means[:, 1] = radius * np.sin(angles)
    labels = np.repeat(np.arange(n_classes), n_per_class)
    X = means[labels] + noise * rng.standard_normal((labels.size, dim))
    return X, labels
