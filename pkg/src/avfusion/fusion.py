"""Fusion of the four channels.

Feature-level fusion concatenates the per-channel features (audio 20,
LBP-TOP 150, CNN 49, BLSTM 50) into a 269-dim joint vector, normalizes
it in two stages, and classifies with a linear SVM.  Model-level fusion
treats the four per-channel classifier decisions as discrete
measurements of a hidden emotion node: each channel carries a 7×7
conditional probability table P(measurement | emotion), and inference
multiplies the prior with the observed channels' CPT columns.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (CHANNELS, DimensionMismatch, LengthMismatch, N_CLASSES,
                   emotion_index, emotion_name)
from .features import normalize_apply, normalize_fit
from .learn import svm_predict, svm_train

SEGMENT_DIMS = {"audio": 20, "lbptop": 150, "cnn": 49, "blstm": 50}
JOINT_DIM = sum(SEGMENT_DIMS.values())  # 269


class EmptyClassRow(ValueError):
    pass


class AllZeroPosterior(ValueError):
    pass


class UnknownChannel(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementModel:
    channel: str
    cpt: np.ndarray  # (7, 7), row e is P(measurement | emotion == e)

    def __post_init__(self):
        cpt = np.asarray(self.cpt, dtype=np.float64)
        if cpt.shape != (N_CLASSES, N_CLASSES):
            raise DimensionMismatch(f"CPT must be {N_CLASSES}×{N_CLASSES}, got {cpt.shape}")
        if cpt.min() < 0:
            raise ValueError("CPT rows must be non-negative")
        if np.any(np.abs(cpt.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("every CPT row must sum to 1 within 1e-12")
        object.__setattr__(self, "cpt", cpt)


@dataclass(frozen=True)
class BnFusionModel:
    prior: np.ndarray        # (7,), P(emotion)
    measurements: tuple      # MeasurementModel per channel, fixed order

    def __post_init__(self):
        prior = np.asarray(self.prior, dtype=np.float64)
        if prior.shape != (N_CLASSES,) or prior.min() < 0 or abs(prior.sum() - 1.0) > 1e-12:
            raise ValueError("prior must be a 7-class probability vector")
        if len(self.measurements) == 0:
            raise ValueError("at least one measurement channel is required")
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "measurements", tuple(self.measurements))

    @property
    def channels(self):
        return tuple(m.channel for m in self.measurements)


def build_joint_vector(audio, lbptop, cnn, blstm):
    """Concatenate the four channel features in the fixed layout order."""
    parts = []
    for channel, vec in zip(CHANNELS, (audio, lbptop, cnn, blstm)):
        arr = np.asarray(vec, dtype=np.float64)
        if arr.shape != (SEGMENT_DIMS[channel],):
            raise DimensionMismatch(
                f"{channel}: expected shape ({SEGMENT_DIMS[channel]},), got {arr.shape}")
        parts.append(arr)
    return np.concatenate(parts)


def feature_fusion_train(X, y, C=1.0, epochs=30, seed=0):
    """Fit normalization on joint vectors, then a linear SVM on the
    normalized rows; returns ``(NormalizationModel, LinearSvmModel)``."""
    X = np.asarray(X, dtype=np.float64)
    norm = normalize_fit(X)
    svm = svm_train(normalize_apply(norm, X), y, C=C, epochs=epochs, seed=seed)
    return norm, svm


def feature_fusion_predict(norm, svm, x):
    """Normalize a joint vector and classify it; returns (label, scores)."""
    return svm_predict(svm, normalize_apply(norm, x))


def fit_measurement_cpt(predictions, truths, alpha=1.0, channel="joint"):
    """Estimate P(prediction | true emotion) with Laplace smoothing.

    cpt[e][m] = (count(truth==e, pred==m) + alpha) / (count(truth==e) + 7*alpha).
    With alpha == 0 a true class that never occurs leaves its row
    undefined, which is an error.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if predictions.shape != truths.shape or predictions.ndim != 1:
        raise LengthMismatch("predictions and truths must be equal-length 1-D sequences")
    if predictions.size == 0:
        raise ValueError("cannot fit a CPT from empty lists")
    if alpha < 0:
        raise ValueError("smoothing alpha must be >= 0")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.float64)
    np.add.at(counts, (truths, predictions), 1.0)
    row_totals = counts.sum(axis=1)
    if alpha == 0 and np.any(row_totals == 0):
        missing = [emotion_name(e) for e in np.flatnonzero(row_totals == 0)]
        raise EmptyClassRow(f"no samples of {missing} and alpha=0 leaves their rows undefined")
    cpt = (counts + alpha) / (row_totals + N_CLASSES * alpha)[:, None]
    return MeasurementModel(channel=channel, cpt=cpt)


def scalar_measurement(accuracy, channel):
    """CPT from a scalar accuracy: diagonal p, off-diagonal (1-p)/6."""
    if not 0 <= accuracy <= 1:
        raise ValueError("accuracy must lie in [0, 1]")
    off = (1.0 - accuracy) / (N_CLASSES - 1)
    cpt = np.full((N_CLASSES, N_CLASSES), off)
    np.fill_diagonal(cpt, accuracy)
    return MeasurementModel(channel=channel, cpt=cpt)


def uniform_prior():
    return np.full(N_CLASSES, 1.0 / N_CLASSES)


def prior_from_labels(labels):
    """Empirical class frequencies as the prior."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("cannot estimate a prior from no labels")
    counts = np.bincount(labels, minlength=N_CLASSES).astype(np.float64)
    return counts / counts.sum()


def bn_infer(model, observed):
    """MAP inference over the fusion network given observed decisions.

    ``observed`` maps channel tags to measured labels; channels absent
    from it are marginalized out (their factor is simply omitted).
    Factors multiply in the model's fixed measurement order, so the
    result is independent of the dict's insertion order.  Returns
    ``(label, posterior)`` with ties broken toward the lowest index.
    """
    if not observed:
        raise ValueError("at least one channel must be observed")
    unknown = set(observed) - set(model.channels)
    if unknown:
        raise UnknownChannel(f"observed channels {sorted(unknown)} not in model "
                             f"channels {list(model.channels)}")
    post = model.prior.copy()
    for meas in model.measurements:
        if meas.channel in observed:
            m = int(observed[meas.channel])
            if not 0 <= m < N_CLASSES:
                raise ValueError(f"{meas.channel}: observed label {m} outside 0..6")
            post = post * meas.cpt[:, m]
    total = post.sum()
    if total == 0:
        raise AllZeroPosterior("every class has zero unnormalized mass")
    post = post / total
    return int(np.argmax(post)), post


def bn_fusion_predict(model, decisions):
    """Fused label for one clip's per-channel decisions."""
    label, _ = bn_infer(model, decisions)
    return label


def save_bn(model, path, smoothing=None):
    doc = {
        "kind": "bn_fusion",
        "prior": [float(v) for v in model.prior],
        "measurements": [
            {"channel": m.channel, "cpt": [[float(v) for v in row] for row in m.cpt]}
            for m in model.measurements
        ],
    }
    if smoothing is not None:
        doc["smoothing"] = smoothing
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_bn(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("kind") != "bn_fusion":
        raise ValueError(f"{path}: expected a bn_fusion model, found {doc.get('kind')!r}")
    measurements = tuple(MeasurementModel(channel=m["channel"], cpt=np.array(m["cpt"]))
                         for m in doc["measurements"])
    return BnFusionModel(prior=np.array(doc["prior"]), measurements=measurements)


def write_decisions(path, rows):
    """Write a decisions CSV of (clip_id, channel, label index) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "channel", "predicted_label"])
        for clip_id, channel, label in rows:
            writer.writerow([clip_id, channel, emotion_name(label)])


def read_decisions(path):
    """Read a decisions CSV; returns (clip_id, channel, label index) rows."""
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["clip_id", "channel", "predicted_label"]:
            raise ValueError(f"{path}: expected header clip_id,channel,predicted_label")
        for row in reader:
            if len(row) != 3:
                raise ValueError(f"{path}: malformed decisions row {row}")
            rows.append((row[0].strip(), row[1].strip(), emotion_index(row[2].strip())))
    return rows
