"""Discriminative-feature training pieces: the island loss (center loss
plus a pairwise center-cosine penalty) with its analytic gradients,
center maintenance, a small softmax probe that demonstrates the loss on
toy data, and the one-vs-rest linear SVM used by both fusion paths.

The island loss over a batch (x_i, y_i) with per-class centers c_j is

    0.5 * sum_i ||x_i - c_{y_i}||^2
    + lambda1 * sum_j sum_{k != j} (cos(c_k, c_j) + 1)

with the double sum running over ordered pairs, so every unordered pair
is counted twice.
"""

from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatch, N_CLASSES, load_tensor_bundle, save_tensor_bundle


class ZeroNormCenter(ValueError):
    pass


class SingleClass(ValueError):
    pass


class DegenerateInput(ValueError):
    pass


@dataclass(frozen=True)
class IslandLossParams:
    lambda1: float = 10.0  # weight of the pairwise center term inside the island loss
    lam: float = 0.01      # weight of the island loss against the softmax loss
    alpha: float = 0.5     # center learning rate

    def __post_init__(self):
        if self.lambda1 < 0 or self.lam < 0:
            raise ValueError("lambda1 and lam must be >= 0")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")


@dataclass(frozen=True)
class LinearSvmModel:
    W: np.ndarray  # (7, D)
    b: np.ndarray  # (7,)
    C: float


def _check_batch(X, y, centers):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    centers = np.asarray(centers, dtype=np.float64)
    if X.ndim != 2 or centers.ndim != 2:
        raise DimensionMismatch("batch and centers must be 2-D")
    if X.shape[1] != centers.shape[1]:
        raise DimensionMismatch(
            f"batch dimension {X.shape[1]} != center dimension {centers.shape[1]}")
    if y.shape != (X.shape[0],):
        raise DimensionMismatch("labels must align with batch rows")
    if y.size and (y.min() < 0 or y.max() >= centers.shape[0]):
        raise ValueError("labels must index center rows")
    return X, y, centers


def _unit_rows(centers):
    norms = np.linalg.norm(centers, axis=1)
    if np.any(norms == 0):
        raise ZeroNormCenter("the pairwise cosine term needs centers with nonzero norm")
    return centers / norms[:, None], norms


def island_loss(X, y, centers, lambda1):
    """Island loss of a batch: center term plus pairwise cosine term."""
    X, y, centers = _check_batch(X, y, centers)
    loss = 0.5 * np.sum((X - centers[y]) ** 2)
    if lambda1 != 0:
        unit, _ = _unit_rows(centers)
        cosines = unit @ unit.T
        n = centers.shape[0]
        loss += lambda1 * (cosines.sum() - np.trace(cosines) + n * (n - 1))
    return float(loss)


def _pairwise_center_grad(centers):
    """Gradient of sum_j sum_{k != j} (cos(c_k, c_j) + 1) w.r.t. each c_j.

    d cos(c_k, c_j) / d c_j = c_k / (|c_k||c_j|) - cos(c_k, c_j) c_j / |c_j|^2,
    and every unordered pair contributes from both orderings.
    """
    unit, norms = _unit_rows(centers)
    cosines = unit @ unit.T
    cos_sum = cosines.sum(axis=1) - np.diag(cosines)
    cross = unit.sum(axis=0) - unit
    return 2.0 * (cross - cos_sum[:, None] * unit) / norms[:, None]


def island_loss_grad(X, y, centers, lambda1):
    """Analytic gradients of the island loss w.r.t. the batch and centers."""
    X, y, centers = _check_batch(X, y, centers)
    diffs = X - centers[y]
    dX = diffs.copy()
    dC = np.zeros_like(centers)
    np.add.at(dC, y, -diffs)
    if lambda1 != 0:
        dC += lambda1 * _pairwise_center_grad(centers)
    return dX, dC


def update_centers(X, y, centers, alpha, lambda1=0.0):
    """One damped center-maintenance step; returns the new centers.

    The center term moves c_j by the summed pull of its batch samples
    damped by 1 + n_j (n_j = batch count of class j); the pairwise term
    contributes its loss gradient scaled by lambda1.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    X, y, centers = _check_batch(X, y, centers)
    pull = np.zeros_like(centers)
    np.add.at(pull, y, centers[y] - X)
    counts = np.bincount(y, minlength=centers.shape[0])
    delta = pull / (1.0 + counts)[:, None]
    if lambda1 != 0:
        delta = delta + lambda1 * _pairwise_center_grad(centers)
    return centers - alpha * delta


@dataclass(frozen=True)
class SoftmaxProbe:
    W: np.ndarray        # (n_classes, d)
    b: np.ndarray        # (n_classes,)
    centers: np.ndarray  # (n_classes, n_classes), centers in logit space
    trace: np.ndarray    # per-epoch total loss


def softmax_probe_train(X, y, params=None, epochs=400, seed=0, lr=0.02):
    """Train a linear softmax classifier with island-loss regularization.

    The probe's logits z = Wx + b act as the feature layer: the island
    loss is evaluated on them and its centers live in logit space, so a
    positive ``params.lam`` pulls same-class logits toward their center
    while the pairwise term pushes centers apart.  With ``lam == 0`` the
    probe reduces to plain softmax regression (centers still track the
    class means of z, so clustering ratios stay comparable).  Fully
    deterministic given the seed.
    """
    params = params or IslandLossParams()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    m, d = X.shape
    n_classes = int(y.max()) + 1
    if m < n_classes:
        raise DegenerateInput(f"{m} samples cannot cover {n_classes} classes")
    rng = np.random.default_rng(seed)
    W = 0.01 * rng.standard_normal((n_classes, d))
    b = np.zeros(n_classes)
    # Unit-scale center init: the pairwise cosine gradient scales with
    # 1/|c_j|, so near-zero centers would blow up the first updates.
    centers = rng.standard_normal((n_classes, n_classes))
    onehot = np.eye(n_classes)[y]
    island_active = params.lam > 0
    trace = np.empty(epochs)
    for epoch in range(epochs):
        z = X @ W.T + b
        shifted = z - z.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1))
        ce = float(np.mean(log_norm - shifted[np.arange(m), y]))
        total = ce
        if island_active:
            total += params.lam * island_loss(z, y, centers, params.lambda1)
        trace[epoch] = total
        probs = np.exp(shifted - log_norm[:, None])
        dz = (probs - onehot) / m
        if island_active:
            dz = dz + params.lam * (z - centers[y])
        W -= lr * (dz.T @ X)
        b -= lr * dz.sum(axis=0)
        centers = update_centers(z, y, centers, params.alpha,
                                 params.lambda1 if island_active else 0.0)
    return SoftmaxProbe(W=W, b=b, centers=centers, trace=trace)


def probe_features(probe, X):
    """The probe's feature-layer output (its logits) for a batch."""
    return np.asarray(X, dtype=np.float64) @ probe.W.T + probe.b


def clustering_ratio(features, y, centers):
    """Mean intra-class distance over mean inter-center distance.

    Intra-class distance is the mean pairwise distance among same-class
    feature vectors (averaged over classes with at least two samples);
    inter-center distance is the mean pairwise distance among centers.
    """
    features = np.asarray(features, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    centers = np.asarray(centers, dtype=np.float64)
    intra_terms = []
    for j in range(centers.shape[0]):
        grp = features[y == j]
        if grp.shape[0] < 2:
            continue
        dists = np.linalg.norm(grp[:, None, :] - grp[None, :, :], axis=2)
        intra_terms.append(dists.sum() / (grp.shape[0] * (grp.shape[0] - 1)))
    if not intra_terms:
        raise DegenerateInput("no class has two samples to measure intra-class distance")
    center_dists = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
    n = centers.shape[0]
    inter = center_dists.sum() / (n * (n - 1))
    return float(np.mean(intra_terms) / inter)


def svm_train(X, y, C=1.0, epochs=30, seed=0):
    """One-vs-rest L2-regularized hinge loss via the deterministic
    Pegasos schedule.

    Each of the 7 binary problems shares the epoch-wise sample order
    drawn from the seed; step t uses learning rate 1/(lambda_reg * t)
    with lambda_reg = 1/(C*n).  The bias rides along as a constant
    feature.  Identical inputs and seed give identical models.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected an n×D matrix, got rank {X.ndim}")
    n, dim = X.shape
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    if np.unique(y).size < 2:
        raise SingleClass("training data contains a single class")
    lam = 1.0 / (C * n)
    Xa = np.hstack([X, np.ones((n, 1))])
    signs = np.where(y[:, None] == np.arange(N_CLASSES)[None, :], 1.0, -1.0)
    W = np.zeros((N_CLASSES, dim + 1))
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            xi = Xa[i]
            violated = signs[i] * (W @ xi) < 1.0
            W *= 1.0 - eta * lam
            if violated.any():
                W[violated] += np.outer(eta * signs[i, violated], xi)
    return LinearSvmModel(W=W[:, :dim].copy(), b=W[:, dim].copy(), C=C)


def svm_decision(model, X):
    """Raw scores W x + b for one vector or for rows of a matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.W.shape[1]:
        raise DimensionMismatch(
            f"expected dimension {model.W.shape[1]}, got {X.shape[-1]}")
    return X @ model.W.T + model.b


def svm_predict(model, x):
    """Predicted label (argmax, ties to the lowest index) and scores."""
    scores = svm_decision(model, x)
    if scores.ndim != 1:
        raise DimensionMismatch("svm_predict takes a single feature vector")
    return int(np.argmax(scores)), scores


def svm_predict_batch(model, X):
    """Predicted labels for rows of an n×D matrix."""
    return np.argmax(svm_decision(model, X), axis=1)


def save_svm(model, path, epochs=None, seed=None):
    extra = {"C": model.C, "shapes": {"weights": list(model.W.shape),
                                      "bias": list(model.b.shape)}}
    if epochs is not None:
        extra["epochs"] = int(epochs)
    if seed is not None:
        extra["seed"] = int(seed)
    save_tensor_bundle(path, "linear_svm", {"weights": model.W, "bias": model.b},
                       extra=extra)


def load_svm(path):
    doc, tensors = load_tensor_bundle(path, "linear_svm")
    return LinearSvmModel(W=tensors["weights"], b=tensors["bias"], C=float(doc["C"]))
