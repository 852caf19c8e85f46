"""Channel feature machinery: PCA, score averaging, temporal pooling,
and the two-stage joint-vector normalization.

PCA works on the d×d sample covariance (divide by n-1) via a symmetric
eigendecomposition with a deterministic sign convention.  Normalization
is two-stage: per-dimension standardization with training-set statistics
(population std, divide by n), then per-vector standardization across
the vector's own entries.
"""

from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatch, load_tensor_bundle, save_tensor_bundle


class TooFewSamples(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray         # (d,)
    components: np.ndarray   # (q, d), orthonormal rows, descending eigenvalue
    eigenvalues: np.ndarray  # (q,), non-negative, non-increasing

    @property
    def n_components(self):
        return self.components.shape[0]


@dataclass(frozen=True)
class NormalizationModel:
    per_dim_mean: np.ndarray  # (D,)
    per_dim_std: np.ndarray   # (D,), population std; zeros mark constant dims

    @property
    def zero_std_dims(self):
        return self.per_dim_std == 0


def pca_fit(X, q):
    """Fit PCA with ``q`` retained components on rows of ``X``.

    Requires n >= 2 samples and 1 <= q <= min(n-1, d).  Components are
    the top-q covariance eigenvectors with each row's largest-magnitude
    entry made positive.  When the data rank is below q the trailing
    components are an orthonormal completion with eigenvalue 0.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected an n×d matrix, got rank {X.ndim}")
    n, d = X.shape
    if n < 2:
        raise TooFewSamples(f"PCA needs at least 2 samples, got {n}")
    if not 1 <= q <= min(n - 1, d):
        raise ValueError(f"q={q} outside 1..min(n-1, d)=min({n - 1}, {d})")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:q]
    eigvals = np.maximum(eigvals[order], 0.0)
    components = eigvecs[:, order].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=components, eigenvalues=eigvals)


def pca_transform(model, x):
    """Project ``x`` (a d-vector or an n×d matrix of rows) onto the
    retained components: ``components @ (x - mean)``."""
    x = np.asarray(x, dtype=np.float64)
    d = model.mean.shape[0]
    if x.shape[-1] != d:
        raise DimensionMismatch(f"expected dimension {d}, got {x.shape[-1]}")
    return (x - model.mean) @ model.components.T


def average_scores(stack):
    """Elementwise mean of a non-empty list of equally shaped score
    matrices; probability rows stay probability rows."""
    if len(stack) == 0:
        raise ValueError("cannot average an empty list of score matrices")
    mats = [np.asarray(m, dtype=np.float64) for m in stack]
    shape = mats[0].shape
    for i, m in enumerate(mats):
        if m.shape != shape:
            raise ShapeMismatch(f"matrix {i} has shape {m.shape}, expected {shape}")
    return np.mean(mats, axis=0)


def k_average_pool(scores, k=7):
    """Pool a T×C per-frame score matrix into a flat k·C vector.

    When T < k, frames are repeated in place until the sequence reaches
    k rows: the first ``k mod T`` original frames appear ``ceil(k/T)``
    times and the rest ``floor(k/T)`` times, order preserved.  When
    T >= k and k does not divide T, the ``r = T mod k`` surplus frames
    are dropped, ``ceil(r/2)`` from the head and ``floor(r/2)`` from the
    tail.  The remaining rows are split into k contiguous equal bins,
    each bin is averaged, and the bin means are concatenated in order.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    mat = np.asarray(scores, dtype=np.float64)
    if mat.ndim != 2:
        raise DimensionMismatch(f"expected a T×C score matrix, got rank {mat.ndim}")
    n_frames = mat.shape[0]
    if n_frames == 0:
        raise ValueError("cannot pool an empty score matrix")
    if n_frames < k:
        repeats = np.full(n_frames, k // n_frames)
        repeats[: k % n_frames] += 1
        mat = np.repeat(mat, repeats, axis=0)
    elif n_frames % k != 0:
        surplus = n_frames % k
        drop_head = (surplus + 1) // 2
        mat = mat[drop_head:n_frames - (surplus - drop_head)]
    return mat.reshape(k, -1, mat.shape[1]).mean(axis=1).reshape(-1)


def normalize_fit(X):
    """Per-dimension mean and population std over training rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected an n×D matrix, got rank {X.ndim}")
    if X.shape[0] < 2:
        raise TooFewSamples(f"normalization needs at least 2 samples, got {X.shape[0]}")
    return NormalizationModel(per_dim_mean=X.mean(axis=0), per_dim_std=X.std(axis=0))


def normalize_apply(model, x):
    """Two-stage normalization of a D-vector (or rows of an n×D matrix).

    Stage 1 standardizes each dimension with the fitted statistics
    (constant dimensions map to 0).  Stage 2 re-standardizes the vector
    across its own entries; a stage-1 vector with zero spread maps to
    the zero vector.
    """
    x = np.asarray(x, dtype=np.float64)
    d = model.per_dim_mean.shape[0]
    if x.shape[-1] != d:
        raise DimensionMismatch(f"expected dimension {d}, got {x.shape[-1]}")
    std = model.per_dim_std
    stage1 = np.where(std > 0, (x - model.per_dim_mean) / np.where(std > 0, std, 1.0), 0.0)
    own_mean = stage1.mean(axis=-1, keepdims=True)
    own_std = stage1.std(axis=-1, keepdims=True)
    return np.where(own_std > 0, (stage1 - own_mean) / np.where(own_std > 0, own_std, 1.0), 0.0)


def save_pca(model, path):
    save_tensor_bundle(path, "pca", {
        "mean": model.mean,
        "components": model.components,
        "eigenvalues": model.eigenvalues,
    })


def load_pca(path):
    _, tensors = load_tensor_bundle(path, "pca")
    return PcaModel(mean=tensors["mean"], components=tensors["components"],
                    eigenvalues=tensors["eigenvalues"])


def save_normalization(model, path):
    save_tensor_bundle(path, "normalization", {
        "mean": model.per_dim_mean,
        "std": model.per_dim_std,
    })


def load_normalization(path):
    _, tensors = load_tensor_bundle(path, "normalization")
    return NormalizationModel(per_dim_mean=tensors["mean"], per_dim_std=tensors["std"])
