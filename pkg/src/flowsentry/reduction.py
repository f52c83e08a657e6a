"""Principal component analysis over benign training data.

Fitted once per detector kind on the benign training matrix and reused for
validation/test projection, so no attack data ever shapes the detector input
space. Computed by SVD of the centered matrix for numerical stability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PcaModel:
    mean: np.ndarray                      # (n_features,)
    components: np.ndarray                # (n_components, n_features), rows orthonormal
    explained_variance_ratio: np.ndarray  # (n_components,), descending

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def n_features(self) -> int:
        return self.components.shape[1]


def fit_pca(data: np.ndarray, n_components: int) -> PcaModel:
    """Top-variance orthonormal directions of the centered data.

    Deterministic up to sign; the sign of each component is fixed by making
    its largest-magnitude coordinate positive (first such coordinate on
    ties), which keeps serialized models byte-reproducible.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"expected 2-D data, got shape {data.shape}")
    n, d = data.shape
    if not 1 <= n_components <= min(n, d):
        raise ValueError(
            f"n_components must be in [1, {min(n, d)}] for data of shape {data.shape}"
        )
    mean = data.mean(axis=0)
    centered = data - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    variances = s**2
    total = variances.sum()
    ratio = variances / total if total > 0 else np.zeros_like(variances)

    components = vt[:n_components].copy()
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return PcaModel(
        mean=mean,
        components=components,
        explained_variance_ratio=ratio[:n_components].copy(),
    )


def transform(model: PcaModel, data: np.ndarray) -> np.ndarray:
    """Project rows: (data - mean) @ components.T."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[None, :]
    if data.shape[1] != model.n_features:
        raise ValueError(
            f"dimension mismatch: data has {data.shape[1]} features, "
            f"model expects {model.n_features}"
        )
    return (data - model.mean) @ model.components.T
