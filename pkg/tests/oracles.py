"""Independent reference implementations used purely as test oracles.

Everything here is written the slow, obvious way (explicit loops, direct
definitions) and must stay independent of the code paths it checks.
"""

from __future__ import annotations

import math

import numpy as np

LRD_EPS = 1e-12


def lof_brute_force(references: np.ndarray, queries: np.ndarray, k: int) -> np.ndarray:
    """LOF from the standard definitions via exhaustive pairwise distances.

    Neighborhoods are the exactly-k nearest points; for reference points the
    point itself is excluded. Local reachability density floors at 1e-12.
    """
    refs = np.asarray(references, dtype=np.float64)
    n = len(refs)

    def dist(a, b):
        return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))

    # k-distance and neighbor list per reference (self excluded by index)
    neigh: list[list[int]] = []
    kdist = np.zeros(n)
    for i in range(n):
        ds = sorted((dist(refs[i], refs[j]), j) for j in range(n) if j != i)
        neigh.append([j for _, j in ds[:k]])
        kdist[i] = ds[k - 1][0]

    lrd = np.zeros(n)
    for i in range(n):
        reach = [max(kdist[j], dist(refs[i], refs[j])) for j in neigh[i]]
        lrd[i] = 1.0 / max(sum(reach) / k, LRD_EPS)

    out = []
    for q in np.atleast_2d(np.asarray(queries, dtype=np.float64)):
        ds = sorted((dist(q, refs[j]), j) for j in range(n))
        nq = [j for _, j in ds[:k]]
        reach = [max(kdist[j], dist(q, refs[j])) for j in nq]
        lrd_q = 1.0 / max(sum(reach) / k, LRD_EPS)
        out.append(sum(lrd[j] for j in nq) / k / lrd_q)
    return np.array(out)


def lof_brute_force_train(references: np.ndarray, k: int) -> np.ndarray:
    """Fit-time LOF of each reference within the full reference set.

    Every point's neighborhood excludes only the point itself; all
    k-distances and densities are computed over the full set.
    """
    refs = np.asarray(references, dtype=np.float64)
    n = len(refs)

    def dist(a, b):
        return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))

    neigh: list[list[int]] = []
    kdist = np.zeros(n)
    for i in range(n):
        ds = sorted((dist(refs[i], refs[j]), j) for j in range(n) if j != i)
        neigh.append([j for _, j in ds[:k]])
        kdist[i] = ds[k - 1][0]

    lrd = np.zeros(n)
    for i in range(n):
        reach = [max(kdist[j], dist(refs[i], refs[j])) for j in neigh[i]]
        lrd[i] = 1.0 / max(sum(reach) / k, LRD_EPS)

    return np.array(
        [sum(lrd[j] for j in neigh[i]) / k / lrd[i] for i in range(n)]
    )


def harmonic_c(n: int) -> float:
    """Average path length normalizer by direct harmonic summation."""
    if n <= 1:
        return 0.0
    h = 0.0
    for i in range(1, n):
        h += 1.0 / i
    return 2.0 * h - 2.0 * (n - 1) / n


def lof_brute_force_matrix(
    references: np.ndarray, queries: np.ndarray, k: int
) -> np.ndarray:
    """Same definitions as lof_brute_force via full pairwise distance
    matrices and explicit sorts; fast enough for acceptance-scale sweeps."""
    refs = np.asarray(references, dtype=np.float64)
    qs = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    n = len(refs)

    d_rr = np.sqrt(((refs[:, None, :] - refs[None, :, :]) ** 2).sum(-1))
    np.fill_diagonal(d_rr, np.inf)  # self excluded from reference neighborhoods
    order = np.argsort(d_rr, axis=1, kind="stable")
    neigh = order[:, :k]
    rows = np.arange(n)[:, None]
    kdist = d_rr[rows, neigh][:, -1]

    reach = np.maximum(kdist[neigh], d_rr[rows, neigh])
    lrd = 1.0 / np.maximum(reach.mean(axis=1), LRD_EPS)

    d_qr = np.sqrt(((qs[:, None, :] - refs[None, :, :]) ** 2).sum(-1))
    qorder = np.argsort(d_qr, axis=1, kind="stable")[:, :k]
    qrows = np.arange(len(qs))[:, None]
    qreach = np.maximum(kdist[qorder], d_qr[qrows, qorder])
    lrd_q = 1.0 / np.maximum(qreach.mean(axis=1), LRD_EPS)
    return lrd[qorder].mean(axis=1) / lrd_q


def pca_eig(data: np.ndarray, n_components: int) -> tuple[np.ndarray, np.ndarray]:
    """PCA by eigendecomposition of the covariance matrix.

    Returns (components, explained_variance_ratio) with the same
    largest-coordinate-positive sign convention as the implementation.
    """
    data = np.asarray(data, dtype=np.float64)
    centered = data - data.mean(axis=0)
    cov = centered.T @ centered / (len(data) - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    comps = evecs[:, order].T[:n_components].copy()
    for row in comps:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    ratio = evals / evals.sum()
    return comps, ratio[:n_components]


def auc_all_pairs(scores: np.ndarray, truth: np.ndarray) -> float:
    """ROC-AUC by exhaustive pair counting, ties worth 1/2."""
    pos = [s for s, t in zip(scores, truth) if t == 1]
    neg = [s for s, t in zip(scores, truth) if t == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def wmv_reference(predictions, weights) -> int:
    """Direct transcription of the weighted-vote aggregation rule."""
    score_benign = 0.0
    score_attack = 0.0
    for p, f in zip(predictions, weights):
        if p == 0:
            score_benign += f
        else:
            score_attack += f
    if score_attack > score_benign:
        return 1
    return 0


def entropy_bits(labels) -> float:
    """Shannon entropy of a label sequence, in bits."""
    labels = list(labels)
    n = len(labels)
    h = 0.0
    for v in set(labels):
        p = labels.count(v) / n
        h -= p * math.log2(p)
    return h


def information_gain_table(feature_bins, labels) -> float:
    """H(label) - H(label | bin) computed cell by cell."""
    feature_bins = list(feature_bins)
    labels = list(labels)
    n = len(labels)
    cond = 0.0
    for b in set(feature_bins):
        rows = [l for f, l in zip(feature_bins, labels) if f == b]
        cond += len(rows) / n * entropy_bits(rows)
    return entropy_bits(labels) - cond
