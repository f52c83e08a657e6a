"""Benign-only novelty detectors: Local Outlier Factor and isolation forest.

Both run in novelty mode: scoring a query never mutates the fitted model,
and higher scores mean more anomalous. Decision thresholds are calibrated
from each model's own training scores via an assumed contamination rate.

LOF neighborhoods are exactly the k nearest reference points (distance ties
broken by the exact k-NN search); local reachability densities are floored
at 1e-12 so duplicate-heavy data cannot divide by zero. The isolation forest
grows each tree on an independent subsample without replacement, splitting a
uniformly chosen non-constant feature at a uniform value between its node
min and max, until a singleton/duplicate node or the depth cap
ceil(log2(subsample_size)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .seeding import child_rng

LRD_EPS = 1e-12


# ---------------------------------------------------------------------------
# Local Outlier Factor
# ---------------------------------------------------------------------------


@dataclass
class LofModel:
    """Fitted LOF in novelty mode.

    Caches each reference point's k-distance and local reachability density
    so query scoring needs only one k-NN search.
    """

    reference_points: np.ndarray   # (n, d)
    k: int
    kdist: np.ndarray              # (n,) distance to k-th nearest other reference
    lrd: np.ndarray                # (n,) local reachability density
    train_scores: np.ndarray       # (n,) self-excluded LOF of each reference
    _tree: cKDTree | None = field(default=None, repr=False, compare=False)

    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.reference_points)
        return self._tree


def fit_lof(train: np.ndarray, k: int) -> LofModel:
    """Fit LOF on reference data.

    Computes, for every reference point, its k nearest *other* references,
    k-distance, local reachability density, and LOF score (used later for
    threshold calibration).
    """
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2:
        raise ValueError(f"expected 2-D training data, got shape {train.shape}")
    n = train.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k >= n:
        raise ValueError(f"k={k} requires at least k+1={k + 1} rows, got {n}")

    tree = cKDTree(train)
    dist, idx = tree.query(train, k=k + 1, workers=-1)
    dist = dist.reshape(n, k + 1)
    idx = idx.reshape(n, k + 1)

    # Drop each point's own entry by index; under exact duplicates the point
    # itself may not be among the k+1 returned, in which case the farthest
    # returned entry (a tie at the same distance) is dropped instead.
    self_mask = idx == np.arange(n)[:, None]
    self_pos = np.where(self_mask.any(axis=1), np.argmax(self_mask, axis=1), k)
    sel = np.tile(np.arange(k), (n, 1))
    sel = sel + (sel >= self_pos[:, None])
    neigh_d = np.take_along_axis(dist, sel, axis=1)
    neigh_i = np.take_along_axis(idx, sel, axis=1)

    kdist = neigh_d[:, -1].copy()
    reach = np.maximum(kdist[neigh_i], neigh_d)
    lrd = 1.0 / np.maximum(reach.mean(axis=1), LRD_EPS)
    train_scores = lrd[neigh_i].mean(axis=1) / lrd

    return LofModel(
        reference_points=train,
        k=k,
        kdist=kdist,
        lrd=lrd,
        train_scores=train_scores,
        _tree=tree,
    )


def lof_score_batch(model: LofModel, points: np.ndarray) -> np.ndarray:
    """LOF of each query row against the reference set (pure).

    LOF(q) = mean over the k nearest references o of lrd(o) / lrd(q), with
    lrd(q) from reachability distances max(kdist(o), d(q, o)).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[None, :]
    if points.shape[1] != model.reference_points.shape[1]:
        raise ValueError(
            f"dimension mismatch: query has {points.shape[1]} features, "
            f"references have {model.reference_points.shape[1]}"
        )
    m = points.shape[0]
    dist, idx = model.tree().query(points, k=model.k, workers=-1)
    dist = dist.reshape(m, model.k)
    idx = idx.reshape(m, model.k)
    reach = np.maximum(model.kdist[idx], dist)
    lrd_q = 1.0 / np.maximum(reach.mean(axis=1), LRD_EPS)
    return model.lrd[idx].mean(axis=1) / lrd_q


def lof_score(model: LofModel, point: np.ndarray) -> float:
    return float(lof_score_batch(model, np.asarray(point))[0])


# ---------------------------------------------------------------------------
# Isolation forest
# ---------------------------------------------------------------------------


def average_path_length(n: int | np.ndarray) -> np.ndarray | float:
    """c(n): expected path length of an unsuccessful BST search on n points.

    c(n) = 2*H(n-1) - 2*(n-1)/n with H the exact harmonic number;
    c(0) = c(1) = 0, c(2) = 1. Computed by direct harmonic summation.
    """
    arr = np.atleast_1d(np.asarray(n, dtype=np.int64))
    if arr.size == 0:
        return np.zeros(0)
    table = _harmonic_table(int(arr.max()))
    out = np.zeros(arr.shape, dtype=np.float64)
    big = arr >= 2
    nb = arr[big].astype(np.float64)
    out[big] = 2.0 * table[arr[big] - 1] - 2.0 * (nb - 1.0) / nb
    if np.isscalar(n) or np.asarray(n).ndim == 0:
        return float(out[0])
    return out


_HARMONIC_CACHE: dict[int, np.ndarray] = {}


def _harmonic_table(n_max: int) -> np.ndarray:
    """H(0..n_max) by cumulative summation, cached."""
    have = max(_HARMONIC_CACHE) if _HARMONIC_CACHE else -1
    if n_max <= have:
        return _HARMONIC_CACHE[have]
    table = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, n_max + 1))])
    _HARMONIC_CACHE.clear()
    _HARMONIC_CACHE[n_max] = table
    return table


@dataclass
class IsolationTree:
    """One tree as flat BFS-ordered arrays.

    feature[i] == -1 marks a leaf; children of an internal node i are
    left[i] (x < threshold) and left[i] + 1.
    """

    feature: np.ndarray    # int32
    threshold: np.ndarray  # float64
    left: np.ndarray       # int32, -1 at leaves
    size: np.ndarray       # int32 node sample counts


@dataclass
class IForestModel:
    trees: list[IsolationTree]
    subsample_size: int
    n_trees: int
    seed: int
    n_features: int
    depth_cap: int

    def __post_init__(self):
        self._c_norm = float(average_path_length(self.subsample_size))


def resolve_max_samples(spec: str | float | int, n: int) -> int:
    """Resolve an 'auto' / fraction / count subsample spec against n rows."""
    if isinstance(spec, str):
        if spec != "auto":
            raise ValueError(f"unknown max_samples spec {spec!r}")
        resolved = min(256, n)
    elif isinstance(spec, float):
        if not 0.0 < spec <= 1.0:
            raise ValueError(f"max_samples fraction must be in (0,1], got {spec}")
        resolved = int(round(spec * n))
    else:
        resolved = int(spec)
    resolved = min(resolved, n)
    if resolved < 2:
        raise ValueError(f"resolved subsample size {resolved} < 2")
    return resolved


def fit_iforest(
    train: np.ndarray,
    n_trees: int,
    max_samples: str | float | int = "auto",
    seed: int = 0,
) -> IForestModel:
    """Grow an isolation forest; deterministic for a fixed seed.

    Each tree draws its own uniform subsample without replacement using a
    child RNG derived from (seed, tree_index), so tree t is identical no
    matter how many trees surround it.
    """
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] == 0:
        raise ValueError("training data must be a nonempty 2-D matrix")
    if n_trees < 1:
        raise ValueError(f"n_trees must be >= 1, got {n_trees}")
    n = train.shape[0]
    psi = resolve_max_samples(max_samples, n)
    depth_cap = max(1, math.ceil(math.log2(psi)))
    trees = []
    for t in range(n_trees):
        rng = child_rng(seed, t)
        sub = rng.choice(n, size=psi, replace=False) if psi < n else np.arange(n)
        trees.append(_grow_tree(train[sub], rng, depth_cap))
    return IForestModel(
        trees=trees,
        subsample_size=psi,
        n_trees=n_trees,
        seed=seed,
        n_features=train.shape[1],
        depth_cap=depth_cap,
    )


def _grow_tree(data: np.ndarray, rng: np.random.Generator, depth_cap: int) -> IsolationTree:
    """Level-wise construction; all per-level work is vectorized over points."""
    n, d = data.shape
    feature: list[np.ndarray] = []
    threshold: list[np.ndarray] = []
    left: list[np.ndarray] = []
    size: list[np.ndarray] = []

    order = np.arange(n)                 # point ids grouped by node
    starts = np.array([0])               # segment start per node at this level
    next_id = 1                          # global id of the next level's first node
    depth = 0
    while order.size:
        n_nodes = len(starts)
        seg_sizes = np.diff(np.append(starts, order.size))
        rows = data[order]
        mins = np.minimum.reduceat(rows, starts, axis=0)
        maxs = np.maximum.reduceat(rows, starts, axis=0)
        splittable = maxs > mins
        n_split_feats = splittable.sum(axis=1)

        is_leaf = (seg_sizes <= 1) | (n_split_feats == 0) | (depth >= depth_cap)
        split = ~is_leaf

        feat = np.full(n_nodes, -1, dtype=np.int32)
        thr = np.zeros(n_nodes, dtype=np.float64)
        if split.any():
            # uniform choice among this node's non-constant features
            ranks = np.floor(rng.random(n_nodes) * n_split_feats).astype(np.int64)
            ranks = np.minimum(ranks, np.maximum(n_split_feats - 1, 0))
            cumulative = np.cumsum(splittable, axis=1)
            feat_all = np.argmax(cumulative > ranks[:, None], axis=1)
            u = rng.random(n_nodes)
            lo = mins[np.arange(n_nodes), feat_all]
            hi = maxs[np.arange(n_nodes), feat_all]
            cut = lo + u * (hi - lo)
            # u ~ [0,1) can round the cut onto lo; nudge up so the
            # min-valued points always populate the left child
            cut = np.where(cut <= lo, np.nextafter(lo, hi), cut)
            feat[split] = feat_all[split].astype(np.int32)
            thr[split] = cut[split]

        split_rank = np.cumsum(split) - 1          # index among this level's split nodes
        left_ids = np.full(n_nodes, -1, dtype=np.int32)
        left_ids[split] = next_id + 2 * split_rank[split]

        feature.append(feat)
        threshold.append(thr)
        left.append(left_ids)
        size.append(seg_sizes.astype(np.int32))

        # route points of split nodes to their children
        node_of_point = np.repeat(np.arange(n_nodes), seg_sizes)
        in_split = split[node_of_point]
        pts = order[in_split]
        parents = node_of_point[in_split]
        goes_left = data[pts, feat[parents]] < thr[parents]
        child_key = 2 * split_rank[parents] + (~goes_left)
        sort_idx = np.argsort(child_key, kind="stable")
        order = pts[sort_idx]
        child_sizes = np.bincount(child_key, minlength=2 * int(split.sum()))
        starts = np.concatenate([[0], np.cumsum(child_sizes)[:-1]]).astype(np.int64)
        next_id += 2 * int(split.sum())
        depth += 1

    return IsolationTree(
        feature=np.concatenate(feature),
        threshold=np.concatenate(threshold),
        left=np.concatenate(left),
        size=np.concatenate(size),
    )


def _tree_path_lengths(tree: IsolationTree, points: np.ndarray, depth_cap: int) -> np.ndarray:
    """Adjusted path length (leaf depth + c(leaf_size)) per query row."""
    m = points.shape[0]
    cur = np.zeros(m, dtype=np.int64)
    depth = np.zeros(m, dtype=np.float64)
    for _ in range(depth_cap + 1):
        feat = tree.feature[cur]
        active = feat >= 0
        if not active.any():
            break
        vals = points[np.arange(m), np.maximum(feat, 0)]
        go_left = vals < tree.threshold[cur]
        nxt = np.where(go_left, tree.left[cur], tree.left[cur] + 1)
        cur = np.where(active, nxt, cur)
        depth += active
    return depth + average_path_length(tree.size[cur])


def iforest_score_batch(
    model: IForestModel, points: np.ndarray, chunk_size: int | None = None
) -> np.ndarray:
    """Anomaly score 2^(-E[h]/c(psi)) per query row, in (0,1).

    E[h] is the mean adjusted path length over trees in fixed tree order;
    ``chunk_size`` only partitions the query rows, never the reduction
    order, so results are bit-identical however the work is chunked.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[None, :]
    if points.shape[1] != model.n_features:
        raise ValueError(
            f"dimension mismatch: query has {points.shape[1]} features, "
            f"model expects {model.n_features}"
        )
    if chunk_size is not None and chunk_size < len(points):
        parts = [
            iforest_score_batch(model, points[i : i + chunk_size])
            for i in range(0, len(points), chunk_size)
        ]
        return np.concatenate(parts)
    total = np.zeros(points.shape[0], dtype=np.float64)
    for tree in model.trees:
        total += _tree_path_lengths(tree, points, model.depth_cap)
    mean_path = total / model.n_trees
    return np.power(2.0, -mean_path / model._c_norm)


def iforest_score(model: IForestModel, point: np.ndarray) -> float:
    return float(iforest_score_batch(model, np.asarray(point))[0])


# ---------------------------------------------------------------------------
# Threshold calibration
# ---------------------------------------------------------------------------


@dataclass
class ThresholdCalibration:
    """Decision cut on anomaly scores from an assumed contamination rate.

    threshold is the empirical (1 - contamination)-quantile of the training
    scores (linear interpolation between order statistics); predictions flag
    score > threshold as attack.
    """

    contamination: float
    threshold: float
    train_score_quantile: float


def calibrate_threshold(train_scores: np.ndarray, contamination: float) -> ThresholdCalibration:
    train_scores = np.asarray(train_scores, dtype=np.float64)
    if train_scores.size == 0:
        raise ValueError("cannot calibrate on empty scores")
    if not 0.0 < contamination <= 0.5:
        raise ValueError(f"contamination must be in (0, 0.5], got {contamination}")
    q = 1.0 - contamination
    return ThresholdCalibration(
        contamination=contamination,
        threshold=float(np.quantile(train_scores, q)),
        train_score_quantile=q,
    )


def predict_from_scores(scores: np.ndarray, calibration: ThresholdCalibration) -> np.ndarray:
    """0/1 labels: attack where score exceeds the calibrated threshold."""
    return (np.asarray(scores) > calibration.threshold).astype(np.int8)
