"""Second-stage supervised refinement.

First-stage detections become pseudo-labels (optionally filtered against
ground truth or analyst review), are combined with the original benign
training data, and train a Random Forest selected by information-gain
feature ranking, incremental subset search, and 10-fold cross-validated grid
search with SMOTE balancing applied inside training folds only.

The forest itself is scikit-learn's CART implementation (Gini splits,
min_samples_split/leaf semantics intact); everything around it — ranking,
subsets, balancing, fold protocol, tie-breaking — is owned here. Prediction
uses tree votes: prob = fraction of trees voting attack, attack only when
prob > 0.5.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from sklearn.ensemble import RandomForestClassifier

from .dataio import FlowDataset
from .metrics import f1_score
from .seeding import child_rng, splitmix64

logger = logging.getLogger(__name__)

PSEUDO_MODES = ("oracle", "reviewed", "raw")
DECISION_ACTIONS = ("approve", "reject", "relabel")


@dataclass(frozen=True)
class ReviewDecision:
    row: int
    action: str
    label: int | None = None
    timestamp: str = ""

    def __post_init__(self):
        if self.action not in DECISION_ACTIONS:
            raise ValueError(f"unknown analyst action {self.action!r}")
        if self.action == "relabel" and self.label not in (0, 1):
            raise ValueError("relabel decisions need a 0/1 label")


@dataclass
class PseudoLabelSet:
    """Provisional labels for rows of a source dataset.

    ``rows`` index into the dataset the predictions came from; ``mode``
    records how the labels were vetted (oracle = filtered against ground
    truth, reviewed = analyst decisions, raw = unfiltered predictions).
    """

    rows: np.ndarray
    pseudo_labels: np.ndarray
    mode: str
    decisions: list[ReviewDecision] = field(default_factory=list)
    n_excluded: int = 0

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.pseudo_labels = np.asarray(self.pseudo_labels, dtype=np.int8)
        if len(self.rows) != len(self.pseudo_labels):
            raise ValueError("rows and pseudo_labels must align")
        if len(np.unique(self.rows)) != len(self.rows):
            raise ValueError("pseudo-label rows must be unique")
        if self.mode not in PSEUDO_MODES:
            raise ValueError(f"unknown pseudo-label mode {self.mode!r}")


def make_pseudo_labels(
    preds: np.ndarray,
    mode: str,
    truth: np.ndarray | None = None,
    decisions: list[ReviewDecision] | None = None,
) -> PseudoLabelSet:
    """Turn first-stage predictions into a pseudo-label set.

    oracle   — keep only rows where the prediction matches ground truth;
    reviewed — keep approved rows (prediction as label) and relabelled rows
               (analyst label), drop rejected; undecided rows are excluded
               and counted;
    raw      — keep everything as predicted.
    """
    preds = np.asarray(preds, dtype=np.int8)
    if mode == "oracle":
        if truth is None:
            raise ValueError("oracle mode requires ground truth")
        truth = np.asarray(truth, dtype=np.int8)
        if len(truth) != len(preds):
            raise ValueError("truth length must match predictions")
        rows = np.flatnonzero(preds == truth)
        return PseudoLabelSet(rows, preds[rows], mode, n_excluded=len(preds) - len(rows))
    if mode == "reviewed":
        if decisions is None:
            raise ValueError("reviewed mode requires analyst decisions")
        by_row: dict[int, ReviewDecision] = {}
        for d in decisions:
            by_row[d.row] = d
        rows, labels = [], []
        for r in range(len(preds)):
            d = by_row.get(r)
            if d is None or d.action == "reject":
                continue
            rows.append(r)
            labels.append(preds[r] if d.action == "approve" else d.label)
        n_undecided = len(preds) - len(by_row)
        if n_undecided:
            logger.info("reviewed pseudo-labels: %d undecided rows excluded", n_undecided)
        return PseudoLabelSet(
            np.array(rows, dtype=np.int64),
            np.array(labels, dtype=np.int8),
            mode,
            decisions=sorted(decisions, key=lambda d: d.row),
            n_excluded=len(preds) - len(rows),
        )
    if mode == "raw":
        return PseudoLabelSet(np.arange(len(preds)), preds.copy(), mode)
    raise ValueError(f"unknown pseudo-label mode {mode!r}")


def build_refinement_corpus(
    source: FlowDataset, pseudo: PseudoLabelSet, benign_train: FlowDataset
) -> FlowDataset:
    """Pseudo-labelled rows plus the original benign training data.

    Concatenates and removes exact (features, label) duplicates, keeping
    first occurrence; the removal count is logged.
    """
    if source.feature_names != benign_train.feature_names:
        raise ValueError("pseudo-label source and benign train have different columns")
    feats = np.vstack([source.features[pseudo.rows], benign_train.features])
    labels = np.concatenate(
        [pseudo.pseudo_labels, np.zeros(benign_train.n_rows, dtype=np.int8)]
    )
    seen: set[bytes] = set()
    keep: list[int] = []
    for i in range(len(feats)):
        key = feats[i].tobytes() + bytes([int(labels[i])])
        if key not in seen:
            seen.add(key)
            keep.append(i)
    dropped = len(feats) - len(keep)
    logger.info(
        "refinement corpus: %d pseudo + %d benign rows, %d exact duplicates dropped -> %d",
        len(pseudo.rows), benign_train.n_rows, dropped, len(keep),
    )
    idx = np.array(keep, dtype=np.intp)
    return FlowDataset(
        features=feats[idx],
        feature_names=list(source.feature_names),
        labels=labels[idx],
        row_origin=np.array(["raw"] * len(idx), dtype=object),
        provenance="refinement-corpus",
    )


# ---------------------------------------------------------------------------
# Information gain
# ---------------------------------------------------------------------------


def _entropy_bits(labels: np.ndarray) -> float:
    if len(labels) == 0:
        return 0.0
    counts = np.bincount(labels)
    probs = counts[counts > 0] / len(labels)
    return float(-(probs * np.log2(probs)).sum())


def _equal_frequency_bins(values: np.ndarray, n_bins: int = 10) -> np.ndarray:
    """Bin codes by equal-frequency quantile edges (duplicates merged)."""
    edges = np.unique(np.quantile(values, np.linspace(0, 1, n_bins + 1)[1:-1]))
    return np.searchsorted(edges, values, side="right")


def information_gain(ds: FlowDataset, n_bins: int = 10) -> list[tuple[int, str, float]]:
    """Rank features by entropy reduction of the binary label.

    Continuous features are discretized into equal-frequency bins (robust to
    the heavy skew of flow features). Returns (index, name, gain) sorted by
    gain descending, ties broken by feature index. Single-class labels give
    all-zero gains.
    """
    if ds.labels is None:
        raise ValueError("information gain requires labels")
    y = np.asarray(ds.labels, dtype=np.int64)
    base = _entropy_bits(y)
    gains: list[tuple[int, str, float]] = []
    for j, name in enumerate(ds.feature_names):
        if base == 0.0:
            gains.append((j, name, 0.0))
            continue
        codes = _equal_frequency_bins(ds.features[:, j], n_bins)
        cond = 0.0
        for b in np.unique(codes):
            mask = codes == b
            cond += mask.mean() * _entropy_bits(y[mask])
        gains.append((j, name, base - cond))
    gains.sort(key=lambda t: (-t[2], t[0]))
    return gains


# ---------------------------------------------------------------------------
# SMOTE
# ---------------------------------------------------------------------------


def smote_arrays(
    features: np.ndarray, labels: np.ndarray, k: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Oversample the minority class to exact parity with the majority.

    Each synthetic point is x + u * (x_nn - x) with u ~ U[0,1] and x_nn one
    of x's k nearest minority-class neighbors. Originals pass through
    untouched, first; synthetics are appended. Returns (features, labels,
    origin) where origin is "raw"/"synthetic" per row.
    """
    labels = np.asarray(labels, dtype=np.int8)
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise ValueError("SMOTE requires both classes present")
    minority = classes[np.argmin(counts)]
    n_min, n_maj = counts.min(), counts.max()
    origin = np.array(["raw"] * len(labels), dtype=object)
    if n_min == n_maj:
        return features.copy(), labels.copy(), origin
    if n_min < 2:
        raise ValueError("SMOTE needs at least 2 minority rows (no neighbor otherwise)")
    k_eff = min(k, n_min - 1)
    if k_eff < k:
        logger.info("SMOTE: k lowered from %d to %d (minority count %d)", k, k_eff, n_min)

    minority_rows = features[labels == minority]
    tree = cKDTree(minority_rows)
    _, idx = tree.query(minority_rows, k=k_eff + 1, workers=-1)
    idx = idx.reshape(n_min, k_eff + 1)
    # drop each point's own entry (first tie under duplicates may differ;
    # any same-distance neighbor is a valid choice)
    self_mask = idx == np.arange(n_min)[:, None]
    self_pos = np.where(self_mask.any(axis=1), np.argmax(self_mask, axis=1), k_eff)
    sel = np.tile(np.arange(k_eff), (n_min, 1))
    sel = sel + (sel >= self_pos[:, None])
    neighbors = np.take_along_axis(idx, sel, axis=1)

    need = n_maj - n_min
    parents = rng.integers(0, n_min, size=need)
    picks = rng.integers(0, k_eff, size=need)
    u = rng.random(need)[:, None]
    base = minority_rows[parents]
    partner = minority_rows[neighbors[parents, picks]]
    synthetic = base + u * (partner - base)

    out_features = np.vstack([features, synthetic])
    out_labels = np.concatenate([labels, np.full(need, minority, dtype=np.int8)])
    out_origin = np.concatenate([origin, np.array(["synthetic"] * need, dtype=object)])
    return out_features, out_labels, out_origin


def smote(ds: FlowDataset, k: int = 5, seed: int = 0) -> FlowDataset:
    """Dataset-level SMOTE; synthetic rows carry row_origin "synthetic"."""
    if ds.labels is None:
        raise ValueError("SMOTE requires labels")
    rng = np.random.Generator(np.random.PCG64(seed))
    feats, labels, origin = smote_arrays(ds.features, ds.labels, k, rng)
    if ds.row_origin is not None:
        origin[: ds.n_rows] = ds.row_origin
    return FlowDataset(
        features=feats,
        feature_names=list(ds.feature_names),
        labels=labels,
        categories=dict(ds.categories),
        row_origin=origin,
        provenance=ds.provenance + "|smote",
    )


# ---------------------------------------------------------------------------
# Random Forest refinement model
# ---------------------------------------------------------------------------


@dataclass
class ForestModel:
    """Fitted refinement forest restricted to the selected feature subset."""

    forest: RandomForestClassifier
    selected_features: list[int]
    feature_names: list[str]
    params: dict
    seed: int

    @property
    def trees(self) -> list:
        return list(self.forest.estimators_)

    @property
    def n_estimators(self) -> int:
        return len(self.forest.estimators_)


def _fit_forest(
    features: np.ndarray, labels: np.ndarray, params: dict, seed: int
) -> RandomForestClassifier:
    kwargs = {
        "n_estimators": 100,
        "max_depth": None,
        "min_samples_split": 2,
        "min_samples_leaf": 1,
        **params,  # extra grid keys (e.g. max_features) pass straight through
    }
    forest = RandomForestClassifier(
        random_state=seed % (2**32), n_jobs=-1, **kwargs
    )
    forest.fit(features, labels)
    return forest


def rf_predict_batch(model: ForestModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(labels, attack-vote fractions) for rows already restricted to
    ``selected_features``. prob == 0.5 resolves benign."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[None, :]
    if points.shape[1] != len(model.selected_features):
        raise ValueError(
            f"dimension mismatch: {points.shape[1]} features given, model uses "
            f"{len(model.selected_features)}"
        )
    votes = np.zeros(points.shape[0], dtype=np.float64)
    for tree in model.forest.estimators_:
        votes += tree.predict(points)
    probs = votes / model.n_estimators
    return (probs > 0.5).astype(np.int8), probs


def rf_predict(model: ForestModel, point: np.ndarray) -> tuple[int, float]:
    labels, probs = rf_predict_batch(model, np.atleast_2d(point))
    return int(labels[0]), float(probs[0])


def restrict(features: np.ndarray, model: ForestModel) -> np.ndarray:
    """Project full-width rows onto the model's selected feature subset."""
    return np.asarray(features, dtype=np.float64)[:, model.selected_features]


def combined_predict(ens, weights: np.ndarray, rf: ForestModel, point: np.ndarray) -> int:
    """Final framework label for one flow in the scaled original space.

    The refinement classifier issues the final label for every flow; the
    weighted ensemble's role upstream was generating its training corpus.
    """
    if weights is None:
        raise ValueError("combined prediction requires a weighted ensemble")
    label, _ = rf_predict(rf, restrict(np.atleast_2d(point), rf))
    return label


def combined_labels(rf: ForestModel, features: np.ndarray) -> np.ndarray:
    labels, _ = rf_predict_batch(rf, restrict(features, rf))
    return labels


# ---------------------------------------------------------------------------
# Grid search with incremental feature subsets
# ---------------------------------------------------------------------------


@dataclass
class CandidateResult:
    subset_size: int
    params: dict
    mean_f1: float
    std_f1: float
    valid: bool = True


@dataclass
class GridSearchReport:
    candidates: list[CandidateResult]
    winner_index: int
    folds: int
    seed: int

    @property
    def winner(self) -> CandidateResult:
        return self.candidates[self.winner_index]

    def to_csv(self) -> str:
        lines = ["subset_size,n_estimators,max_depth,min_samples_split,min_samples_leaf,mean_f1,std_f1,valid,winner"]
        for i, c in enumerate(self.candidates):
            p = c.params
            lines.append(
                f"{c.subset_size},{p.get('n_estimators', 100)},"
                f"{p.get('max_depth', '')},{p.get('min_samples_split', 2)},"
                f"{p.get('min_samples_leaf', 1)},{c.mean_f1:.6f},{c.std_f1:.6f},"
                f"{int(c.valid)},{int(i == self.winner_index)}"
            )
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        w = self.winner
        return (
            f"grid search: {len(self.candidates)} candidates, {self.folds}-fold CV; "
            f"winner subset={w.subset_size} params={w.params} "
            f"mean F1={w.mean_f1:.4f} (+/-{w.std_f1:.4f})"
        )


def expand_grid(grid: dict[str, list] | list[dict]) -> list[dict]:
    """Normalize a grid spec to an ordered list of parameter dicts."""
    if isinstance(grid, list):
        return [dict(g) for g in grid]
    keys = list(grid.keys())
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def default_grid() -> dict[str, list]:
    """Published tuning ranges for the refinement forest."""
    return {
        "n_estimators": list(range(100, 501, 50)),
        "max_depth": [None, 5, 10, 15],
        "min_samples_split": [2, 4, 6, 8],
        "min_samples_leaf": [1, 2, 4, 6],
    }


def stratified_folds(labels: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    """Deterministic stratified fold assignment; returns per-fold row indices."""
    labels = np.asarray(labels)
    rng = np.random.Generator(np.random.PCG64(seed))
    assignment = np.empty(len(labels), dtype=np.int64)
    for value in np.unique(labels):
        idx = np.flatnonzero(labels == value)
        perm = rng.permutation(len(idx))
        assignment[idx[perm]] = np.arange(len(idx)) % folds
    return [np.flatnonzero(assignment == f) for f in range(folds)]


def _depth_key(params: dict) -> float:
    depth = params.get("max_depth")
    return float("inf") if depth is None else float(depth)


def train_refinement(
    train: FlowDataset,
    ig_ranking: list[tuple[int, str, float]] | list[int],
    grid: dict[str, list] | list[dict],
    folds: int = 10,
    seed: int = 0,
    subset_sizes: list[int] | None = None,
    smote_k: int = 5,
    inspect=None,
) -> tuple[ForestModel, GridSearchReport]:
    """Incremental-subset grid search for the refinement forest.

    For each feature subset (top 5..30 of the IG ranking by default) and
    each grid point, runs stratified CV where SMOTE balances the training
    fold only — validation folds stay raw. The winner has the highest mean
    fold F1, ties broken by smaller subset, then fewer trees, then
    shallower depth, and is refit on the full SMOTE-balanced training set.

    ``inspect(subset_size, params, fold, train_origin, val_rows)`` is an
    optional diagnostics hook called once per evaluated fold.
    """
    if train.labels is None:
        raise ValueError("refinement training requires labels")
    y = np.asarray(train.labels, dtype=np.int8)
    ranking = [t[0] if isinstance(t, tuple) else int(t) for t in ig_ranking]
    n_feats = len(ranking)

    if subset_sizes is None:
        top = min(30, n_feats)
        if n_feats < 30:
            logger.info("feature count %d < 30; subset search capped", n_feats)
        subset_sizes = list(range(min(5, top), top + 1))
    else:
        capped = [min(s, n_feats) for s in subset_sizes]
        if capped != list(subset_sizes):
            logger.info("subset sizes capped to feature count %d", n_feats)
        subset_sizes = sorted(set(capped))

    grid_points = expand_grid(grid)
    if not grid_points:
        raise ValueError("hyperparameter grid is empty")

    fold_idx = stratified_folds(y, folds, splitmix64(seed, 0))
    all_rows = np.arange(train.n_rows)

    candidates: list[CandidateResult] = []
    ci = 0
    for size in subset_sizes:
        feats = ranking[:size]
        for params in grid_points:
            scores = []
            valid = True
            for f, va_rows in enumerate(fold_idx):
                tr_rows = np.setdiff1d(all_rows, va_rows, assume_unique=True)
                ytr, yva = y[tr_rows], y[va_rows]
                if len(np.unique(ytr)) < 2 or len(np.unique(yva)) < 2:
                    valid = False
                    break
                rng = child_rng(seed, 2 * (ci * folds + f) + 1)
                xtr, ytr_bal, origin = smote_arrays(
                    train.features[np.ix_(tr_rows, feats)], ytr, smote_k, rng
                )
                if inspect is not None:
                    inspect(size, params, f, origin, va_rows)
                forest = _fit_forest(
                    xtr, ytr_bal, params, splitmix64(seed, 2 * (ci * folds + f) + 2)
                )
                votes = np.zeros(len(va_rows))
                for tree in forest.estimators_:
                    votes += tree.predict(train.features[np.ix_(va_rows, feats)])
                preds = (votes / len(forest.estimators_) > 0.5).astype(np.int8)
                scores.append(f1_score(preds, yva))
            if valid:
                candidates.append(
                    CandidateResult(size, dict(params), float(np.mean(scores)), float(np.std(scores)))
                )
            else:
                candidates.append(CandidateResult(size, dict(params), 0.0, 0.0, valid=False))
                logger.warning(
                    "grid point %s at subset %d skipped: single-class fold", params, size
                )
            ci += 1
        logger.info("evaluated subset size %d (%d grid points)", size, len(grid_points))

    ranked = [
        (i, c) for i, c in enumerate(candidates) if c.valid
    ]
    if not ranked:
        raise ValueError("every grid candidate was invalid")
    winner_index = min(
        ranked,
        key=lambda ic: (
            -ic[1].mean_f1,
            ic[1].subset_size,
            ic[1].params.get("n_estimators", 100),
            _depth_key(ic[1].params),
        ),
    )[0]
    report = GridSearchReport(candidates, winner_index, folds, seed)
    logger.info(report.summary())

    win = candidates[winner_index]
    feats = ranking[: win.subset_size]
    rng = child_rng(seed, 10**9)
    xfull, yfull, _ = smote_arrays(train.features[:, feats], y, smote_k, rng)
    forest = _fit_forest(xfull, yfull, win.params, splitmix64(seed, 10**9 + 1))
    model = ForestModel(
        forest=forest,
        selected_features=list(feats),
        feature_names=[train.feature_names[j] for j in feats],
        params=dict(win.params),
        seed=seed,
    )
    return model, report
