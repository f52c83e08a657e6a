"""Bagged detector ensemble with weighted or simple majority voting.

The ensemble trains each base learner on an independent bootstrap (sampling
with replacement) of the PCA-projected benign data. Learner weights are the
per-learner F1-scores on a labelled validation set; at inference each
learner's 0/1 prediction masks its weight and the class with the larger
weight sum wins, attack only on strict inequality. Simple majority voting is
kept as the baseline: equal vote counts resolve to benign and are reported
as ties.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import detectors, reduction
from .dataio import FlowDataset
from .metrics import confusion
from .seeding import child_rng, splitmix64

logger = logging.getLogger(__name__)

KIND_LOF = "lof"
KIND_IFOREST = "iforest"


@dataclass
class EnsembleConfig:
    """Defaults follow the tuned per-dataset values; override per run."""

    n_lof: int = 50
    n_iforest: int = 50
    lof_k: int = 5
    lof_contamination: float = 0.14
    iforest_n_trees: int = 100
    iforest_max_samples: str | float | int = 1.0
    iforest_contamination: float = 0.10
    pca_components_lof: int = 7
    pca_components_iforest: int = 16
    bootstrap_size: int | None = None  # None = full benign-training size
    # optional per-learner hyperparameter variation, cycled by learner index
    lof_overrides: list[dict] | None = None
    iforest_overrides: list[dict] | None = None

    @property
    def n_learners(self) -> int:
        return self.n_lof + self.n_iforest

    def to_dict(self) -> dict:
        return {
            "n_lof": self.n_lof,
            "n_iforest": self.n_iforest,
            "lof_k": self.lof_k,
            "lof_contamination": self.lof_contamination,
            "iforest_n_trees": self.iforest_n_trees,
            "iforest_max_samples": self.iforest_max_samples,
            "iforest_contamination": self.iforest_contamination,
            "pca_components_lof": self.pca_components_lof,
            "pca_components_iforest": self.pca_components_iforest,
            "bootstrap_size": self.bootstrap_size,
            "lof_overrides": self.lof_overrides,
            "iforest_overrides": self.iforest_overrides,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EnsembleConfig":
        return cls(**doc)


@dataclass
class Learner:
    kind: str
    model: detectors.LofModel | detectors.IForestModel
    calibration: detectors.ThresholdCalibration
    bootstrap_seed: int
    params: dict = field(default_factory=dict)

    def scores(self, projected: np.ndarray) -> np.ndarray:
        if self.kind == KIND_LOF:
            return detectors.lof_score_batch(self.model, projected)
        return detectors.iforest_score_batch(self.model, projected)

    def votes(self, projected: np.ndarray) -> np.ndarray:
        return detectors.predict_from_scores(self.scores(projected), self.calibration)


@dataclass
class VotePrediction:
    label: int
    score_benign: float
    score_attack: float
    tie: bool


@dataclass
class EnsembleModel:
    learners: list[Learner]
    pca_by_kind: dict[str, reduction.PcaModel]
    master_seed: int
    config: EnsembleConfig
    weights: np.ndarray | None = None

    @property
    def n_learners(self) -> int:
        return len(self.learners)

    def project(self, features: np.ndarray, kind: str) -> np.ndarray:
        return reduction.transform(self.pca_by_kind[kind], features)

    def learner_votes(self, features: np.ndarray) -> np.ndarray:
        """(n_learners, n_rows) 0/1 matrix of per-learner predictions.

        Features are in the scaled original space; each learner sees its
        kind's PCA projection. Pure; fixed learner order.
        """
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1:
            features = features[None, :]
        projected = {
            kind: self.project(features, kind)
            for kind in {lr.kind for lr in self.learners}
        }
        votes = np.empty((self.n_learners, features.shape[0]), dtype=np.int8)
        for i, lr in enumerate(self.learners):
            votes[i] = lr.votes(projected[lr.kind])
        return votes

    def attack_probability(self, features: np.ndarray) -> np.ndarray:
        """Normalized weighted attack score in [0,1]; used as a soft output."""
        votes = self.learner_votes(features)
        _, s_ben, s_att = wmv_labels(votes, self.require_weights())
        total = s_ben + s_att
        return np.where(total > 0, s_att / np.where(total > 0, total, 1.0), 0.5)

    def require_weights(self) -> np.ndarray:
        if self.weights is None:
            raise ValueError("ensemble has no learner weights; run weigh_learners first")
        return self.weights

    def fingerprint(self) -> str:
        """Cheap content hash for cache invalidation: covers seed, config,
        and every learner's decision threshold."""
        import hashlib
        import json

        digest = hashlib.sha256()
        digest.update(str(self.master_seed).encode())
        digest.update(json.dumps(self.config.to_dict(), sort_keys=True).encode())
        thresholds = np.array([lr.calibration.threshold for lr in self.learners])
        digest.update(thresholds.tobytes())
        return digest.hexdigest()[:16]


def _resolve_params(base: dict, overrides: list[dict] | None, idx: int) -> dict:
    params = dict(base)
    if overrides:
        params.update(overrides[idx % len(overrides)])
    return params


def build_ensemble(
    benign_train: FlowDataset | np.ndarray,
    config: EnsembleConfig,
    master_seed: int,
    pca_by_kind: dict[str, reduction.PcaModel] | None = None,
) -> EnsembleModel:
    """Train the bagged detector ensemble on benign data.

    Child seeds derive from splitmix64(master_seed, learner_index), so the
    ensemble is reproducible and adding learners never perturbs existing
    ones. Bootstrap samples are drawn with replacement at
    ``config.bootstrap_size`` (full training size when unset).
    """
    features = benign_train.features if isinstance(benign_train, FlowDataset) else benign_train
    features = np.asarray(features, dtype=np.float64)
    if config.n_learners < 1:
        raise ValueError("ensemble needs at least one learner")
    n = features.shape[0]
    boot_n = config.bootstrap_size or n
    if boot_n != n:
        logger.info("bootstrap subsampling active: %d of %d benign rows per learner", boot_n, n)

    if pca_by_kind is None:
        pca_by_kind = {}
        if config.n_lof:
            pca_by_kind[KIND_LOF] = reduction.fit_pca(features, config.pca_components_lof)
        if config.n_iforest:
            pca_by_kind[KIND_IFOREST] = reduction.fit_pca(
                features, config.pca_components_iforest
            )
    projected = {kind: reduction.transform(m, features) for kind, m in pca_by_kind.items()}

    learners: list[Learner] = []
    for i in range(config.n_learners):
        seed_i = splitmix64(master_seed, i)
        rng = child_rng(master_seed, i)
        boot = rng.integers(0, n, size=boot_n)
        if i < config.n_lof:
            params = _resolve_params(
                {"k": config.lof_k, "contamination": config.lof_contamination},
                config.lof_overrides,
                i,
            )
            train = projected[KIND_LOF][boot]
            model = detectors.fit_lof(train, k=params["k"])
            cal = detectors.calibrate_threshold(model.train_scores, params["contamination"])
            learners.append(Learner(KIND_LOF, model, cal, seed_i, params))
        else:
            params = _resolve_params(
                {
                    "n_trees": config.iforest_n_trees,
                    "max_samples": config.iforest_max_samples,
                    "contamination": config.iforest_contamination,
                },
                config.iforest_overrides,
                i - config.n_lof,
            )
            train = projected[KIND_IFOREST][boot]
            model = detectors.fit_iforest(
                train, n_trees=params["n_trees"], max_samples=params["max_samples"], seed=seed_i
            )
            cal = detectors.calibrate_threshold(
                detectors.iforest_score_batch(model, train), params["contamination"]
            )
            learners.append(Learner(KIND_IFOREST, model, cal, seed_i, params))
        if (i + 1) % 10 == 0:
            logger.info("trained %d/%d learners", i + 1, config.n_learners)
    return EnsembleModel(
        learners=learners, pca_by_kind=pca_by_kind, master_seed=master_seed, config=config
    )


def weigh_learners(
    ens: EnsembleModel,
    validation: FlowDataset,
    votes: np.ndarray | None = None,
) -> np.ndarray:
    """Assign each learner its standalone validation F1 as weight.

    The proportionality constant is 1: a learner with F1 0.75 weighs 0.75,
    and a learner that never flags an attack weighs 0 and loses all
    influence. Pass precomputed ``votes`` to avoid re-scoring.
    """
    if validation.labels is None:
        raise ValueError("weighting requires a labelled validation set")
    labels = np.asarray(validation.labels)
    if len(np.unique(labels)) < 2:
        raise ValueError("validation set must contain both classes")
    if votes is None:
        votes = ens.learner_votes(validation.features)
    weights = np.array([confusion(votes[i], labels).f1 for i in range(ens.n_learners)])
    ens.weights = weights
    return weights


def wmv_labels(votes: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batch weighted majority voting.

    Returns (labels, score_benign, score_attack) per column of ``votes``.
    Summation is in learner-index order for bit-reproducibility; the label
    is attack only when score_attack strictly exceeds score_benign.
    """
    votes = np.asarray(votes)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 1 or len(weights) != votes.shape[0]:
        raise ValueError("weights length must equal learner count")
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise ValueError("weights must be finite and nonnegative")
    attack_mask = votes.astype(np.float64)
    score_attack = weights @ attack_mask
    score_benign = weights @ (1.0 - attack_mask)
    labels = (score_attack > score_benign).astype(np.int8)
    return labels, score_benign, score_attack


def mv_labels(votes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batch simple majority voting: returns (labels, tie_flags).

    Equal counts resolve to benign with tie=True.
    """
    votes = np.asarray(votes)
    n_learners = votes.shape[0]
    attack_counts = votes.sum(axis=0)
    benign_counts = n_learners - attack_counts
    labels = (attack_counts > benign_counts).astype(np.int8)
    ties = attack_counts == benign_counts
    return labels, ties


def wmv_predict(ens: EnsembleModel, point: np.ndarray) -> VotePrediction:
    """Weighted vote for a single flow (scaled original feature space)."""
    votes = ens.learner_votes(np.atleast_2d(point))
    labels, s_ben, s_att = wmv_labels(votes, ens.require_weights())
    return VotePrediction(
        label=int(labels[0]),
        score_benign=float(s_ben[0]),
        score_attack=float(s_att[0]),
        tie=False,
    )


def mv_predict(ens: EnsembleModel, point: np.ndarray) -> VotePrediction:
    """Unweighted majority vote for a single flow; ties resolve benign."""
    votes = ens.learner_votes(np.atleast_2d(point))
    labels, ties = mv_labels(votes)
    attack_count = float(votes[:, 0].sum())
    return VotePrediction(
        label=int(labels[0]),
        score_benign=float(ens.n_learners - attack_count),
        score_attack=attack_count,
        tie=bool(ties[0]),
    )


def tie_rate(
    ens: EnsembleModel,
    ds: FlowDataset,
    mode: str,
    votes: np.ndarray | None = None,
) -> float:
    """Fraction of rows whose vote is exactly tied under the given mode."""
    if votes is None:
        votes = ens.learner_votes(ds.features)
    if mode.upper() == "MV":
        _, ties = mv_labels(votes)
        return float(ties.mean())
    if mode.upper() == "WMV":
        _, s_ben, s_att = wmv_labels(votes, ens.require_weights())
        return float((s_att == s_ben).mean())
    raise ValueError(f"unknown voting mode {mode!r}")
