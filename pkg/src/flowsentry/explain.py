"""Post hoc explanations for the refinement classifier.

Local: perturbation-based attributions for a single flow. Continuous
features are discretized by training-set quartiles; perturbed samples keep
or resample each feature's bin, a locality kernel weights them by how many
features were flipped, and a ridge regression (penalty 1.0, unpenalized
intercept) on the binary keep-masks against the model's probabilities yields
signed per-feature contributions.

Global: a CART surrogate tree fitted to the model's own predictions, its
fidelity (agreement rate), and the rule set formed by its root-to-leaf
paths with per-feature interval simplification.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from .seeding import child_rng

N_BINS = 4  # quartile discretization


@dataclass
class TrainStats:
    """Per-feature quartiles and range from training data."""

    quartiles: np.ndarray  # (n_features, 3): q25, q50, q75
    mins: np.ndarray
    maxs: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.mins)


def fit_train_stats(features: np.ndarray) -> TrainStats:
    features = np.asarray(features, dtype=np.float64)
    return TrainStats(
        quartiles=np.quantile(features, [0.25, 0.5, 0.75], axis=0).T,
        mins=features.min(axis=0),
        maxs=features.max(axis=0),
    )


@dataclass
class LocalExplanation:
    instance_id: str
    predicted_label: int
    contributions: list[tuple[str, float]]  # (feature name, signed weight), |w| desc
    intercept: float
    local_fit_r2: float
    n_samples: int
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "instance_id": self.instance_id,
                "predicted_label": self.predicted_label,
                "intercept": self.intercept,
                "local_fit_r2": self.local_fit_r2,
                "n_samples": self.n_samples,
                "seed": self.seed,
                "contributions": [
                    {"feature": name, "weight": w, "direction": "attack" if w > 0 else "benign"}
                    for name, w in self.contributions
                ],
            },
            indent=2,
        )

    def to_text(self) -> str:
        """Plain-text signed bar summary, strongest feature first."""
        lines = [
            f"instance {self.instance_id}: predicted "
            f"{'attack' if self.predicted_label else 'benign'} "
            f"(R2={self.local_fit_r2:.3f}, n={self.n_samples})"
        ]
        top = max((abs(w) for _, w in self.contributions), default=1.0) or 1.0
        for name, w in self.contributions:
            bar = "#" * max(1, int(round(20 * abs(w) / top)))
            side = "+" if w > 0 else "-"
            lines.append(f"  {name:<36} {side}{abs(w):8.4f} {bar}")
        return "\n".join(lines)


def _bin_of(values: np.ndarray, stats: TrainStats) -> np.ndarray:
    """Quartile bin index per feature value (0..3)."""
    return (values[..., None] > stats.quartiles).sum(axis=-1)


def lime_explain(
    model_fn,
    instance: np.ndarray,
    train_stats: TrainStats,
    n_samples: int = 5000,
    top_k: int = 10,
    seed: int = 0,
    feature_names: list[str] | None = None,
    instance_id: str = "",
) -> LocalExplanation:
    """Explain one prediction of a probability-emitting classifier.

    ``model_fn`` maps an (n, d) matrix to attack probabilities in [0,1].
    Samples are weighted by exp(-d^2 / sigma^2) where d^2 counts flipped
    features and sigma = 0.75 * sqrt(n_features).
    """
    instance = np.asarray(instance, dtype=np.float64).ravel()
    d = train_stats.n_features
    if len(instance) != d:
        raise ValueError(f"instance has {len(instance)} features, stats expect {d}")
    if n_samples < 10 * top_k:
        raise ValueError(
            f"n_samples={n_samples} too small for top_k={top_k}; need >= {10 * top_k}"
        )
    rng = child_rng(seed, 0)

    inst_bins = _bin_of(instance, train_stats)
    sampled_bins = rng.integers(0, N_BINS, size=(n_samples, d))
    mask = sampled_bins == inst_bins[None, :]
    mask[0, :] = True  # first sample is the instance itself

    edges = np.column_stack(
        [train_stats.mins, train_stats.quartiles, train_stats.maxs]
    )  # (d, 5) bin boundaries
    lo = np.take_along_axis(edges, sampled_bins.T, axis=1).T
    hi = np.take_along_axis(edges, (sampled_bins + 1).T, axis=1).T
    resampled = lo + rng.random((n_samples, d)) * (hi - lo)
    perturbed = np.where(mask, instance[None, :], resampled)

    probs = np.asarray(model_fn(perturbed), dtype=np.float64).ravel()
    if len(probs) != n_samples:
        raise ValueError("model_fn must return one probability per row")

    flips = (~mask).sum(axis=1).astype(np.float64)
    sigma2 = (0.75 * np.sqrt(d)) ** 2
    weights = np.exp(-flips / sigma2)

    # ridge (alpha=1) on the keep-mask design, intercept unpenalized
    design = np.column_stack([mask.astype(np.float64), np.ones(n_samples)])
    wd = design * weights[:, None]
    gram = design.T @ wd
    gram[np.arange(d), np.arange(d)] += 1.0
    beta = np.linalg.solve(gram, wd.T @ probs)
    coef, intercept = beta[:d], float(beta[d])

    fitted = design @ beta
    ss_res = float(np.sum(weights * (probs - fitted) ** 2))
    mean_w = float(np.sum(weights * probs) / np.sum(weights))
    ss_tot = float(np.sum(weights * (probs - mean_w) ** 2))
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res < 1e-12 else 0.0

    names = feature_names or [f"f{j}" for j in range(d)]
    order = np.argsort(-np.abs(coef), kind="stable")[:top_k]
    contributions = [(names[j], float(coef[j])) for j in order]

    inst_prob = float(np.asarray(model_fn(instance[None, :])).ravel()[0])
    return LocalExplanation(
        instance_id=instance_id,
        predicted_label=int(inst_prob > 0.5),
        contributions=contributions,
        intercept=intercept,
        local_fit_r2=r2,
        n_samples=n_samples,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Global surrogate + rules
# ---------------------------------------------------------------------------


@dataclass
class SurrogateTree:
    """CART approximation of a reference model's decision function."""

    tree: DecisionTreeClassifier
    fidelity: float
    training_size: int
    feature_names: list[str] | None = None
    reference_labels: np.ndarray | None = None


def fit_surrogate(
    model_fn,
    data: np.ndarray,
    max_depth: int | None = None,
    seed: int = 0,
    min_samples_leaf: int = 5,
    feature_names: list[str] | None = None,
) -> SurrogateTree:
    """Fit a Gini CART tree to the reference model's labels on ``data``.

    ``model_fn`` maps rows to 0/1 labels. Fidelity is the agreement rate on
    the same data. Depth is unlimited by default; lower it for readability
    at the cost of fidelity.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or len(data) == 0:
        raise ValueError("surrogate fitting needs a nonempty 2-D matrix")
    labels = np.asarray(model_fn(data)).astype(np.int8).ravel()
    tree = DecisionTreeClassifier(
        criterion="gini",
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        random_state=seed % (2**32),
    )
    tree.fit(data, labels)
    fidelity = float((tree.predict(data) == labels).mean())
    return SurrogateTree(
        tree=tree,
        fidelity=fidelity,
        training_size=len(data),
        feature_names=feature_names,
        reference_labels=labels,
    )


@dataclass
class Rule:
    """One root-to-leaf path, simplified to per-feature intervals.

    Conditions are (feature_index, name, lower, upper) meaning
    lower < x <= upper; infinite bounds are omitted from rendering.
    """

    conditions: list[tuple[int, str, float, float]]
    predicted_class: int
    coverage: int
    purity: float
    leaf_id: int

    def matches(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        ok = np.ones(len(rows), dtype=bool)
        for j, _, lo, hi in self.conditions:
            ok &= (rows[:, j] > lo) & (rows[:, j] <= hi)
        return ok

    def to_text(self) -> str:
        parts = []
        for _, name, lo, hi in self.conditions:
            if np.isinf(lo):
                parts.append(f"{name} <= {hi:.6g}")
            elif np.isinf(hi):
                parts.append(f"{name} > {lo:.6g}")
            else:
                parts.append(f"{lo:.6g} < {name} <= {hi:.6g}")
        cond = " AND ".join(parts) if parts else "TRUE"
        cls = "attack" if self.predicted_class == 1 else "benign"
        return f"IF {cond} THEN {cls}  [coverage={self.coverage}, purity={self.purity:.3f}]"


@dataclass
class RuleSet:
    rules: list[Rule] = field(default_factory=list)

    def to_text(self) -> str:
        return "\n".join(r.to_text() for r in self.rules)

    def to_csv(self) -> str:
        lines = ["rule,predicted_class,coverage,purity"]
        for r in self.rules:
            cond = r.to_text().split(" THEN ")[0][3:]
            lines.append(f"\"{cond}\",{r.predicted_class},{r.coverage},{r.purity:.6f}")
        return "\n".join(lines) + "\n"


def extract_rules(
    surrogate: SurrogateTree,
    data: np.ndarray,
    reference_labels: np.ndarray | None = None,
) -> RuleSet:
    """One rule per surrogate leaf, evaluated over ``data``.

    Coverage counts the rows routed to each leaf (rules partition the data:
    counts sum to len(data)). Purity is agreement of the rule's class with
    ``reference_labels`` among covered rows; when labels are not supplied it
    falls back to the leaf's training class fraction.
    """
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    t = surrogate.tree.tree_
    names = surrogate.feature_names or [f"f{j}" for j in range(t.n_features)]
    leaf_of_row = surrogate.tree.apply(data)

    rules: list[Rule] = []
    # DFS keeping per-feature (lower, upper) bounds
    stack: list[tuple[int, dict[int, tuple[float, float]]]] = [(0, {})]
    while stack:
        node, bounds = stack.pop()
        left, right = t.children_left[node], t.children_right[node]
        if left == -1:  # leaf
            covered = leaf_of_row == node
            coverage = int(covered.sum())
            cls = int(surrogate.tree.classes_[int(np.argmax(t.value[node]))])
            if reference_labels is not None and coverage:
                purity = float(
                    (np.asarray(reference_labels)[covered] == cls).mean()
                )
            else:
                total = t.value[node].sum()
                purity = float(t.value[node].max() / total) if total else 1.0
            conditions = [
                (j, names[j], lo, hi) for j, (lo, hi) in sorted(bounds.items())
            ]
            rules.append(Rule(conditions, cls, coverage, purity, leaf_id=int(node)))
            continue
        j = int(t.feature[node])
        thr = float(t.threshold[node])
        lo, hi = bounds.get(j, (-np.inf, np.inf))
        left_bounds = dict(bounds)
        left_bounds[j] = (lo, min(hi, thr))
        right_bounds = dict(bounds)
        right_bounds[j] = (max(lo, thr), hi)
        stack.append((int(right), right_bounds))
        stack.append((int(left), left_bounds))

    return RuleSet(rules)
