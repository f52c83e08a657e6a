"""End-to-end orchestration: prepare, train, evaluate, refine, explain, review.

Each command reads/writes versioned containers under the run's output
directory and writes the resolved config beside them, so every artifact is
reproducible from (config, seed) alone.

Output layout:
    prepared/train_benign.fsc, validation.fsc, test.fsc
    models/scaler.fsc, onehot.fsc, pca_lof.fsc, pca_iforest.fsc,
           ensemble.fsc, refinement.fsc
    cache/votes_validation.fsc, votes_test.fsc
    review/decisions.jsonl, pseudo_labels.fsc
    reports/*.csv, *.txt
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import artifact, explain as explain_mod, reduction
from .config import PipelineConfig
from .dataio import (
    FlowDataset,
    apply_minmax,
    apply_one_hot,
    clean,
    concat_datasets,
    fit_minmax,
    fit_one_hot,
    load_flow_csv,
    stratified_split,
)
from .ensemble import EnsembleConfig, build_ensemble, mv_labels, weigh_learners, wmv_labels
from .metrics import class_rates, metrics_row
from .refinement import (
    build_refinement_corpus,
    default_grid,
    information_gain,
    make_pseudo_labels,
    rf_predict_batch,
    restrict,
    train_refinement,
)
from .review import ReviewState, create_review_app
from .seeding import splitmix64

logger = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """A command could not run; the message names the failing input."""


def _paths(config: PipelineConfig) -> dict[str, Path]:
    out = config.output_dir
    return {
        "out": out,
        "train_benign": out / "prepared" / "train_benign.fsc",
        "validation": out / "prepared" / "validation.fsc",
        "test": out / "prepared" / "test.fsc",
        "scaler": out / "models" / "scaler.fsc",
        "onehot": out / "models" / "onehot.fsc",
        "pca_lof": out / "models" / "pca_lof.fsc",
        "pca_iforest": out / "models" / "pca_iforest.fsc",
        "ensemble": out / "models" / "ensemble.fsc",
        "refinement": out / "models" / "refinement.fsc",
        "votes_validation": out / "cache" / "votes_validation.fsc",
        "votes_test": out / "cache" / "votes_test.fsc",
        "decision_log": out / "review" / "decisions.jsonl",
        "pseudo_labels": out / "review" / "pseudo_labels.fsc",
        "reports": out / "reports",
        "explanations": out / "explanations",
    }


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise PipelineError(f"missing {path}; run `{hint}` first")
    return path


def _load_prepared(config: PipelineConfig, which: str) -> FlowDataset:
    return artifact.load_dataset(_require(_paths(config)[which], "flowsentry prepare"))


# ---------------------------------------------------------------------------
# prepare
# ---------------------------------------------------------------------------


def _load_files(config: PipelineConfig, files: list[str], schema) -> FlowDataset:
    parts = []
    for f in files:
        path = config.resolve_path(f)
        if not path.exists():
            raise PipelineError(f"input file not found: {path}")
        parts.append(load_flow_csv(path, schema))
    return parts[0] if len(parts) == 1 else concat_datasets(parts)


def _apply_class_groups(ds: FlowDataset, groups: dict | None) -> FlowDataset:
    if not groups or ds.class_names is None:
        return ds
    mapped = np.array([groups.get(str(c), str(c)) for c in ds.class_names], dtype=object)
    ds.class_names = mapped
    return ds


def cmd_prepare(config: PipelineConfig) -> dict:
    """Load, clean, encode, scale, and split per the run config."""
    paths = _paths(config)
    schema = config.load_schema()
    prep = config.prepare
    seed = config.seed

    train_raw = _load_files(config, prep["train_files"], schema)
    train_data, train_report = clean(train_raw)
    logger.info("train files: %s", train_report.summary())
    train_data = _apply_class_groups(train_data, prep.get("class_groups"))

    sample_fraction = prep.get("sample_fraction")
    if sample_fraction:
        train_data, _ = stratified_split(train_data, sample_fraction, splitmix64(seed, 90))
        logger.info("train subsampled to %d rows (fraction %s)", train_data.n_rows, sample_fraction)

    layout = prep.get("layout", "resplit")
    if layout == "resplit":
        train_part, rest = stratified_split(
            train_data, prep.get("train_fraction", 0.6), splitmix64(seed, 1)
        )
        pool = [rest]
        if prep.get("test_files"):
            test_raw = _load_files(config, prep["test_files"], schema)
            test_data, test_report = clean(test_raw)
            logger.info("test files: %s", test_report.summary())
            test_data = _apply_class_groups(test_data, prep.get("class_groups"))
            if sample_fraction:
                test_data, _ = stratified_split(test_data, sample_fraction, splitmix64(seed, 91))
            pool.append(test_data)
        eval_pool = concat_datasets(pool) if len(pool) > 1 else pool[0]
    elif layout == "byfile":
        train_part = train_data
        if not prep.get("test_files"):
            raise PipelineError("byfile layout requires test_files for validation/test")
        test_raw = _load_files(config, prep["test_files"], schema)
        eval_pool, eval_report = clean(test_raw)
        logger.info("eval files: %s", eval_report.summary())
        eval_pool = _apply_class_groups(eval_pool, prep.get("class_groups"))
        if sample_fraction:
            eval_pool, _ = stratified_split(eval_pool, sample_fraction, splitmix64(seed, 91))
    else:
        raise PipelineError(f"unknown prepare layout {layout!r}")

    validation, test = stratified_split(
        eval_pool, prep.get("validation_fraction", 0.5), splitmix64(seed, 2)
    )
    benign_train = train_part.take(np.flatnonzero(train_part.labels == 0))
    if benign_train.n_rows == 0:
        raise PipelineError("no benign rows in the training portion")

    # categorical expansion fitted on the full cleaned training files so every
    # category observed at training time gets an indicator column
    cat_cols = schema.categorical_columns
    if cat_cols:
        onehot = fit_one_hot(train_data, cat_cols)
        benign_train = apply_one_hot(benign_train, onehot)
        validation = apply_one_hot(validation, onehot)
        test = apply_one_hot(test, onehot)
        scaler_fit_base = apply_one_hot(train_data, onehot)
    else:
        onehot = None
        scaler_fit_base = train_data

    scaler = fit_minmax(scaler_fit_base)
    benign_train = apply_minmax(benign_train, scaler)
    validation = apply_minmax(validation, scaler)
    test = apply_minmax(test, scaler)
    for ds in (benign_train, validation, test):
        ds.validate_clean()

    ens_cfg = EnsembleConfig.from_dict(config.ensemble) if config.ensemble else EnsembleConfig()
    pca_models = {}
    if ens_cfg.n_lof:
        pca_models["lof"] = reduction.fit_pca(benign_train.features, ens_cfg.pca_components_lof)
    if ens_cfg.n_iforest:
        pca_models["iforest"] = reduction.fit_pca(
            benign_train.features, ens_cfg.pca_components_iforest
        )

    artifact.save_dataset(paths["train_benign"], benign_train)
    artifact.save_dataset(paths["validation"], validation)
    artifact.save_dataset(paths["test"], test)
    artifact.save_container(
        paths["scaler"],
        arrays={"mins": scaler.mins, "maxs": scaler.maxs},
        meta={"artifact": "scaler", "feature_names": scaler.feature_names},
    )
    if onehot is not None:
        artifact.save_container(
            paths["onehot"], meta={"artifact": "onehot", "categories": onehot.categories}
        )
    for kind, model in pca_models.items():
        artifact.save_container(
            paths[f"pca_{kind}"],
            arrays={
                "mean": model.mean,
                "components": model.components,
                "evr": model.explained_variance_ratio,
            },
            meta={"artifact": "pca", "kind": kind},
        )
    config.write_resolved(paths["out"])

    summary = {
        "train_benign_rows": benign_train.n_rows,
        "validation_rows": validation.n_rows,
        "test_rows": test.n_rows,
        "n_features": benign_train.n_features,
        "cleaning": vars(train_report),
    }
    logger.info(
        "prepared: %d benign train / %d validation / %d test rows, %d features",
        benign_train.n_rows, validation.n_rows, test.n_rows, benign_train.n_features,
    )
    return summary


# ---------------------------------------------------------------------------
# ensemble training and evaluation
# ---------------------------------------------------------------------------


def _load_pca(config: PipelineConfig, kind: str) -> reduction.PcaModel:
    arrays, meta, _ = artifact.load_container(
        _require(_paths(config)[f"pca_{kind}"], "flowsentry prepare")
    )
    return reduction.PcaModel(
        mean=arrays["mean"], components=arrays["components"],
        explained_variance_ratio=arrays["evr"],
    )


def _cached_votes(config: PipelineConfig, which: str, ens, ds: FlowDataset) -> np.ndarray:
    """Per-learner vote matrix for a prepared split, cached on disk.

    The cache key covers the ensemble fingerprint (seed, config, learner
    thresholds), so retraining with different hyperparameters invalidates it.
    """
    paths = _paths(config)
    cache = paths[f"votes_{which}"]
    tag = f"{ens.fingerprint()}:{ds.n_rows}"
    if cache.exists():
        arrays, meta, _ = artifact.load_container(cache)
        if meta.get("tag") == tag:
            return arrays["votes"]
    votes = ens.learner_votes(ds.features)
    artifact.save_container(cache, arrays={"votes": votes}, meta={"artifact": "votes", "tag": tag})
    return votes


def cmd_train_ensemble(config: PipelineConfig) -> dict:
    """Build, weigh, and persist the detector ensemble."""
    paths = _paths(config)
    benign_train = _load_prepared(config, "train_benign")
    validation = _load_prepared(config, "validation")
    ens_cfg = EnsembleConfig.from_dict(config.ensemble) if config.ensemble else EnsembleConfig()
    pca_by_kind = {}
    if ens_cfg.n_lof:
        pca_by_kind["lof"] = _load_pca(config, "lof")
    if ens_cfg.n_iforest:
        pca_by_kind["iforest"] = _load_pca(config, "iforest")

    ens = build_ensemble(
        benign_train, ens_cfg, master_seed=splitmix64(config.seed, 10), pca_by_kind=pca_by_kind
    )
    votes = ens.learner_votes(validation.features)
    weights = weigh_learners(ens, validation, votes=votes)
    checksum = artifact.save_ensemble(paths["ensemble"], ens)
    artifact.save_container(
        paths["votes_validation"],
        arrays={"votes": votes},
        meta={"artifact": "votes", "tag": f"{ens.fingerprint()}:{validation.n_rows}"},
    )
    config.write_resolved(paths["out"])
    logger.info(
        "ensemble trained: %d learners, weight range [%.3f, %.3f], checksum %s",
        ens.n_learners, weights.min(), weights.max(), checksum[:12],
    )
    return {
        "n_learners": ens.n_learners,
        "weights_min": float(weights.min()),
        "weights_max": float(weights.max()),
        "checksum": checksum,
    }


def _vote_scores(votes: np.ndarray, weights: np.ndarray | None, mode: str) -> np.ndarray:
    """Continuous attack score per row for ROC-AUC."""
    if mode == "WMV":
        _, s_ben, s_att = wmv_labels(votes, weights)
        total = s_ben + s_att
        return np.where(total > 0, s_att / np.where(total > 0, total, 1.0), 0.5)
    return votes.mean(axis=0)


def _write_report(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _metrics_csv(rows: dict[str, dict]) -> str:
    cols = ["accuracy", "precision", "recall", "f1", "roc_auc", "fpr", "tp", "fp", "fn", "tn", "undefined"]
    lines = ["model," + ",".join(cols)]
    for name, row in rows.items():
        lines.append(
            name + "," + ",".join(
                f"{row[c]:.6f}" if isinstance(row.get(c), float) else str(row.get(c, ""))
                for c in cols
            )
        )
    return "\n".join(lines) + "\n"


def cmd_evaluate(config: PipelineConfig, mode: str | None = None) -> dict:
    """Score the ensemble on the test split under MV or WMV voting."""
    paths = _paths(config)
    mode = (mode or config.voting_mode).upper()
    if mode not in ("MV", "WMV"):
        raise PipelineError(f"unknown voting mode {mode!r}")
    ens = artifact.load_ensemble(_require(paths["ensemble"], "flowsentry train-ensemble"))
    test = _load_prepared(config, "test")
    votes = _cached_votes(config, "test", ens, test)

    if mode == "WMV":
        labels, s_ben, s_att = wmv_labels(votes, ens.require_weights())
        ties = float((s_att == s_ben).mean())
    else:
        labels, tie_flags = mv_labels(votes)
        ties = float(tie_flags.mean())
    scores = _vote_scores(votes, ens.weights, mode)
    row = metrics_row(labels, test.labels, scores=scores)
    row["tie_rate"] = ties

    report = _metrics_csv({f"ensemble_{mode}": row})
    report += f"\ntie_rate_{mode},{ties:.6f}\n"
    _write_report(paths["reports"] / f"ensemble_{mode.lower()}_test.csv", report)
    logger.info(
        "ensemble %s on test: F1=%.4f FPR=%.4f tie_rate=%.4f", mode, row["f1"], row["fpr"], ties
    )
    return row


# ---------------------------------------------------------------------------
# refinement
# ---------------------------------------------------------------------------


def _pseudo_from_mode(
    config: PipelineConfig, mode: str, preds: np.ndarray, validation: FlowDataset,
    auto_accept: bool = False,
):
    paths = _paths(config)
    if mode == "oracle":
        return make_pseudo_labels(preds, "oracle", truth=validation.labels)
    if mode == "raw":
        return make_pseudo_labels(preds, "raw")
    if mode == "reviewed":
        if auto_accept:
            ens = artifact.load_ensemble(paths["ensemble"])
            state = ReviewState.from_ensemble(
                ens, validation, paths["decision_log"],
                queue_order=config.review.get("queue_order", "uncertainty"),
            )
            state.replay_log()
            state.auto_accept()
            pseudo = state.finalize()
            artifact.save_pseudo_labels(paths["pseudo_labels"], pseudo)
            return pseudo
        return artifact.load_pseudo_labels(
            _require(
                paths["pseudo_labels"],
                "flowsentry serve-review (decide + finalize), or refine --auto-accept",
            )
        )
    raise PipelineError(f"unknown pseudo-label mode {mode!r}")


def cmd_refine(
    config: PipelineConfig, pseudo_mode: str | None = None, auto_accept: bool = False
) -> dict:
    """Train the second-stage forest from pseudo-labelled detections."""
    paths = _paths(config)
    rcfg = config.refinement
    mode = pseudo_mode or rcfg.get("pseudo_mode", "oracle")
    ens = artifact.load_ensemble(_require(paths["ensemble"], "flowsentry train-ensemble"))
    validation = _load_prepared(config, "validation")
    benign_train = _load_prepared(config, "train_benign")

    votes = _cached_votes(config, "validation", ens, validation)
    preds, _, _ = wmv_labels(votes, ens.require_weights())

    pseudo = _pseudo_from_mode(config, mode, preds, validation, auto_accept=auto_accept)
    corpus = build_refinement_corpus(validation, pseudo, benign_train)
    ranking = information_gain(corpus)
    _write_report(
        paths["reports"] / "information_gain.csv",
        "rank,feature_index,feature,gain\n"
        + "\n".join(
            f"{r},{j},{name},{g:.6f}" for r, (j, name, g) in enumerate(ranking)
        )
        + "\n",
    )

    grid = rcfg.get("grid") or default_grid()
    model, report = train_refinement(
        corpus,
        ranking,
        grid,
        folds=rcfg.get("folds", 10),
        seed=splitmix64(config.seed, 20),
        subset_sizes=rcfg.get("subset_sizes"),
        smote_k=rcfg.get("smote_k", 5),
    )
    # training-set quartiles for the local explainer live with the model
    stats = explain_mod.fit_train_stats(corpus.features[:, model.selected_features])
    checksum = artifact.save_container(
        paths["refinement"],
        arrays={
            "stats_quartiles": stats.quartiles,
            "stats_mins": stats.mins,
            "stats_maxs": stats.maxs,
        },
        meta={
            "artifact": "refinement",
            "selected_features": model.selected_features,
            "feature_names": model.feature_names,
            "params": model.params,
            "seed": model.seed,
            "pseudo_mode": mode,
            "corpus_rows": corpus.n_rows,
        },
        pickles={"forest": model.forest},
    )
    _write_report(paths["reports"] / "grid_search.csv", report.to_csv())
    _write_report(paths["reports"] / "grid_search.txt", report.summary() + "\n")
    config.write_resolved(paths["out"])
    logger.info("refinement trained (%s pseudo-labels): %s", mode, report.summary())
    return {
        "pseudo_mode": mode,
        "pseudo_rows": int(len(pseudo.rows)),
        "corpus_rows": corpus.n_rows,
        "winner": vars(report.winner),
        "checksum": checksum,
    }


def load_refinement(config: PipelineConfig):
    """(ForestModel, TrainStats) from the refinement artifact."""
    from .refinement import ForestModel

    paths = _paths(config)
    arrays, meta, pickles = artifact.load_container(
        _require(paths["refinement"], "flowsentry refine")
    )
    model = ForestModel(
        forest=pickles["forest"],
        selected_features=[int(j) for j in meta["selected_features"]],
        feature_names=list(meta["feature_names"]),
        params=meta["params"],
        seed=int(meta["seed"]),
    )
    stats = explain_mod.TrainStats(
        quartiles=arrays["stats_quartiles"],
        mins=arrays["stats_mins"],
        maxs=arrays["stats_maxs"],
    )
    return model, stats


def cmd_evaluate_final(config: PipelineConfig) -> dict:
    """Full-framework evaluation: ensemble vs refined labels on the test set."""
    paths = _paths(config)
    ens = artifact.load_ensemble(_require(paths["ensemble"], "flowsentry train-ensemble"))
    model, _ = load_refinement(config)
    test = _load_prepared(config, "test")
    votes = _cached_votes(config, "test", ens, test)

    mv_pred, mv_ties = mv_labels(votes)
    wmv_pred, s_ben, s_att = wmv_labels(votes, ens.require_weights())
    final_pred, final_prob = rf_predict_batch(model, restrict(test.features, model))

    rows = {
        "ensemble_MV": metrics_row(mv_pred, test.labels, scores=_vote_scores(votes, None, "MV")),
        "ensemble_WMV": metrics_row(
            wmv_pred, test.labels, scores=_vote_scores(votes, ens.weights, "WMV")
        ),
        "final_combined": metrics_row(final_pred, test.labels, scores=final_prob),
    }
    rows["ensemble_MV"]["tie_rate"] = float(mv_ties.mean())
    rows["ensemble_WMV"]["tie_rate"] = float((s_att == s_ben).mean())

    # diagnostic: the refinement model alone on the flows the ensemble got wrong
    errors = np.flatnonzero(wmv_pred != test.labels)
    if errors.size:
        err_pred, err_prob = final_pred[errors], final_prob[errors]
        try:
            rows["refinement_on_ensemble_errors"] = metrics_row(
                err_pred, test.labels[errors], scores=err_prob
            )
        except ValueError:  # single-class error slice: skip ROC-AUC
            rows["refinement_on_ensemble_errors"] = metrics_row(err_pred, test.labels[errors])

    ens_fpr = rows["ensemble_WMV"]["fpr"]
    fin_fpr = rows["final_combined"]["fpr"]
    reduction_rel = (ens_fpr - fin_fpr) / ens_fpr if ens_fpr > 0 else 0.0
    ablation = (
        "stage,fpr\n"
        f"ensemble_WMV,{ens_fpr:.6f}\n"
        f"final_combined,{fin_fpr:.6f}\n"
        f"relative_reduction,{reduction_rel:.6f}\n"
    )

    _write_report(paths["reports"] / "final_metrics.csv", _metrics_csv(rows))
    _write_report(paths["reports"] / "fpr_ablation.csv", ablation)
    summary = {
        "ensemble_f1": rows["ensemble_WMV"]["f1"],
        "final_f1": rows["final_combined"]["f1"],
        "ensemble_fpr": ens_fpr,
        "final_fpr": fin_fpr,
        "fpr_relative_reduction": reduction_rel,
        "mv_tie_rate": rows["ensemble_MV"]["tie_rate"],
        "wmv_tie_rate": rows["ensemble_WMV"]["tie_rate"],
    }

    if test.class_names is not None:
        ens_table = class_rates(wmv_pred, test.labels, test.class_names)
        fin_table = class_rates(final_pred, test.labels, test.class_names)
        _write_report(paths["reports"] / "class_rates_ensemble.csv", ens_table.to_csv())
        _write_report(paths["reports"] / "class_rates_final.csv", fin_table.to_csv())
        _write_report(
            paths["reports"] / "class_rates.txt",
            "ensemble (WMV):\n" + ens_table.summary() + "\n\nfinal combined:\n"
            + fin_table.summary() + "\n",
        )
        summary["class_rates_ensemble"] = ens_table.rates
        summary["class_rates_final"] = fin_table.rates

    logger.info(
        "final evaluation: ensemble F1=%.4f FPR=%.4f -> final F1=%.4f FPR=%.4f (-%.1f%%)",
        summary["ensemble_f1"], ens_fpr, summary["final_f1"], fin_fpr, 100 * reduction_rel,
    )
    return summary


# ---------------------------------------------------------------------------
# explanations
# ---------------------------------------------------------------------------


def cmd_explain(
    config: PipelineConfig,
    instance_ids: list[int] | None = None,
    errors: bool = False,
    truth_column: bool = True,
) -> list:
    """LIME-style reports for chosen test flows (or every misclassified one)."""
    paths = _paths(config)
    model, stats = load_refinement(config)
    test = _load_prepared(config, "test")
    xcfg = config.explain
    n_samples = xcfg.get("n_samples", 5000)
    top_k = xcfg.get("top_k", 10)

    restricted = restrict(test.features, model)
    if errors:
        if test.labels is None:
            raise PipelineError("--errors needs a labelled test set")
        final_pred, _ = rf_predict_batch(model, restricted)
        instance_ids = np.flatnonzero(final_pred != test.labels).tolist()
        logger.info("explaining %d misclassified flows", len(instance_ids))
    if not instance_ids:
        raise PipelineError("no instances to explain (give ids or --errors)")
    bad = [i for i in instance_ids if not 0 <= i < test.n_rows]
    if bad:
        raise PipelineError(f"instance ids out of range: {bad[:5]} (test has {test.n_rows} rows)")

    def model_fn(X):
        return rf_predict_batch(model, X)[1]

    out = []
    paths["explanations"].mkdir(parents=True, exist_ok=True)
    for i in instance_ids:
        exp = explain_mod.lime_explain(
            model_fn,
            restricted[i],
            stats,
            n_samples=n_samples,
            top_k=min(top_k, len(model.selected_features)),
            seed=splitmix64(config.seed, 30 + i),
            feature_names=model.feature_names,
            instance_id=str(i),
        )
        text = exp.to_text()
        if truth_column and test.labels is not None:
            agree = int(test.labels[i]) == exp.predicted_label
            text += f"\n  truth: {'attack' if test.labels[i] else 'benign'}"
            text += "" if agree else "  ** MISCLASSIFIED **"
        (paths["explanations"] / f"instance_{i}.json").write_text(exp.to_json())
        (paths["explanations"] / f"instance_{i}.txt").write_text(text + "\n")
        out.append(exp)
    return out


def cmd_surrogate(config: PipelineConfig) -> dict:
    """Global surrogate tree + rules + fidelity for the refinement model."""
    paths = _paths(config)
    model, _ = load_refinement(config)
    test = _load_prepared(config, "test")
    xcfg = config.explain
    restricted = restrict(test.features, model)

    def label_fn(X):
        return rf_predict_batch(model, X)[0]

    surrogate = explain_mod.fit_surrogate(
        label_fn,
        restricted,
        max_depth=xcfg.get("surrogate_max_depth"),
        seed=splitmix64(config.seed, 40) % (2**32),
        min_samples_leaf=xcfg.get("surrogate_min_samples_leaf", 5),
        feature_names=model.feature_names,
    )
    rules = explain_mod.extract_rules(
        surrogate, restricted, reference_labels=surrogate.reference_labels
    )
    _write_report(
        paths["reports"] / "surrogate.txt",
        f"fidelity: {surrogate.fidelity:.6f} over {surrogate.training_size} rows, "
        f"{len(rules.rules)} rules\n\n" + rules.to_text() + "\n",
    )
    _write_report(paths["reports"] / "surrogate_rules.csv", rules.to_csv())
    logger.info("surrogate fidelity %.4f (%d rules)", surrogate.fidelity, len(rules.rules))
    return {
        "fidelity": surrogate.fidelity,
        "n_rules": len(rules.rules),
        "coverage_total": sum(r.coverage for r in rules.rules),
        "rows": surrogate.training_size,
    }


# ---------------------------------------------------------------------------
# review service
# ---------------------------------------------------------------------------


def build_review_state(config: PipelineConfig, with_explainer: bool = True) -> ReviewState:
    paths = _paths(config)
    ens = artifact.load_ensemble(_require(paths["ensemble"], "flowsentry train-ensemble"))
    validation = _load_prepared(config, "validation")
    explainer = None
    if with_explainer:
        stats = explain_mod.fit_train_stats(validation.features)
        n_samples = config.review.get("explain_samples", 500)

        def explainer(item_id: int):
            exp = explain_mod.lime_explain(
                ens.attack_probability,
                validation.features[item_id],
                stats,
                n_samples=n_samples,
                top_k=min(10, validation.n_features),
                seed=splitmix64(config.seed, 50 + item_id),
                feature_names=validation.feature_names,
                instance_id=str(item_id),
            )
            return {
                "intercept": exp.intercept,
                "local_fit_r2": exp.local_fit_r2,
                "contributions": [
                    {"feature": n, "weight": w} for n, w in exp.contributions
                ],
            }

    state = ReviewState.from_ensemble(
        ens,
        validation,
        paths["decision_log"],
        queue_order=config.review.get("queue_order", "uncertainty"),
        explainer=explainer,
    )
    state.replay_log()
    return state


def make_review_app(config: PipelineConfig, with_explainer: bool = True):
    paths = _paths(config)
    state = build_review_state(config, with_explainer=with_explainer)

    def sink(pseudo) -> str:
        artifact.save_pseudo_labels(paths["pseudo_labels"], pseudo)
        return str(paths["pseudo_labels"])

    return create_review_app(state, finalize_sink=sink)


def serve_review(config: PipelineConfig, host: str = "127.0.0.1", port: int = 8341):
    """Run the review API until interrupted (bind via FLOWSENTRY_BIND)."""
    import os

    import uvicorn

    bind = os.environ.get("FLOWSENTRY_BIND")
    if bind:
        host, port_s = bind.rsplit(":", 1)
        port = int(port_s)
    app = make_review_app(config)
    logger.info("review service on http://%s:%d", host, port)
    uvicorn.run(app, host=host, port=port, log_level="info")
