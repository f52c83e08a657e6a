"""Versioned, byte-reproducible artifact containers.

A container is a zip holding a ``meta.json`` document, ``.npy`` array
entries, optional pickle entries, and a content checksum. Zip timestamps are
pinned so the same content always produces the same bytes; a reloaded
container reproduces bit-identical predictions.
"""

from __future__ import annotations

import hashlib
import io
import json
import pickle
import zipfile
from pathlib import Path

import numpy as np

from . import detectors, reduction
from .ensemble import EnsembleConfig, EnsembleModel, Learner
from .refinement import ForestModel, PseudoLabelSet, ReviewDecision

FORMAT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


def _write_entry(zf: zipfile.ZipFile, name: str, payload: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    zf.writestr(info, payload)


def save_container(
    path: str | Path,
    arrays: dict[str, np.ndarray] | None = None,
    meta: dict | None = None,
    pickles: dict[str, object] | None = None,
) -> str:
    """Write a container and return its content checksum (sha256 hex)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = arrays or {}
    pickles = pickles or {}
    meta = dict(meta or {})
    meta["format_version"] = FORMAT_VERSION

    entries: dict[str, bytes] = {}
    for name, arr in arrays.items():
        buf = io.BytesIO()
        np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
        entries[f"arrays/{name}.npy"] = buf.getvalue()
    for name, obj in pickles.items():
        entries[f"pickles/{name}.pkl"] = pickle.dumps(obj, protocol=4)
    entries["meta.json"] = json.dumps(meta, indent=2, sort_keys=True, default=str).encode()

    digest = hashlib.sha256()
    for name in sorted(entries):
        digest.update(name.encode())
        digest.update(entries[name])
    checksum = digest.hexdigest()

    with zipfile.ZipFile(path, "w") as zf:
        for name in sorted(entries):
            _write_entry(zf, name, entries[name])
        _write_entry(zf, "checksum.txt", checksum.encode())
    return checksum


def load_container(path: str | Path) -> tuple[dict[str, np.ndarray], dict, dict[str, object]]:
    """Read a container back; verifies the stored content checksum."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"artifact not found: {path}")
    arrays: dict[str, np.ndarray] = {}
    pickles: dict[str, object] = {}
    entries: dict[str, bytes] = {}
    with zipfile.ZipFile(path, "r") as zf:
        for name in zf.namelist():
            if name == "checksum.txt":
                stored = zf.read(name).decode()
                continue
            entries[name] = zf.read(name)
    digest = hashlib.sha256()
    for name in sorted(entries):
        digest.update(name.encode())
        digest.update(entries[name])
    if digest.hexdigest() != stored:
        raise ValueError(f"artifact checksum mismatch: {path}")
    meta = json.loads(entries.pop("meta.json"))
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(
            f"unsupported artifact format version {meta.get('format_version')}"
        )
    for name, payload in entries.items():
        if name.startswith("arrays/"):
            arrays[name[len("arrays/") : -len(".npy")]] = np.load(io.BytesIO(payload))
        elif name.startswith("pickles/"):
            pickles[name[len("pickles/") : -len(".pkl")]] = pickle.loads(payload)
    return arrays, meta, pickles


# ---------------------------------------------------------------------------
# Ensemble container
# ---------------------------------------------------------------------------


def save_ensemble(path: str | Path, ens: EnsembleModel) -> str:
    arrays: dict[str, np.ndarray] = {}
    learner_meta = []
    for kind, pca in ens.pca_by_kind.items():
        arrays[f"pca/{kind}/mean"] = pca.mean
        arrays[f"pca/{kind}/components"] = pca.components
        arrays[f"pca/{kind}/evr"] = pca.explained_variance_ratio
    for i, lr in enumerate(ens.learners):
        tag = f"learner{i:03d}"
        entry = {
            "kind": lr.kind,
            "bootstrap_seed": lr.bootstrap_seed,
            "params": lr.params,
            "calibration": {
                "contamination": lr.calibration.contamination,
                "threshold": lr.calibration.threshold,
                "train_score_quantile": lr.calibration.train_score_quantile,
            },
        }
        model = lr.model
        if lr.kind == "lof":
            arrays[f"{tag}/refs"] = model.reference_points
            arrays[f"{tag}/kdist"] = model.kdist
            arrays[f"{tag}/lrd"] = model.lrd
            arrays[f"{tag}/train_scores"] = model.train_scores
            entry["k"] = model.k
        else:
            offsets = np.cumsum([0] + [len(t.feature) for t in model.trees])
            arrays[f"{tag}/feature"] = np.concatenate([t.feature for t in model.trees])
            arrays[f"{tag}/threshold"] = np.concatenate([t.threshold for t in model.trees])
            arrays[f"{tag}/left"] = np.concatenate([t.left for t in model.trees])
            arrays[f"{tag}/size"] = np.concatenate([t.size for t in model.trees])
            arrays[f"{tag}/offsets"] = offsets
            entry["subsample_size"] = model.subsample_size
            entry["n_trees"] = model.n_trees
            entry["seed"] = model.seed
            entry["n_features"] = model.n_features
            entry["depth_cap"] = model.depth_cap
        learner_meta.append(entry)
    if ens.weights is not None:
        arrays["weights"] = ens.weights
    meta = {
        "artifact": "ensemble",
        "master_seed": ens.master_seed,
        "config": ens.config.to_dict(),
        "learners": learner_meta,
    }
    return save_container(path, arrays=arrays, meta=meta)


def load_ensemble(path: str | Path) -> EnsembleModel:
    arrays, meta, _ = load_container(path)
    if meta.get("artifact") != "ensemble":
        raise ValueError(f"{path} is not an ensemble artifact")
    pca_by_kind = {}
    for kind in ("lof", "iforest"):
        key = f"pca/{kind}/mean"
        if key in arrays:
            pca_by_kind[kind] = reduction.PcaModel(
                mean=arrays[key],
                components=arrays[f"pca/{kind}/components"],
                explained_variance_ratio=arrays[f"pca/{kind}/evr"],
            )
    learners = []
    for i, entry in enumerate(meta["learners"]):
        tag = f"learner{i:03d}"
        cal = detectors.ThresholdCalibration(**entry["calibration"])
        if entry["kind"] == "lof":
            model = detectors.LofModel(
                reference_points=arrays[f"{tag}/refs"],
                k=int(entry["k"]),
                kdist=arrays[f"{tag}/kdist"],
                lrd=arrays[f"{tag}/lrd"],
                train_scores=arrays[f"{tag}/train_scores"],
            )
        else:
            offsets = arrays[f"{tag}/offsets"]
            trees = []
            for t in range(len(offsets) - 1):
                lo, hi = offsets[t], offsets[t + 1]
                trees.append(
                    detectors.IsolationTree(
                        feature=arrays[f"{tag}/feature"][lo:hi],
                        threshold=arrays[f"{tag}/threshold"][lo:hi],
                        left=arrays[f"{tag}/left"][lo:hi],
                        size=arrays[f"{tag}/size"][lo:hi],
                    )
                )
            model = detectors.IForestModel(
                trees=trees,
                subsample_size=int(entry["subsample_size"]),
                n_trees=int(entry["n_trees"]),
                seed=int(entry["seed"]),
                n_features=int(entry["n_features"]),
                depth_cap=int(entry["depth_cap"]),
            )
        learners.append(
            Learner(
                kind=entry["kind"],
                model=model,
                calibration=cal,
                bootstrap_seed=int(entry["bootstrap_seed"]),
                params=entry["params"],
            )
        )
    return EnsembleModel(
        learners=learners,
        pca_by_kind=pca_by_kind,
        master_seed=int(meta["master_seed"]),
        config=EnsembleConfig.from_dict(meta["config"]),
        weights=arrays.get("weights"),
    )


# ---------------------------------------------------------------------------
# Refinement model and pseudo-label containers
# ---------------------------------------------------------------------------


def save_forest(path: str | Path, model: ForestModel) -> str:
    meta = {
        "artifact": "refinement",
        "selected_features": model.selected_features,
        "feature_names": model.feature_names,
        "params": model.params,
        "seed": model.seed,
    }
    return save_container(path, meta=meta, pickles={"forest": model.forest})


def load_forest(path: str | Path) -> ForestModel:
    _, meta, pickles = load_container(path)
    if meta.get("artifact") != "refinement":
        raise ValueError(f"{path} is not a refinement artifact")
    return ForestModel(
        forest=pickles["forest"],
        selected_features=[int(j) for j in meta["selected_features"]],
        feature_names=list(meta["feature_names"]),
        params=meta["params"],
        seed=int(meta["seed"]),
    )


def save_pseudo_labels(path: str | Path, pseudo: PseudoLabelSet) -> str:
    meta = {
        "artifact": "pseudo_labels",
        "mode": pseudo.mode,
        "n_excluded": pseudo.n_excluded,
        "decisions": [
            {"row": d.row, "action": d.action, "label": d.label, "timestamp": d.timestamp}
            for d in pseudo.decisions
        ],
    }
    return save_container(
        path,
        arrays={"rows": pseudo.rows, "pseudo_labels": pseudo.pseudo_labels},
        meta=meta,
    )


def load_pseudo_labels(path: str | Path) -> PseudoLabelSet:
    arrays, meta, _ = load_container(path)
    if meta.get("artifact") != "pseudo_labels":
        raise ValueError(f"{path} is not a pseudo-label artifact")
    decisions = [
        ReviewDecision(int(d["row"]), d["action"], d.get("label"), d.get("timestamp", ""))
        for d in meta.get("decisions", [])
    ]
    return PseudoLabelSet(
        rows=arrays["rows"],
        pseudo_labels=arrays["pseudo_labels"],
        mode=meta["mode"],
        decisions=decisions,
        n_excluded=int(meta.get("n_excluded", 0)),
    )


# ---------------------------------------------------------------------------
# Dataset container
# ---------------------------------------------------------------------------


def save_dataset(path: str | Path, ds) -> str:
    from .dataio import FlowDataset  # local import to avoid cycle at module load

    assert isinstance(ds, FlowDataset)
    arrays = {"features": ds.features}
    meta = {
        "artifact": "dataset",
        "feature_names": ds.feature_names,
        "categories": ds.categories,
        "provenance": ds.provenance,
    }
    if ds.labels is not None:
        arrays["labels"] = ds.labels
    if ds.class_names is not None:
        arrays["class_names"] = np.array([str(c) for c in ds.class_names], dtype="U64")
    return save_container(path, arrays=arrays, meta=meta)


def load_dataset(path: str | Path):
    from .dataio import FlowDataset

    arrays, meta, _ = load_container(path)
    if meta.get("artifact") != "dataset":
        raise ValueError(f"{path} is not a dataset artifact")
    class_names = arrays.get("class_names")
    return FlowDataset(
        features=arrays["features"],
        feature_names=list(meta["feature_names"]),
        labels=arrays.get("labels"),
        class_names=None if class_names is None else class_names.astype(object),
        categories={k: list(v) for k, v in meta.get("categories", {}).items()},
        provenance=meta.get("provenance", ""),
    )
