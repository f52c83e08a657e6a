"""Synthetic flow corpus for desk-scale runs, demos, and tests.

Generates benign traffic as a mixture of compact clusters plus four attack
behaviours of graded difficulty (volumetric flooding, broad scanning, a
subtle low-rate intrusion, and a rare privilege abuse), written as labelled
CSVs with an accompanying schema and run config. Not a benchmark: it exists
so the full pipeline, review service, and UI can run end-to-end without the
real corpora.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import yaml

NUMERIC = [
    "duration", "src_bytes", "dst_bytes", "rate", "packets",
    "win_size", "iat_mean", "iat_std", "err_rate", "host_count",
]
PROTOS = ["tcp", "udp", "icmp"]
SERVICES = ["http", "dns", "ssh", "ftp", "smtp"]

ATTACK_MIX = {"dos": 0.25, "probe": 0.12, "r2l": 0.06, "u2r": 0.02}


def _benign(rng: np.random.Generator, n: int) -> np.ndarray:
    centers = np.array(
        [
            [0.4, 2.0, 3.0, 0.5, 1.2, 4.0, 0.8, 0.3, 0.02, 1.0],
            [1.1, 3.2, 2.2, 0.9, 2.0, 4.4, 0.5, 0.2, 0.03, 1.4],
            [0.7, 2.6, 3.6, 0.3, 1.6, 3.6, 1.1, 0.4, 0.01, 0.8],
        ]
    )
    which = rng.integers(0, len(centers), n)
    return centers[which] + rng.normal(scale=0.22, size=(n, len(NUMERIC)))


def _attack(rng: np.random.Generator, kind: str, n: int) -> np.ndarray:
    rows = _benign(rng, n)
    if kind == "dos":
        rows[:, 3] += rng.uniform(3.0, 6.0, n)       # rate surge
        rows[:, 4] += rng.uniform(3.0, 6.0, n)       # packet surge
        rows[:, 8] += rng.uniform(0.5, 1.2, n)       # error spike
        rows[:, 6] *= rng.uniform(0.05, 0.3, n)      # tight inter-arrivals
    elif kind == "probe":
        rows[:, 9] += rng.uniform(3.0, 8.0, n)       # many hosts touched
        rows[:, 0] = rng.uniform(0.0, 0.1, n)        # short flows
        rows[:, 6] += rng.uniform(1.5, 3.5, n)
        rows[:, 2] *= rng.uniform(0.05, 0.4, n)      # little return traffic
    elif kind == "r2l":
        rows[:, 1] += rng.uniform(0.55, 1.1, n)      # mildly inflated payloads
        rows[:, 2] += rng.uniform(0.45, 0.9, n)
        rows[:, 5] -= rng.uniform(0.3, 0.7, n)
    elif kind == "u2r":
        rows[:, 0] += rng.uniform(1.5, 3.0, n)       # long sessions
        rows[:, 1] += rng.uniform(1.0, 2.0, n)
        rows[:, 8] += rng.uniform(0.1, 0.3, n)
    else:
        raise ValueError(f"unknown attack kind {kind!r}")
    return rows


def _categoricals(rng: np.random.Generator, kind: str, n: int) -> tuple[list[str], list[str]]:
    if kind == "normal":
        proto = rng.choice(PROTOS, n, p=[0.7, 0.25, 0.05])
        service = rng.choice(SERVICES, n, p=[0.5, 0.25, 0.1, 0.1, 0.05])
    elif kind == "dos":
        proto = rng.choice(PROTOS, n, p=[0.5, 0.2, 0.3])
        service = rng.choice(SERVICES, n, p=[0.8, 0.05, 0.05, 0.05, 0.05])
    elif kind == "probe":
        proto = rng.choice(PROTOS, n, p=[0.45, 0.3, 0.25])
        service = rng.choice(SERVICES, n, p=[0.2, 0.3, 0.2, 0.2, 0.1])
    else:
        proto = rng.choice(PROTOS, n, p=[0.85, 0.1, 0.05])
        service = rng.choice(SERVICES, n, p=[0.15, 0.05, 0.5, 0.25, 0.05])
    return list(proto), list(service)


def write_flow_csv(path: Path, rng: np.random.Generator, n_rows: int) -> None:
    counts = {k: int(round(n_rows * p)) for k, p in ATTACK_MIX.items()}
    counts["normal"] = n_rows - sum(counts.values())
    rows = []
    flow_id = 0
    for kind, n in counts.items():
        numeric = _benign(rng, n) if kind == "normal" else _attack(rng, kind, n)
        protos, services = _categoricals(rng, kind, n)
        for i in range(n):
            rows.append(
                [f"flow-{flow_id}"]
                + [f"{v:.6f}" for v in numeric[i]]
                + [protos[i], services[i], kind]
            )
            flow_id += 1
    order = rng.permutation(len(rows))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["flow_id"] + NUMERIC + ["proto", "service", "label"])
        for i in order:
            writer.writerow(rows[i])


def schema_dict() -> dict:
    columns = [{"name": "flow_id", "kind": "drop"}]
    columns += [{"name": c, "kind": "numeric"} for c in NUMERIC]
    columns += [
        {"name": "proto", "kind": "categorical"},
        {"name": "service", "kind": "categorical"},
        {"name": "label", "kind": "label"},
    ]
    return {"columns": columns, "benign_label_values": ["normal"], "has_header": True}


def config_dict(seed: int = 2024) -> dict:
    return {
        "dataset": "synthetic",
        "output_dir": "run",
        "seed": seed,
        "schema": "schema.yaml",
        "prepare": {
            "train_files": ["train.csv"],
            "test_files": ["test.csv"],
            "layout": "resplit",
            "train_fraction": 0.6,
            "validation_fraction": 0.5,
        },
        "ensemble": {
            "n_lof": 10,
            "n_iforest": 10,
            "lof_k": 8,
            "lof_contamination": 0.15,
            "iforest_n_trees": 50,
            "iforest_max_samples": "auto",
            "iforest_contamination": 0.15,
            "pca_components_lof": 4,
            "pca_components_iforest": 6,
            "bootstrap_size": None,
        },
        "voting_mode": "WMV",
        "refinement": {
            "pseudo_mode": "oracle",
            "grid": {"n_estimators": [60], "max_depth": [None, 10]},
            "subset_sizes": [5, 8, 12],
            "folds": 10,
            "smote_k": 5,
        },
        "explain": {"n_samples": 2000, "top_k": 8},
        "review": {"queue_order": "uncertainty", "page_size": 20, "explain_samples": 300},
    }


def write_corpus(
    directory: str | Path, n_train: int = 4000, n_test: int = 2500, seed: int = 7
) -> dict[str, Path]:
    """Write train/test CSVs, schema, and a ready-to-run config."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(seed))
    paths = {
        "train": directory / "train.csv",
        "test": directory / "test.csv",
        "schema": directory / "schema.yaml",
        "config": directory / "config.yaml",
    }
    write_flow_csv(paths["train"], rng, n_train)
    write_flow_csv(paths["test"], rng, n_test)
    paths["schema"].write_text(yaml.safe_dump(schema_dict(), sort_keys=False))
    paths["config"].write_text(yaml.safe_dump(config_dict(seed=seed), sort_keys=False))
    return paths
