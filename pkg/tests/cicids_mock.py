"""CICIDS2017-shaped mock corpus.

Per-day CSVs with the real 79-column header (including the leading spaces
the published files carry), benign-only Monday traffic, and attack mixes on
the other days. Column names come straight from the shipped schema so the
mock can never drift from it. Synthetic distributions; protocol checks only.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import yaml

REPO = Path(__file__).resolve().parents[1]

DAY_MIX = {
    "Monday-WorkingHours.pcap_ISCX.csv": {"BENIGN": 1.0},
    "Tuesday-WorkingHours.pcap_ISCX.csv": {"BENIGN": 0.8, "FTP-Patator": 0.1, "SSH-Patator": 0.1},
    "Wednesday-workingHours.pcap_ISCX.csv": {"BENIGN": 0.6, "DoS Hulk": 0.25, "DoS slowloris": 0.15},
    "Friday-WorkingHours-Afternoon-DDos.pcap_ISCX.csv": {"BENIGN": 0.5, "DDoS": 0.5},
    "Friday-WorkingHours-Afternoon-PortScan.pcap_ISCX.csv": {"BENIGN": 0.45, "PortScan": 0.55},
}


def _schema_columns() -> list[dict]:
    doc = yaml.safe_load((REPO / "configs" / "cicids2017_schema.yaml").read_text())
    return doc["columns"]


def _rows_for(rng: np.random.Generator, label: str, n: int, n_features: int) -> np.ndarray:
    centers = rng.normal(size=(3, n_features)) * 0.4
    rows = centers[rng.integers(0, 3, n)] + rng.normal(scale=0.2, size=(n, n_features))
    if label == "BENIGN":
        return rows
    if label in ("DoS Hulk", "DDoS", "DoS slowloris"):
        rows[:, 0] += rng.uniform(2, 5, n)       # flow duration blowup
        rows[:, 14] += rng.uniform(2, 6, n)      # bytes/s
        rows[:, 15] += rng.uniform(2, 6, n)      # packets/s
    elif label == "PortScan":
        rows[:, 1] = rng.uniform(0, 0.2, n)      # tiny packet counts
        rows[:, 42] += rng.uniform(1.5, 4, n)    # SYN flags
    else:  # patators
        rows[:, 30] += rng.uniform(1, 3, n)      # PSH flags
        rows[:, 59] += rng.uniform(1, 2.5, n)    # subflow bytes
    return rows


def write_mock(directory: str | Path, rows_per_day: int = 700, seed: int = 5) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(seed))
    columns = _schema_columns()
    numeric_names = [c["name"] for c in columns if c["kind"] == "numeric"]
    # published files carry a leading space on every header but the first
    header = [columns[0]["name"]] + [" " + c["name"] for c in columns[1:]]

    paths = []
    for filename, mix in DAY_MIX.items():
        path = directory / filename
        records = []
        for label, share in mix.items():
            n = int(round(rows_per_day * share))
            numeric = _rows_for(rng, label, n, len(numeric_names))
            ports = rng.integers(1, 65536, n)
            for i in range(n):
                values = dict(zip(numeric_names, numeric[i]))
                row = []
                for col in columns:
                    if col["name"] == "Destination Port":
                        row.append(str(ports[i]))
                    elif col["name"] == "Fwd Header Length.1":
                        row.append(f"{values['Fwd Header Length']:.6f}")
                    elif col["kind"] == "label":
                        row.append(label)
                    else:
                        row.append(f"{values[col['name']]:.6f}")
                records.append(row)
        order = rng.permutation(len(records))
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in order:
                writer.writerow(records[i])
        paths.append(path)
    return paths
