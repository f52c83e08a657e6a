"""Flow-record ingestion, cleaning, encoding, scaling, and splitting.

CSV dialect: comma-separated, UTF-8, header row unless the schema says
otherwise (NSL-KDD ships headerless). All transformations are pure: they
return new FlowDataset instances and never mutate their inputs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

logger = logging.getLogger(__name__)

COLUMN_KINDS = ("numeric", "categorical", "label", "drop")


class SchemaError(ValueError):
    """CSV structure does not match the feature schema."""


class CleanError(ValueError):
    """Cleaning removed every row; nothing left to train on."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in COLUMN_KINDS:
            raise SchemaError(f"unknown column kind {self.kind!r} for {self.name!r}")


@dataclass
class FeatureSchema:
    """Typed column list for a flow CSV plus the benign label values.

    Exactly one column must have kind=label; drop-kind columns house
    identifier-like fields (flow ids, addresses, ports) that are discarded
    at load time.
    """

    columns: list[ColumnSpec]
    benign_label_values: set[str]
    has_header: bool = True

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate column names in schema: {dupes}")
        labels = [c for c in self.columns if c.kind == "label"]
        if len(labels) != 1:
            raise SchemaError(f"schema must have exactly one label column, found {len(labels)}")

    @property
    def label_column(self) -> str:
        return next(c.name for c in self.columns if c.kind == "label")

    def kept_columns(self) -> list[ColumnSpec]:
        return [c for c in self.columns if c.kind in ("numeric", "categorical")]

    @property
    def categorical_columns(self) -> list[str]:
        return [c.name for c in self.columns if c.kind == "categorical"]

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureSchema":
        cols = [ColumnSpec(str(c["name"]), str(c["kind"])) for c in doc["columns"]]
        return cls(
            columns=cols,
            benign_label_values={str(v) for v in doc["benign_label_values"]},
            has_header=bool(doc.get("has_header", True)),
        )

    @classmethod
    def from_yaml(cls, path: str | Path) -> "FeatureSchema":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def to_dict(self) -> dict:
        return {
            "columns": [{"name": c.name, "kind": c.kind} for c in self.columns],
            "benign_label_values": sorted(self.benign_label_values),
            "has_header": self.has_header,
        }


@dataclass
class FlowDataset:
    """Dense feature matrix with optional binary labels.

    Categorical columns are held as float codes into the per-column
    ``categories`` tables (lexicographically sorted observed values) until
    one-hot expansion replaces them with indicators. ``class_names`` keeps
    the original multi-class label strings for per-class rate analysis.
    ``row_origin`` tags row provenance ("raw", "synthetic", ...).
    """

    features: np.ndarray
    feature_names: list[str]
    labels: np.ndarray | None = None
    class_names: np.ndarray | None = None
    categories: dict[str, list[str]] = field(default_factory=dict)
    row_origin: np.ndarray | None = None
    invalid_rows: np.ndarray | None = None
    provenance: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        if len(self.feature_names) != self.features.shape[1]:
            raise ValueError(
                f"{len(self.feature_names)} feature names for "
                f"{self.features.shape[1]} columns"
            )
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if len(self.labels) != len(self.features):
                raise ValueError("labels length must equal feature row count")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.features[:, self.feature_names.index(name)]

    def take(self, idx: np.ndarray, provenance_suffix: str = "") -> "FlowDataset":
        """Row subset (pure)."""
        return FlowDataset(
            features=self.features[idx],
            feature_names=list(self.feature_names),
            labels=None if self.labels is None else self.labels[idx],
            class_names=None if self.class_names is None else self.class_names[idx],
            categories=dict(self.categories),
            row_origin=None if self.row_origin is None else self.row_origin[idx],
            invalid_rows=None if self.invalid_rows is None else self.invalid_rows[idx],
            provenance=self.provenance + provenance_suffix,
        )

    def validate_clean(self) -> None:
        if not np.isfinite(self.features).all():
            raise ValueError("dataset contains NaN/Inf after cleaning")


@dataclass
class CleaningReport:
    rows_in: int = 0
    duplicates: int = 0
    missing: int = 0
    invalid: int = 0
    rows_out: int = 0

    def summary(self) -> str:
        return (
            f"cleaning: {self.rows_in} rows in, {self.rows_out} kept "
            f"({self.duplicates} duplicate, {self.missing} missing, "
            f"{self.invalid} invalid removed)"
        )


def load_flow_csv(path: str | Path, schema: FeatureSchema) -> FlowDataset:
    """Load one flow CSV under a schema.

    Drop-kind columns are removed, the label column is binarized
    (benign_label_values -> 0, everything else -> 1), numeric columns are
    parsed as floats, and categorical columns are factor-encoded against
    their lexicographically sorted observed values. Cells that fail numeric
    parsing mark their row invalid for ``clean`` to remove and count.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"flow CSV not found: {path}")

    schema_names = [c.name for c in schema.columns]
    if schema.has_header:
        frame = pd.read_csv(path, header=0, skipinitialspace=True, low_memory=False)
        frame.columns = [str(c).strip() for c in frame.columns]
        unknown = [c for c in frame.columns if c not in schema_names]
        if unknown:
            raise SchemaError(f"{path.name}: columns not in schema: {unknown[:8]}")
        missing = [c for c in schema_names if c not in frame.columns]
        if missing:
            raise SchemaError(f"{path.name}: schema columns missing from CSV: {missing[:8]}")
    else:
        frame = pd.read_csv(path, header=None, low_memory=False)
        if frame.shape[1] != len(schema_names):
            raise SchemaError(
                f"{path.name}: headerless CSV has {frame.shape[1]} columns, "
                f"schema expects {len(schema_names)}"
            )
        frame.columns = schema_names

    n = len(frame)
    invalid_rows = np.zeros(n, dtype=bool)

    label_raw = frame[schema.label_column].astype(str).str.strip()
    class_names = label_raw.to_numpy(dtype=object)
    labels = (~label_raw.isin(schema.benign_label_values)).to_numpy().astype(np.int8)

    kept = schema.kept_columns()
    matrix = np.empty((n, len(kept)), dtype=np.float64)
    categories: dict[str, list[str]] = {}
    for j, col in enumerate(kept):
        raw = frame[col.name]
        if col.kind == "numeric":
            values = pd.to_numeric(raw, errors="coerce")
            # non-empty cells that failed to parse are invalid, not missing
            bad = values.isna() & raw.notna() & (raw.astype(str).str.strip() != "")
            if bad.any():
                invalid_rows |= bad.to_numpy()
            matrix[:, j] = values.to_numpy(dtype=np.float64)
        else:
            strvals = raw.astype(str).str.strip()
            present = raw.notna()
            cats = sorted(strvals[present].unique())
            categories[col.name] = cats
            codes = np.searchsorted(np.array(cats), strvals.to_numpy(dtype=object))
            col_vals = codes.astype(np.float64)
            col_vals[~present.to_numpy()] = np.nan
            matrix[:, j] = col_vals

    ds = FlowDataset(
        features=matrix,
        feature_names=[c.name for c in kept],
        labels=labels,
        class_names=class_names,
        categories=categories,
        invalid_rows=invalid_rows,
        provenance=f"{path.name}",
    )
    logger.info("loaded %s: %d rows, %d columns kept", path.name, n, len(kept))
    return ds


def concat_datasets(parts: list[FlowDataset]) -> FlowDataset:
    """Row-wise concatenation; feature names must agree, categories are merged.

    Category tables are re-unioned and codes remapped so the merged dataset
    has one consistent lexicographic code table per categorical column.
    """
    if not parts:
        raise ValueError("nothing to concatenate")
    names = parts[0].feature_names
    for p in parts[1:]:
        if p.feature_names != names:
            raise SchemaError("cannot concatenate datasets with different columns")
    cat_cols = sorted({c for p in parts for c in p.categories})
    merged_cats: dict[str, list[str]] = {
        c: sorted({v for p in parts if c in p.categories for v in p.categories[c]})
        for c in cat_cols
    }
    blocks = []
    for p in parts:
        feats = p.features.copy()
        for c in cat_cols:
            j = names.index(c)
            old = p.categories.get(c, [])
            remap = np.array([merged_cats[c].index(v) for v in old], dtype=np.float64)
            col = feats[:, j]
            ok = ~np.isnan(col)
            feats[ok, j] = remap[col[ok].astype(int)]
        blocks.append(feats)

    def _stack(attr):
        vals = [getattr(p, attr) for p in parts]
        if any(v is None for v in vals):
            return None
        return np.concatenate(vals)

    return FlowDataset(
        features=np.vstack(blocks),
        feature_names=list(names),
        labels=_stack("labels"),
        class_names=_stack("class_names"),
        categories=merged_cats,
        row_origin=_stack("row_origin"),
        invalid_rows=_stack("invalid_rows"),
        provenance="+".join(p.provenance for p in parts if p.provenance),
    )


def clean(ds: FlowDataset) -> tuple[FlowDataset, CleaningReport]:
    """Remove invalid rows (Inf or unparsable cells), rows with missing
    values, then exact duplicates (identical features and label), in that
    order. Idempotent."""
    report = CleaningReport(rows_in=ds.n_rows)

    invalid = np.isinf(ds.features).any(axis=1)
    if ds.invalid_rows is not None:
        invalid = invalid | ds.invalid_rows
    report.invalid = int(invalid.sum())

    missing = np.isnan(ds.features).any(axis=1) & ~invalid
    report.missing = int(missing.sum())

    keep = ~(invalid | missing)
    idx = np.flatnonzero(keep)

    seen: set[bytes] = set()
    kept_idx = []
    labels = ds.labels
    names = ds.class_names
    for i in idx:
        key = ds.features[i].tobytes()
        if labels is not None:
            key += bytes([int(labels[i])])
        if names is not None:
            key += str(names[i]).encode()
        if key in seen:
            continue
        seen.add(key)
        kept_idx.append(i)
    report.duplicates = len(idx) - len(kept_idx)
    report.rows_out = len(kept_idx)

    if report.rows_out == 0:
        raise CleanError("cleaning removed every row")

    out = ds.take(np.array(kept_idx, dtype=np.intp))
    out.invalid_rows = None
    out.provenance = ds.provenance + "|clean"
    return out, report


@dataclass
class OneHotParams:
    """Fitted one-hot expansion: per column, the category list (sorted)."""

    categories: dict[str, list[str]]

    def to_dict(self) -> dict:
        return {"categories": self.categories}

    @classmethod
    def from_dict(cls, doc: dict) -> "OneHotParams":
        return cls(categories={k: list(v) for k, v in doc["categories"].items()})


def fit_one_hot(ds: FlowDataset, cols: list[str]) -> OneHotParams:
    for c in cols:
        if c not in ds.categories:
            raise SchemaError(f"column {c!r} is not categorical in this dataset")
    return OneHotParams(categories={c: list(ds.categories[c]) for c in cols})


def apply_one_hot(ds: FlowDataset, params: OneHotParams) -> FlowDataset:
    """Expand fitted categorical columns into 0/1 indicators.

    Values unseen at fit time encode as all-zero indicator rows with a
    logged warning, so a deployed pipeline degrades gracefully.
    """
    new_cols: list[np.ndarray] = []
    new_names: list[str] = []
    for j, name in enumerate(ds.feature_names):
        col = ds.features[:, j]
        if name not in params.categories:
            new_cols.append(col)
            new_names.append(name)
            continue
        fit_cats = params.categories[name]
        own_cats = ds.categories.get(name)
        if own_cats is None:
            raise SchemaError(f"column {name!r} has no category table in this dataset")
        # map this dataset's codes onto the fitted category positions
        pos_of_own = np.array(
            [fit_cats.index(v) if v in fit_cats else -1 for v in own_cats], dtype=np.int64
        )
        codes = col.astype(np.int64)
        mapped = pos_of_own[codes]
        n_unseen = int((mapped < 0).sum())
        if n_unseen:
            unseen_vals = sorted({own_cats[c] for c in np.unique(codes[mapped < 0])})
            logger.warning(
                "column %r: %d rows with categories unseen at fit time %s -> all-zero",
                name, n_unseen, unseen_vals[:5],
            )
        block = np.zeros((ds.n_rows, len(fit_cats)), dtype=np.float64)
        rows = np.flatnonzero(mapped >= 0)
        block[rows, mapped[rows]] = 1.0
        new_cols.extend(block.T)
        new_names.extend(f"{name}={cat}" for cat in fit_cats)

    remaining = {c: v for c, v in ds.categories.items() if c not in params.categories}
    return FlowDataset(
        features=np.column_stack(new_cols) if new_cols else np.empty((ds.n_rows, 0)),
        feature_names=new_names,
        labels=ds.labels,
        class_names=ds.class_names,
        categories=remaining,
        row_origin=ds.row_origin,
        invalid_rows=ds.invalid_rows,
        provenance=ds.provenance + "|onehot",
    )


def one_hot(ds: FlowDataset, cols: list[str]) -> FlowDataset:
    """Fit-and-apply one-hot expansion on the same dataset."""
    return apply_one_hot(ds, fit_one_hot(ds, cols))


@dataclass
class ScalerParams:
    """Per-feature min/max fitted on training data."""

    mins: np.ndarray
    maxs: np.ndarray
    feature_names: list[str]

    def __post_init__(self):
        self.mins = np.asarray(self.mins, dtype=np.float64)
        self.maxs = np.asarray(self.maxs, dtype=np.float64)
        if np.any(self.mins > self.maxs):
            raise ValueError("scaler mins exceed maxs")


def fit_minmax(ds: FlowDataset) -> ScalerParams:
    if not np.isfinite(ds.features).all():
        raise ValueError("fit_minmax requires cleaned (finite) data")
    return ScalerParams(
        mins=ds.features.min(axis=0),
        maxs=ds.features.max(axis=0),
        feature_names=list(ds.feature_names),
    )


def apply_minmax(ds: FlowDataset, params: ScalerParams) -> FlowDataset:
    """Scale to [0,1] by the fitted ranges.

    Out-of-range values clamp to [0,1]; constant features map to 0.
    """
    if ds.feature_names != params.feature_names:
        raise SchemaError("scaler was fitted on different columns")
    span = params.maxs - params.mins
    safe = np.where(span > 0, span, 1.0)
    scaled = (ds.features - params.mins) / safe
    scaled[:, span == 0] = 0.0
    np.clip(scaled, 0.0, 1.0, out=scaled)
    return replace(ds, features=scaled, provenance=ds.provenance + "|minmax")


def stratified_split(
    ds: FlowDataset, fraction: float, seed: int
) -> tuple[FlowDataset, FlowDataset]:
    """Deterministic stratified two-way split.

    Strata are the original multi-class labels when present (so rare attack
    classes land on both sides), else the binary labels. The first part
    receives ``fraction`` of each stratum (rounded, clamped so neither side
    loses a whole stratum). Partitions rows exactly.
    """
    if ds.labels is None:
        raise ValueError("stratified_split requires labels")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0,1), got {fraction}")
    strata = ds.class_names if ds.class_names is not None else ds.labels
    strata = np.asarray(strata)
    rng = np.random.Generator(np.random.PCG64(seed))
    first: list[np.ndarray] = []
    second: list[np.ndarray] = []
    for value in sorted(np.unique(strata), key=str):
        idx = np.flatnonzero(strata == value)
        if len(idx) < 2:
            raise ValueError(f"stratum {value!r} has fewer than 2 rows; cannot split")
        perm = rng.permutation(len(idx))
        n_first = int(round(fraction * len(idx)))
        n_first = min(max(n_first, 1), len(idx) - 1)
        first.append(idx[perm[:n_first]])
        second.append(idx[perm[n_first:]])
    a = np.sort(np.concatenate(first))
    b = np.sort(np.concatenate(second))
    return (
        ds.take(a, provenance_suffix=f"|split{fraction:.3f}a"),
        ds.take(b, provenance_suffix=f"|split{fraction:.3f}b"),
    )
