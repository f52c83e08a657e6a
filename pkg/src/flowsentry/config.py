"""Run configuration: YAML document validated against a published schema.

Every command writes the resolved config next to its artifacts so a run is
self-describing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import yaml

from .dataio import FeatureSchema

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["dataset", "output_dir", "seed", "schema", "prepare", "ensemble"],
    "properties": {
        "dataset": {"type": "string"},
        "output_dir": {"type": "string"},
        "seed": {"type": "integer"},
        "schema": {"type": "string"},
        "prepare": {
            "type": "object",
            "required": ["train_files"],
            "properties": {
                "train_files": {"type": "array", "items": {"type": "string"}},
                "test_files": {"type": "array", "items": {"type": "string"}},
                "layout": {"enum": ["resplit", "byfile"]},
                "train_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "validation_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "sample_fraction": {"type": ["number", "null"]},
                "class_groups": {"type": "object"},
            },
        },
        "ensemble": {
            "type": "object",
            "properties": {
                "n_lof": {"type": "integer", "minimum": 0},
                "n_iforest": {"type": "integer", "minimum": 0},
                "lof_k": {"type": "integer", "minimum": 1},
                "lof_contamination": {"type": "number"},
                "iforest_n_trees": {"type": "integer", "minimum": 1},
                "iforest_max_samples": {"type": ["string", "number"]},
                "iforest_contamination": {"type": "number"},
                "pca_components_lof": {"type": "integer", "minimum": 1},
                "pca_components_iforest": {"type": "integer", "minimum": 1},
                "bootstrap_size": {"type": ["integer", "null"]},
                "lof_overrides": {"type": ["array", "null"]},
                "iforest_overrides": {"type": ["array", "null"]},
            },
        },
        "voting_mode": {"enum": ["MV", "WMV"]},
        "refinement": {
            "type": "object",
            "properties": {
                "pseudo_mode": {"enum": ["oracle", "reviewed", "raw"]},
                "grid": {"type": ["object", "array"]},
                "subset_sizes": {"type": ["array", "null"]},
                "folds": {"type": "integer", "minimum": 2},
                "smote_k": {"type": "integer", "minimum": 1},
            },
        },
        "explain": {
            "type": "object",
            "properties": {
                "n_samples": {"type": "integer"},
                "top_k": {"type": "integer"},
                "surrogate_max_depth": {"type": ["integer", "null"]},
                "surrogate_min_samples_leaf": {"type": "integer"},
            },
        },
        "review": {
            "type": "object",
            "properties": {
                "queue_order": {"enum": ["uncertainty", "index"]},
                "page_size": {"type": "integer", "minimum": 1},
                "explain_samples": {"type": "integer"},
            },
        },
    },
}


@dataclass
class PipelineConfig:
    dataset: str
    output_dir: Path
    seed: int
    schema_path: Path
    prepare: dict
    ensemble: dict
    voting_mode: str = "WMV"
    refinement: dict = field(default_factory=dict)
    explain: dict = field(default_factory=dict)
    review: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    @classmethod
    def from_yaml(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
        jsonschema.validate(doc, CONFIG_SCHEMA)
        base = path.parent
        return cls(
            dataset=doc["dataset"],
            output_dir=(base / doc["output_dir"]).resolve(),
            seed=int(doc["seed"]),
            schema_path=(base / doc["schema"]).resolve(),
            prepare=doc["prepare"],
            ensemble=doc.get("ensemble", {}),
            voting_mode=doc.get("voting_mode", "WMV"),
            refinement=doc.get("refinement", {}),
            explain=doc.get("explain", {}),
            review=doc.get("review", {}),
            base_dir=base.resolve(),
        )

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "output_dir": str(self.output_dir),
            "seed": self.seed,
            "schema": str(self.schema_path),
            "prepare": self.prepare,
            "ensemble": self.ensemble,
            "voting_mode": self.voting_mode,
            "refinement": self.refinement,
            "explain": self.explain,
            "review": self.review,
        }

    def load_schema(self) -> FeatureSchema:
        return FeatureSchema.from_yaml(self.schema_path)

    def resolve_path(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else (self.base_dir / path)

    def write_resolved(self, directory: Path) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        out = directory / "resolved_config.json"
        out.write_text(json.dumps(self.to_dict(), indent=2, default=str))
        return out
