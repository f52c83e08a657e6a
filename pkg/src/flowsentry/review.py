"""Analyst review checkpoint between detection and refinement.

Holds the queue of ensemble-labelled flows awaiting validation, an
append-only decision log, and the HTTP JSON API the review UI consumes.
Decisions are idempotent: repeating an identical decision is a no-op,
posting a different one for an already-decided item is a conflict. Replaying
the decision log reconstructs the exact reviewed pseudo-label set.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Literal, Optional

import numpy as np

from .ensemble import EnsembleModel, wmv_labels
from .refinement import PseudoLabelSet, ReviewDecision

logger = logging.getLogger(__name__)

TERMINAL = {"approve": "approved", "reject": "rejected", "relabel": "relabelled"}


class DecisionConflict(Exception):
    """A different decision already exists for this item."""


@dataclass
class ReviewItem:
    item_id: int
    ensemble_label: int
    score_attack: float
    score_benign: float
    status: str = "pending"
    decided_label: int | None = None

    @property
    def margin(self) -> float:
        return abs(self.score_attack - self.score_benign)

    def summary(self) -> dict:
        return {
            "id": self.item_id,
            "ensemble_label": self.ensemble_label,
            "score_attack": self.score_attack,
            "score_benign": self.score_benign,
            "margin": self.margin,
            "status": self.status,
        }


class ReviewState:
    """Queue + decision log for one ensemble run over a labelled pool."""

    def __init__(
        self,
        features: np.ndarray,
        feature_names: list[str],
        votes: np.ndarray,
        weights: np.ndarray,
        log_path: str | Path,
        queue_order: str = "uncertainty",
        explainer: Optional[Callable[[int], dict | None]] = None,
    ):
        labels, s_ben, s_att = wmv_labels(votes, weights)
        self.features = np.asarray(features)
        self.feature_names = list(feature_names)
        self.items = {
            i: ReviewItem(i, int(labels[i]), float(s_att[i]), float(s_ben[i]))
            for i in range(len(labels))
        }
        if queue_order == "uncertainty":
            self.order = sorted(self.items, key=lambda i: (self.items[i].margin, i))
        elif queue_order == "index":
            self.order = sorted(self.items)
        else:
            raise ValueError(f"unknown queue order {queue_order!r}")
        self.log_path = Path(log_path)
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        self.explainer = explainer
        self._explanations: dict[int, dict | None] = {}

    @classmethod
    def from_ensemble(
        cls,
        ens: EnsembleModel,
        dataset,
        log_path: str | Path,
        queue_order: str = "uncertainty",
        explainer=None,
    ) -> "ReviewState":
        votes = ens.learner_votes(dataset.features)
        return cls(
            dataset.features,
            dataset.feature_names,
            votes,
            ens.require_weights(),
            log_path,
            queue_order=queue_order,
            explainer=explainer,
        )

    # -- decisions ----------------------------------------------------------

    def decide(
        self, item_id: int, action: str, label: int | None = None, _log: bool = True
    ) -> str:
        """Apply one analyst decision. Returns "recorded" or "unchanged";
        raises DecisionConflict when the item already holds a different
        terminal decision, KeyError for unknown items."""
        if item_id not in self.items:
            raise KeyError(f"no review item {item_id}")
        if action not in TERMINAL:
            raise ValueError(f"unknown action {action!r}")
        if action == "relabel" and label not in (0, 1):
            raise ValueError("relabel requires a 0/1 label")
        item = self.items[item_id]
        new_status = TERMINAL[action]
        new_label = label if action == "relabel" else None
        if item.status != "pending":
            if item.status == new_status and item.decided_label == new_label:
                return "unchanged"
            raise DecisionConflict(
                f"item {item_id} already {item.status}"
                + (f" as {item.decided_label}" if item.decided_label is not None else "")
            )
        item.status = new_status
        item.decided_label = new_label
        if _log:
            record = {
                "item_id": item_id,
                "action": action,
                "label": label,
                "timestamp": datetime.now(timezone.utc).isoformat(),
            }
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")
        return "recorded"

    def replay_log(self) -> int:
        """Apply every decision from the log file (idempotent)."""
        if not self.log_path.exists():
            return 0
        n = 0
        with open(self.log_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                self.decide(int(rec["item_id"]), rec["action"], rec.get("label"), _log=False)
                n += 1
        logger.info("replayed %d decisions from %s", n, self.log_path)
        return n

    # -- views --------------------------------------------------------------

    def queue(self, status: str = "pending", page: int = 0, page_size: int = 20) -> dict:
        ids = [i for i in self.order if status in ("all", self.items[i].status)]
        start = page * page_size
        return {
            "total": len(ids),
            "page": page,
            "page_size": page_size,
            "items": [self.items[i].summary() for i in ids[start : start + page_size]],
        }

    def item_detail(self, item_id: int) -> dict:
        if item_id not in self.items:
            raise KeyError(f"no review item {item_id}")
        item = self.items[item_id]
        if item_id not in self._explanations:
            self._explanations[item_id] = (
                self.explainer(item_id) if self.explainer else None
            )
        detail = item.summary()
        detail["features"] = {
            name: float(v) for name, v in zip(self.feature_names, self.features[item_id])
        }
        detail["explanation"] = self._explanations[item_id]
        detail["decided_label"] = item.decided_label
        return detail

    def progress(self) -> dict:
        counts = {"pending": 0, "approved": 0, "rejected": 0, "relabelled": 0}
        for item in self.items.values():
            counts[item.status] += 1
        decided = len(self.items) - counts["pending"]
        return {"total": len(self.items), "decided": decided, **counts}

    def finalize(self) -> PseudoLabelSet:
        """Emit the reviewed pseudo-label set from all terminal decisions."""
        decisions = []
        for i in sorted(self.items):
            item = self.items[i]
            if item.status == "pending":
                continue
            action = {v: k for k, v in TERMINAL.items()}[item.status]
            decisions.append(ReviewDecision(i, action, item.decided_label))
        if not decisions:
            raise ValueError("cannot finalize: no decided items")
        preds = np.array([self.items[i].ensemble_label for i in sorted(self.items)])
        from .refinement import make_pseudo_labels

        return make_pseudo_labels(preds, "reviewed", decisions=decisions)

    def auto_accept(self) -> int:
        """Approve every pending item (unattended/CI mode)."""
        n = 0
        for i in self.order:
            if self.items[i].status == "pending":
                self.decide(i, "approve")
                n += 1
        logger.info("auto-accepted %d pending items", n)
        return n


try:  # pydantic is only needed when the HTTP API is used
    from pydantic import BaseModel

    class DecisionBody(BaseModel):
        action: Literal["approve", "reject", "relabel"]
        label: Optional[int] = None

except ImportError:  # pragma: no cover
    DecisionBody = None


def create_review_app(state: ReviewState, finalize_sink: Callable[[PseudoLabelSet], str] | None = None):
    """FastAPI application over a ReviewState.

    ``finalize_sink`` persists the finalized pseudo-label set and returns the
    path recorded in the response.
    """
    from fastapi import FastAPI, HTTPException
    from fastapi.middleware.cors import CORSMiddleware

    app = FastAPI(title="flowsentry review", version="1")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.get("/queue")
    def get_queue(status: str = "pending", page: int = 0, page_size: int = 20):
        return state.queue(status=status, page=page, page_size=page_size)

    @app.get("/item/{item_id}")
    def get_item(item_id: int):
        try:
            return state.item_detail(item_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no review item {item_id}")

    @app.post("/item/{item_id}/decision")
    def post_decision(item_id: int, body: DecisionBody):
        try:
            outcome = state.decide(item_id, body.action, body.label)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no review item {item_id}")
        except DecisionConflict as e:
            raise HTTPException(status_code=409, detail=str(e))
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
        return {"status": outcome, "item": state.items[item_id].summary()}

    @app.get("/progress")
    def get_progress():
        return state.progress()

    @app.post("/finalize")
    def post_finalize():
        try:
            pseudo = state.finalize()
        except ValueError as e:
            raise HTTPException(status_code=409, detail=str(e))
        path = finalize_sink(pseudo) if finalize_sink else None
        return {"size": len(pseudo.rows), "mode": pseudo.mode, "path": path}

    return app
