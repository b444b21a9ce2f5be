"""Visual rating sessions: a shuffled 50/50 real-synthetic item list served
one item at a time, answers recorded in order, confusion matrix on finalize.

Ground truth stays server-side: it lives in the session object and the
append-only journal, never in rater-facing payloads.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..embedding import ConfusionMatrix, confusion_stats

TEST_KINDS = ("crop32_plain", "crop32_normal", "full256_plain", "full256_normal")
LABELS = ("real", "synthetic")


@dataclass
class VttItem:
    item_id: str
    image_ref: str       # opaque reference (file path) resolved by the service
    ground_truth: str


@dataclass
class VttSession:
    session_id: str
    test_kind: str
    items: list[VttItem]
    cursor: int = 0
    responses: dict[str, str] = field(default_factory=dict)
    allow_revisit: bool = False
    finalized: bool = False

    @property
    def total(self) -> int:
        return len(self.items)

    @property
    def is_complete(self) -> bool:
        return len(self.responses) == self.total

    def current_item(self) -> VttItem | None:
        for i in range(self.cursor, self.total):
            if self.items[i].item_id not in self.responses:
                return self.items[i]
        return None

    def item_by_id(self, item_id: str) -> VttItem | None:
        return next((it for it in self.items if it.item_id == item_id), None)


def create_session(real_refs: list[str], synt_refs: list[str], n_each: int = 50,
                   test_kind: str = "crop32_plain", seed: int = 0,
                   allow_revisit: bool = False,
                   session_id: str | None = None) -> VttSession:
    """Sample n_each items per class without replacement, shuffle, cursor at 0."""
    if test_kind not in TEST_KINDS:
        raise ValueError(f"test_kind must be one of {TEST_KINDS}")
    if len(real_refs) < n_each or len(synt_refs) < n_each:
        raise ValueError(f"pools too small for n_each={n_each} "
                         f"(real {len(real_refs)}, synthetic {len(synt_refs)})")
    rng = np.random.default_rng(seed)
    real_pick = [real_refs[i] for i in rng.choice(len(real_refs), n_each, replace=False)]
    synt_pick = [synt_refs[i] for i in rng.choice(len(synt_refs), n_each, replace=False)]
    items = ([VttItem(f"item_{k:04d}", ref, "real") for k, ref in enumerate(real_pick)]
             + [VttItem(f"item_{n_each + k:04d}", ref, "synthetic")
                for k, ref in enumerate(synt_pick)])
    order = rng.permutation(len(items))
    items = [items[i] for i in order]
    return VttSession(session_id=session_id or uuid.uuid4().hex[:12],
                      test_kind=test_kind, items=items, allow_revisit=allow_revisit)


class SessionError(Exception):
    pass


def record_response(session: VttSession, item_id: str, label: str) -> None:
    """Store one answer; strictly sequential unless allow_revisit; no feedback."""
    if session.finalized:
        raise SessionError("session already finalized")
    if label not in LABELS:
        raise SessionError(f"label must be one of {LABELS}")
    item = session.item_by_id(item_id)
    if item is None:
        raise SessionError(f"unknown item {item_id}")
    if item_id in session.responses:
        raise SessionError(f"item {item_id} already answered")
    if not session.allow_revisit:
        current = session.current_item()
        if current is None or current.item_id != item_id:
            raise SessionError(f"out-of-order answer: expected "
                               f"{current.item_id if current else 'none'}, got {item_id}")
    session.responses[item_id] = label
    while session.cursor < session.total and \
            session.items[session.cursor].item_id in session.responses:
        session.cursor += 1


def finalize_session(session: VttSession) -> tuple[ConfusionMatrix, list[dict]]:
    """Confusion matrix plus the per-item audit log; requires a complete session."""
    if not session.is_complete:
        raise SessionError(f"incomplete session: {len(session.responses)}/{session.total}")
    triples = [(it.item_id, it.ground_truth, session.responses[it.item_id])
               for it in session.items]
    matrix = confusion_stats(triples)
    audit = [{"item_id": it.item_id, "ground_truth": it.ground_truth,
              "response": session.responses[it.item_id], "image_ref": it.image_ref}
             for it in session.items]
    session.finalized = True
    return matrix, audit


class SessionJournal:
    """Append-only JSONL event log, one file per session; supports replay."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.jsonl"

    def append(self, session_id: str, event: dict) -> None:
        event = {"ts": time.time(), **event}
        with open(self._path(session_id), "a") as fh:
            fh.write(json.dumps(event) + "\n")

    def log_created(self, session: VttSession) -> None:
        self.append(session.session_id, {
            "event": "created", "test_kind": session.test_kind,
            "allow_revisit": session.allow_revisit,
            "items": [{"item_id": it.item_id, "image_ref": it.image_ref,
                       "ground_truth": it.ground_truth} for it in session.items]})

    def log_response(self, session_id: str, item_id: str, label: str) -> None:
        self.append(session_id, {"event": "response", "item_id": item_id,
                                 "label": label})

    def log_finalized(self, session_id: str, matrix: ConfusionMatrix) -> None:
        self.append(session_id, {"event": "finalized", **matrix.as_dict()})

    def replay(self, session_id: str) -> VttSession:
        """Rebuild a session purely from its journal."""
        path = self._path(session_id)
        session = None
        for line in path.read_text().splitlines():
            event = json.loads(line)
            if event["event"] == "created":
                items = [VttItem(d["item_id"], d["image_ref"], d["ground_truth"])
                         for d in event["items"]]
                session = VttSession(session_id=session_id,
                                     test_kind=event["test_kind"], items=items,
                                     allow_revisit=event.get("allow_revisit", False))
            elif event["event"] == "response":
                record_response(session, event["item_id"], event["label"])
        if session is None:
            raise SessionError(f"no journal for session {session_id}")
        return session
