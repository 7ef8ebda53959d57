"""Review queue state, the append-only resolution log, and the final merge.

The resolution log is the source of truth: replaying it from an empty store
reproduces the exact final dataset, so the queue state never has to be
trusted or backed up.  A snapshot file is written periodically purely for
inspection.  Writes are serialized by a lock; a racing second resolution
gets a conflict, never a corrupted log.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional

from ..codebook import Codebook, validate_label
from ..consensus import ConsensusResult, ReviewItem
from ..corpus import ExtractionResult, PairRecord, normalize_pairs
from ..jsonio import dumps_canonical, read_jsonl, write_jsonl


class ReviewConflict(Exception):
    """Duplicate item, or a second, different resolution for the same item."""

    def __init__(self, message: str, existing: Optional[dict] = None):
        super().__init__(message)
        self.existing = existing


class LabelValidationError(ValueError):
    pass


class MergeError(ValueError):
    pass


@dataclass(frozen=True)
class Resolution:
    item_id: str
    reviewer_id: str
    final_name: Optional[str] = None
    final_explanation: Optional[str] = None
    final_labels: dict = field(default_factory=dict)
    rule_tag: Optional[int] = None
    decided_at: str = ""

    def core(self) -> dict:
        """Identity-relevant payload: two submissions with equal cores are
        the same resolution regardless of timestamps."""
        return {
            "item_id": self.item_id,
            "reviewer_id": self.reviewer_id,
            "final_name": self.final_name,
            "final_explanation": self.final_explanation,
            "final_labels": dict(sorted(self.final_labels.items())),
            "rule_tag": self.rule_tag,
        }

    def to_dict(self) -> dict:
        return {**self.core(), "decided_at": self.decided_at}

    @classmethod
    def from_dict(cls, d: dict) -> "Resolution":
        return cls(
            item_id=str(d["item_id"]),
            reviewer_id=str(d.get("reviewer_id", "")),
            final_name=d.get("final_name"),
            final_explanation=d.get("final_explanation"),
            final_labels=dict(d.get("final_labels") or {}),
            rule_tag=d.get("rule_tag"),
            decided_at=str(d.get("decided_at", "")),
        )


def _now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def _item_sort_key(item: ReviewItem) -> tuple:
    # Hardest first: ensemble failures (no provisional) ahead, then by
    # ascending consistency, then record_id for stability.
    consistency = -1 if item.provisional is None else int(item.provisional["consistency"])
    return (consistency, item.record_id)


class ReviewStore:
    def __init__(
        self,
        log_path: str | Path,
        codebook: Optional[Codebook] = None,
        snapshot_path: str | Path | None = None,
        snapshot_every: int = 25,
    ):
        self.log_path = Path(log_path)
        self.codebook = codebook
        self.snapshot_path = Path(snapshot_path) if snapshot_path else None
        self.snapshot_every = snapshot_every
        self._items: dict[str, ReviewItem] = {}
        self._resolutions: dict[str, Resolution] = {}
        self._claims: dict[str, str] = {}
        self._lock = threading.Lock()
        self._writes_since_snapshot = 0
        if self.log_path.exists():
            self._replay()

    # -- queue ---------------------------------------------------------

    def enqueue(self, items: Iterable[ReviewItem]) -> int:
        added = 0
        with self._lock:
            staged = list(items)
            for item in staged:
                if item.item_id in self._items:
                    raise ReviewConflict(f"item {item.item_id} already enqueued")
            for item in staged:
                self._items[item.item_id] = item
                added += 1
        return added

    def get(self, item_id: str) -> ReviewItem:
        item = self._items.get(item_id)
        if item is None:
            raise KeyError(item_id)
        return item

    def items(self) -> list[ReviewItem]:
        return [self._items[k] for k in sorted(self._items)]

    def pending(self, limit: Optional[int] = None) -> list[ReviewItem]:
        items = sorted(
            (i for i in self._items.values() if i.status == "pending"),
            key=_item_sort_key,
        )
        return items[:limit] if limit else items

    def progress(self) -> dict:
        statuses = [i.status for i in self._items.values()]
        return {
            "total": len(statuses),
            "pending": statuses.count("pending"),
            "resolved": statuses.count("resolved"),
            "skipped": statuses.count("skipped"),
        }

    def claim(self, item_id: str, reviewer_id: str) -> str:
        """Advisory claim; never blocks a resolve from someone else."""
        self.get(item_id)
        with self._lock:
            self._claims[item_id] = reviewer_id
        return reviewer_id

    # -- resolutions ---------------------------------------------------

    def _validate_labels(self, labels: dict) -> None:
        if not labels:
            return
        if self.codebook is None:
            return
        problems = []
        for channel, label in sorted(labels.items()):
            verdict = validate_label(self.codebook, channel, label)
            if not verdict.ok:
                problems.append(verdict.reason)
        if problems:
            raise LabelValidationError("; ".join(problems))

    def resolve(self, item_id: str, resolution: Resolution) -> dict:
        """Apply one resolution.  Idempotent for identical repeats; a
        different resolution for an already-resolved item is a conflict that
        exposes the existing one."""
        item = self.get(item_id)
        if resolution.item_id != item_id:
            raise LabelValidationError(
                f"resolution item_id {resolution.item_id!r} does not match {item_id!r}"
            )
        self._validate_labels(resolution.final_labels)
        with self._lock:
            existing = self._resolutions.get(item_id)
            if existing is not None:
                if existing.core() == resolution.core():
                    return {"status": "unchanged", "item_id": item_id}
                raise ReviewConflict(
                    f"item {item_id} already resolved differently",
                    existing=existing.to_dict(),
                )
            if item.status == "skipped":
                raise ReviewConflict(f"item {item_id} was skipped")
            if not resolution.decided_at:
                resolution = Resolution(**{**resolution.to_dict(), "decided_at": _now_iso()})
            self._append_log(resolution)
            self._resolutions[item_id] = resolution
            self._items[item_id] = ReviewItem.from_dict(
                {**item.to_dict(), "status": "resolved"}
            )
            self._maybe_snapshot()
        return {"status": "resolved", "item_id": item_id}

    def skip(self, item_id: str) -> dict:
        item = self.get(item_id)
        with self._lock:
            if item.status == "resolved":
                raise ReviewConflict(f"item {item_id} already resolved")
            self._items[item_id] = ReviewItem.from_dict({**item.to_dict(), "status": "skipped"})
        return {"status": "skipped", "item_id": item_id}

    def resolutions(self) -> list[Resolution]:
        return [self._resolutions[k] for k in sorted(self._resolutions)]

    # -- persistence ---------------------------------------------------

    def _append_log(self, resolution: Resolution) -> None:
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.log_path, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps_canonical(resolution.to_dict()))
            fh.write("\n")
            fh.flush()

    def _replay(self) -> None:
        for _, rec in read_jsonl(self.log_path):
            res = Resolution.from_dict(rec)
            self._resolutions[res.item_id] = res

    def mark_resolved_from_log(self) -> None:
        """After enqueueing items, flip the ones the replayed log already covers."""
        with self._lock:
            for item_id in self._resolutions:
                item = self._items.get(item_id)
                if item is not None and item.status == "pending":
                    self._items[item_id] = ReviewItem.from_dict(
                        {**item.to_dict(), "status": "resolved"}
                    )

    def _maybe_snapshot(self) -> None:
        self._writes_since_snapshot += 1
        if self.snapshot_path and self._writes_since_snapshot >= self.snapshot_every:
            self.write_snapshot()

    def write_snapshot(self) -> None:
        if not self.snapshot_path:
            return
        rows = [self._items[k].to_dict() for k in sorted(self._items)]
        write_jsonl(self.snapshot_path, rows)
        self._writes_since_snapshot = 0


def merge_final_dataset(
    consensus_results: Iterable[ConsensusResult],
    resolutions: Iterable[Resolution],
    items: Iterable[ReviewItem],
    codebook: Optional[Codebook] = None,
) -> list[PairRecord]:
    """Build the final pair dataset from consensus plus the resolution log.

    A resolution supersedes its record's extraction entirely (last write by
    decided_at wins per item); everything else keeps its consensus value.
    Output order is deterministic and independent of resolution arrival
    order.  Labels on resolutions are validated against the codebook.
    """
    record_for_item: dict[str, str] = {i.item_id: i.record_id for i in items}

    chosen: dict[str, Resolution] = {}
    for res in resolutions:
        if res.item_id not in record_for_item:
            raise MergeError(f"resolution references unknown item {res.item_id!r}")
        prev = chosen.get(res.item_id)
        if prev is None or (res.decided_at, dumps_canonical(res.core())) > (
            prev.decided_at, dumps_canonical(prev.core())
        ):
            chosen[res.item_id] = res

    resolved_records: dict[str, Resolution] = {}
    for item_id, res in chosen.items():
        resolved_records[record_for_item[item_id]] = res

    out: list[PairRecord] = []
    seen_records: set[str] = set()
    for result in sorted(consensus_results, key=lambda r: r.record_id):
        record_id = result.record_id
        seen_records.add(record_id)
        res = resolved_records.get(record_id)
        if res is not None:
            out.extend(_pairs_from_resolution(record_id, res, codebook))
            continue
        candidates = _candidates_from_label(result.label)
        out.extend(
            normalize_pairs(
                ExtractionResult(comment_id=record_id, candidates=candidates),
                provenance="auto_consensus",
            )
        )

    # Ensemble-failed records have no consensus row; a resolution is their
    # only route into the final dataset.
    for record_id in sorted(set(resolved_records) - seen_records):
        out.extend(_pairs_from_resolution(record_id, resolved_records[record_id], codebook))

    out.sort(key=lambda p: p.pair_id)
    return out


def _candidates_from_label(label) -> tuple:
    if label is None:
        return ()
    if isinstance(label, list):
        return tuple((c.get("name"), c.get("explanation")) for c in label)
    if isinstance(label, dict) and ("name" in label or "explanation" in label):
        return ((label.get("name"), label.get("explanation")),)
    raise MergeError(f"cannot interpret consensus label {label!r} as extraction candidates")


def _pairs_from_resolution(
    record_id: str, res: Resolution, codebook: Optional[Codebook]
) -> list[PairRecord]:
    if codebook is not None and res.final_labels:
        problems = []
        for channel, label in sorted(res.final_labels.items()):
            verdict = validate_label(codebook, channel, label)
            if not verdict.ok:
                problems.append(verdict.reason)
        if problems:
            raise MergeError(f"resolution for {record_id}: " + "; ".join(problems))
    if res.final_name is None and res.final_explanation is None:
        return []
    return [
        PairRecord(
            pair_id=f"{record_id}#0",
            comment_id=record_id,
            name=res.final_name,
            explanation=res.final_explanation,
            channel_labels=dict(res.final_labels),
            provenance="human_resolved",
        )
    ]
