"""Majority-vote aggregation with a consistency score.

Votes are canonicalized (surface variants collapse to one value) before
counting.  The consistency score is ``100 * modal_count / N`` where N is the
ensemble arity; with one exception: when every vote is distinct the score is
reported as 0 (the raw formula value is kept alongside for audit).  Records
below the review threshold, and records whose ensemble mostly failed, become
review items.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Any, Optional

from .ensemble import VoteSet
from .rules import EquivalencePolicy


class ConsensusImpossible(ValueError):
    """No usable votes remain for a record."""


@dataclass(frozen=True)
class TallyResult:
    record_id: str
    task: str
    counts: dict                      # canonical key -> count
    representatives: dict             # canonical key -> first original value
    max_count: int
    argmax_set: frozenset
    n_votes: int
    n_failures: int

    @property
    def arity(self) -> int:
        return self.n_votes + self.n_failures


@dataclass(frozen=True)
class ConsensusResult:
    record_id: str
    task: str
    label: Any                        # representative original vote value
    label_key: str
    consistency: int
    consistency_raw: float
    tie_broken: bool
    seed_used: Optional[int]
    n_votes: int
    n_failures: int

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "task": self.task,
            "label": self.label,
            "label_key": self.label_key,
            "consistency": self.consistency,
            "consistency_raw": self.consistency_raw,
            "tie_broken": self.tie_broken,
            "seed_used": self.seed_used,
            "n_votes": self.n_votes,
            "n_failures": self.n_failures,
        }


@dataclass(frozen=True)
class ReviewItem:
    """A flagged record awaiting human adjudication."""

    item_id: str
    record_id: str
    task: str
    votes: dict                       # serialized VoteSet
    provisional: Optional[dict]       # serialized ConsensusResult, None if ensemble failed
    context: dict = field(default_factory=dict)
    status: str = "pending"

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "record_id": self.record_id,
            "task": self.task,
            "votes": self.votes,
            "provisional": self.provisional,
            "context": dict(self.context),
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReviewItem":
        return cls(
            item_id=str(d["item_id"]),
            record_id=str(d["record_id"]),
            task=str(d.get("task", "extract_pair")),
            votes=dict(d.get("votes") or {}),
            provisional=d.get("provisional"),
            context=dict(d.get("context") or {}),
            status=str(d.get("status", "pending")),
        )


def tally(votes: VoteSet, policy: EquivalencePolicy | None = None) -> TallyResult:
    """Count canonicalized votes; raises ConsensusImpossible on zero votes."""
    policy = policy or EquivalencePolicy()
    if not votes.votes:
        raise ConsensusImpossible(f"record {votes.record_id}: no usable votes")
    counts: dict[str, int] = {}
    representatives: dict[str, Any] = {}
    for ann in votes.votes:
        key = policy.canonical_key(ann.value)
        counts[key] = counts.get(key, 0) + 1
        representatives.setdefault(key, ann.value)
    max_count = max(counts.values())
    argmax = frozenset(k for k, c in counts.items() if c == max_count)
    return TallyResult(
        record_id=votes.record_id,
        task=votes.task,
        counts=counts,
        representatives=representatives,
        max_count=max_count,
        argmax_set=argmax,
        n_votes=len(votes.votes),
        n_failures=len(votes.failures),
    )


def derive_seed(run_seed: int, record_id: str) -> int:
    """Stable per-record tie seed: independent draws, reproducible runs."""
    digest = hashlib.sha256(f"{run_seed}:{record_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def decide(t: TallyResult, seed: int) -> ConsensusResult:
    """Pick the majority label, breaking ties uniformly with the given seed."""
    tie = len(t.argmax_set) > 1
    if tie:
        ordered = sorted(t.argmax_set)
        key = ordered[random.Random(seed).randrange(len(ordered))]
    else:
        key = next(iter(t.argmax_set))
    raw = 100.0 * t.max_count / t.arity
    consistency = int(round(raw)) if t.max_count >= 2 else 0
    return ConsensusResult(
        record_id=t.record_id,
        task=t.task,
        label=t.representatives[key],
        label_key=key,
        consistency=consistency,
        consistency_raw=raw,
        tie_broken=tie,
        seed_used=seed if tie else None,
        n_votes=t.n_votes,
        n_failures=t.n_failures,
    )


def flag_for_review(
    result: ConsensusResult,
    votes: VoteSet,
    threshold: int = 100,
    context: dict | None = None,
) -> Optional[ReviewItem]:
    """Return a ReviewItem when consistency is strictly below the threshold."""
    if result.consistency >= threshold:
        return None
    return ReviewItem(
        item_id=f"{result.task}:{result.record_id}",
        record_id=result.record_id,
        task=result.task,
        votes=votes.to_dict(),
        provisional=result.to_dict(),
        context=dict(context or {}),
    )


def review_item_for_failure(
    votes: VoteSet, reason: str, context: dict | None = None
) -> ReviewItem:
    """Review item for a record whose ensemble failed outright."""
    ctx = dict(context or {})
    ctx["failure_reason"] = reason
    return ReviewItem(
        item_id=f"{votes.task}:{votes.record_id}",
        record_id=votes.record_id,
        task=votes.task,
        votes=votes.to_dict(),
        provisional=None,
        context=ctx,
    )
