"""Corpus ingestion, cleaning, and pair-level normalization.

Input files are line-delimited JSON (one record per line).  Field names are
fixed: ``post_id``, ``comment_id``, ``text``, ``like_count``,
``foreign_name``, ``image_description``, ``posted_at``.  Ingest is
deterministic and keeps the first occurrence of a duplicated id, counting
the drops.  Cleaning strips emoji codepoints, configured emoticon tokens,
and leading @-mentions; everything else is preserved in order.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal, ROUND_HALF_UP
from pathlib import Path
from typing import Iterable, Optional

from .jsonio import read_jsonl

KINDS = ("posts", "comments", "gold")


class IngestError(ValueError):
    """Malformed input line; message carries the line number and field."""


# Pragmatic emoji cluster: the symbol planes plus variation selectors,
# zero-width joiner, and regional indicators.  Joiners/selectors are
# stripped but not counted as emoji of their own.
_EMOJI_RANGES = (
    (0x1F300, 0x1FAFF),
    (0x1F1E6, 0x1F1FF),
    (0x2600, 0x27BF),
    (0x2B00, 0x2BFF),
)
_EMOJI_JOINERS = {0x200D, 0xFE0E, 0xFE0F, 0x20E3}

DEFAULT_EMOTICONS: tuple[str, ...] = (
    "^_^", "^-^", "^^", "T_T", "QAQ", "QwQ", "orz", "Orz",
    "-_-", "=_=", ">_<", "0v0", "OvO", ":)", ":(", ":D", ":P", ";)", "XD", "xD",
)

_MENTION_RE = re.compile(r"^\s*@(\S+)\s*")


def _is_emoji(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _EMOJI_RANGES)


def parse_like_count(value) -> int:
    """Parse a like count that may arrive as an int or a string like "1.2万".

    万 multiplies by 10^4; fractional results round half-up.  Raises
    ``ValueError`` for anything non-numeric or negative.
    """
    if isinstance(value, bool):
        raise ValueError(f"like_count must be a number, got {value!r}")
    if isinstance(value, int):
        n = value
    elif isinstance(value, float):
        n = int(Decimal(str(value)).to_integral_value(rounding=ROUND_HALF_UP))
    elif isinstance(value, str):
        s = value.strip().replace(",", "")
        mult = 1
        if s.endswith("万"):
            s, mult = s[:-1], 10_000
        try:
            n = int((Decimal(s) * mult).to_integral_value(rounding=ROUND_HALF_UP))
        except ArithmeticError:
            raise ValueError(f"unparseable like_count {value!r}") from None
    else:
        raise ValueError(f"unparseable like_count {value!r}")
    if n < 0:
        raise ValueError(f"like_count must be non-negative, got {value!r}")
    return n


def parse_timestamp(value) -> Optional[datetime]:
    if value is None:
        return None
    if not isinstance(value, str):
        raise ValueError(f"posted_at must be an ISO-8601 string, got {value!r}")
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass(frozen=True)
class PostRecord:
    post_id: str
    url: Optional[str] = None
    foreign_name: Optional[str] = None
    image_description: Optional[str] = None
    like_count: int = 0
    comment_count: int = 0
    posted_at: Optional[datetime] = None


@dataclass(frozen=True)
class CommentRecord:
    comment_id: str
    post_id: str
    text: str
    like_count: int = 0
    posted_at: Optional[datetime] = None


@dataclass(frozen=True)
class CleanComment:
    comment_id: str
    text_clean: str
    removed_mentions: tuple[str, ...] = ()
    removed_emoji_count: int = 0

    @property
    def empty_after_clean(self) -> bool:
        return self.text_clean == ""


PROVENANCES = ("auto_consensus", "human_resolved", "gold")


@dataclass(frozen=True)
class PairRecord:
    """One extracted name-explanation pair plus its per-channel labels."""

    pair_id: str
    comment_id: str
    name: Optional[str] = None
    explanation: Optional[str] = None
    channel_labels: dict = field(default_factory=dict)
    generated_explanations: dict = field(default_factory=dict)
    provenance: Optional[str] = None

    def replace(self, **changes) -> "PairRecord":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "comment_id": self.comment_id,
            "name": self.name,
            "explanation": self.explanation,
            "channel_labels": dict(self.channel_labels),
            "generated_explanations": dict(self.generated_explanations),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PairRecord":
        return cls(
            pair_id=str(d["pair_id"]),
            comment_id=str(d.get("comment_id", "")),
            name=d.get("name"),
            explanation=d.get("explanation"),
            channel_labels=dict(d.get("channel_labels") or {}),
            generated_explanations=dict(d.get("generated_explanations") or {}),
            provenance=d.get("provenance"),
        )


@dataclass(frozen=True)
class ExtractionResult:
    """The 0..k (name, explanation) candidates extracted from one comment."""

    comment_id: str
    candidates: tuple[tuple[Optional[str], Optional[str]], ...]


@dataclass
class CorpusSnapshot:
    posts: dict[str, PostRecord] = field(default_factory=dict)
    comments: dict[str, CommentRecord] = field(default_factory=dict)
    gold: list[PairRecord] = field(default_factory=list)
    duplicate_counts: dict[str, int] = field(default_factory=dict)

    def counts(self) -> dict[str, int]:
        return {"posts": len(self.posts), "comments": len(self.comments), "gold": len(self.gold)}

    def unresolved_comment_posts(self) -> list[str]:
        """Comment post_ids that do not resolve against the loaded posts."""
        if not self.posts:
            return []
        return sorted({c.post_id for c in self.comments.values() if c.post_id not in self.posts})


def _require(record: dict, fields: Iterable[str], path, lineno: int) -> None:
    for f in fields:
        if record.get(f) in (None, ""):
            raise IngestError(f"{path}:{lineno}: missing field '{f}'")


def ingest(path: str | Path, kind: str, snapshot: CorpusSnapshot | None = None) -> CorpusSnapshot:
    """Load one line-delimited file into a snapshot (extending it if given).

    Duplicate ids collapse to the first occurrence and are counted in
    ``snapshot.duplicate_counts[kind]``.  A malformed line raises
    ``IngestError`` naming the line and field.
    """
    if kind not in KINDS:
        raise IngestError(f"unknown kind {kind!r}; expected one of {KINDS}")
    snapshot = snapshot if snapshot is not None else CorpusSnapshot()
    path = Path(path)
    dupes = snapshot.duplicate_counts.setdefault(kind, 0)
    gold_ids = {g.pair_id for g in snapshot.gold}

    for lineno, rec in read_jsonl(path):
        try:
            if kind == "posts":
                _require(rec, ("post_id",), path, lineno)
                pid = str(rec["post_id"])
                if pid in snapshot.posts:
                    dupes += 1
                    continue
                foreign = rec.get("foreign_name")
                if foreign is not None:
                    foreign = foreign.strip() or None
                snapshot.posts[pid] = PostRecord(
                    post_id=pid,
                    url=rec.get("url"),
                    foreign_name=foreign,
                    image_description=rec.get("image_description"),
                    like_count=parse_like_count(rec.get("like_count", 0)),
                    comment_count=int(rec.get("comment_count", 0)),
                    posted_at=parse_timestamp(rec.get("posted_at")),
                )
            elif kind == "comments":
                _require(rec, ("comment_id", "post_id", "text"), path, lineno)
                cid = str(rec["comment_id"])
                if cid in snapshot.comments:
                    dupes += 1
                    continue
                snapshot.comments[cid] = CommentRecord(
                    comment_id=cid,
                    post_id=str(rec["post_id"]),
                    text=rec["text"],
                    like_count=parse_like_count(rec.get("like_count", 0)),
                    posted_at=parse_timestamp(rec.get("posted_at")),
                )
            else:
                _require(rec, ("pair_id",), path, lineno)
                pair = PairRecord.from_dict(rec).replace(provenance="gold")
                if pair.pair_id in gold_ids:
                    dupes += 1
                    continue
                gold_ids.add(pair.pair_id)
                snapshot.gold.append(pair)
        except IngestError:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from exc

    snapshot.duplicate_counts[kind] = dupes
    return snapshot


def _strip_emoji(text: str) -> tuple[str, int]:
    kept: list[str] = []
    count = 0
    for ch in text:
        if _is_emoji(ch):
            count += 1
        elif ord(ch) not in _EMOJI_JOINERS:
            kept.append(ch)
    return "".join(kept), count


def _strip_emoticons(text: str, tokens: tuple[str, ...]) -> str:
    # Fixpoint: deleting one token can expose another (e.g. "::))").
    ordered = sorted(tokens, key=len, reverse=True)
    changed = True
    while changed:
        changed = False
        for tok in ordered:
            if tok and tok in text:
                text = text.replace(tok, "")
                changed = True
    return text


def preprocess(
    comment: CommentRecord, emoticon_tokens: tuple[str, ...] = DEFAULT_EMOTICONS
) -> CleanComment:
    """Strip emoji codepoints, emoticon tokens, and leading @-mentions.

    A mention is an ``@`` followed by a contiguous handle (up to the next
    whitespace).  Mentions are removed only at the start of the text and are
    recorded; interior text is preserved in order (cleaning only deletes).
    The whole pass repeats until nothing changes, so the output is a
    fixpoint and preprocess is idempotent by construction.  An empty result
    is not an error: the record is marked empty-after-clean for a downstream
    drop.
    """
    text = comment.text
    mentions: list[str] = []
    emoji_count = 0
    while True:
        before = text
        text, n = _strip_emoji(text)
        emoji_count += n
        text = _strip_emoticons(text, emoticon_tokens)
        while True:
            m = _MENTION_RE.match(text)
            if not m:
                break
            mentions.append(m.group(1))
            text = text[m.end():]
        text = text.strip()
        if text == before:
            break
    return CleanComment(
        comment_id=comment.comment_id,
        text_clean=text,
        removed_mentions=tuple(mentions),
        removed_emoji_count=emoji_count,
    )


def normalize_pairs(extraction: ExtractionResult, provenance: Optional[str] = None) -> list[PairRecord]:
    """Split one extraction into pair records, dropping fully-null candidates.

    Order is preserved; pair ids are stable against the original candidate
    index so reruns produce identical ids even when earlier candidates drop.
    """
    out: list[PairRecord] = []
    for idx, (name, explanation) in enumerate(extraction.candidates):
        if name is None and explanation is None:
            continue
        out.append(PairRecord(
            pair_id=f"{extraction.comment_id}#{idx}",
            comment_id=extraction.comment_id,
            name=name,
            explanation=explanation,
            provenance=provenance,
        ))
    return out
