"""The three-channel category framework, shipped as a declarative asset.

Channels: semantic (C1..C31, hierarchical), phonetic (PC1..PC3), visual
(VC1..VC7).  "No relation" / "no visual association" is encoded as label
absence, never as a category id, so distribution denominators stay explicit.
The codebook is read-only after load and freely shareable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

CHANNELS = ("semantic", "phonetic", "visual")
_EXPECTED_COUNTS = {"semantic": 31, "phonetic": 3, "visual": 7}
_PREFIXES = {"semantic": "C", "phonetic": "PC", "visual": "VC"}


class CodebookError(ValueError):
    """Asset fails validation (counts, duplicate ids, channel mismatch)."""


@dataclass(frozen=True)
class Category:
    id: str
    channel: str
    name: str
    definition: str
    level_path: tuple[str, ...] = ()
    examples: tuple[str, ...] = ()
    path_verified: bool = True


@dataclass(frozen=True)
class ValidatedLabel:
    ok: bool
    label: Optional[str]
    category: Optional[Category]
    reason: str


@dataclass(frozen=True)
class Codebook:
    version: str
    categories: tuple[Category, ...]
    by_id: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "by_id", {c.id: c for c in self.categories})

    def channel_of(self, label: str) -> Optional[str]:
        cat = self.by_id.get(label)
        return cat.channel if cat else None

    def ids(self, channel: str) -> list[str]:
        return [c.id for c in self.categories if c.channel == channel]

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "categories": [
                {
                    "id": c.id,
                    "channel": c.channel,
                    "name": c.name,
                    "definition": c.definition,
                    "level_path": list(c.level_path),
                    "examples": list(c.examples),
                    "path_verified": c.path_verified,
                }
                for c in self.categories
            ],
        }


def _validate(categories: list[Category]) -> None:
    errors: list[str] = []
    seen: set[str] = set()
    for c in categories:
        if c.id in seen:
            errors.append(f"duplicate id {c.id}")
        seen.add(c.id)
        if c.channel not in CHANNELS:
            errors.append(f"{c.id}: unknown channel {c.channel!r}")
            continue
        prefix = _PREFIXES[c.channel]
        body = c.id[len(prefix):]
        if not (c.id.startswith(prefix) and body.isdigit()):
            errors.append(f"{c.id}: id prefix inconsistent with channel {c.channel}")
        if c.channel == "semantic" and not c.level_path:
            errors.append(f"{c.id}: semantic category requires a level_path")
        if c.channel != "semantic" and c.level_path:
            errors.append(f"{c.id}: {c.channel} category must not carry a level_path")
    for channel, expected in _EXPECTED_COUNTS.items():
        got = sum(1 for c in categories if c.channel == channel)
        if got != expected:
            errors.append(f"{channel} count {got} != {expected}")
    if errors:
        raise CodebookError("codebook validation failed: " + "; ".join(errors))


def load_codebook(path: str | Path | None = None) -> Codebook:
    """Load and validate the codebook; ``path=None`` loads the shipped asset."""
    if path is None:
        raw = resources.files("crowdloop").joinpath("data/codebook.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    doc = json.loads(raw)
    categories = [
        Category(
            id=str(c["id"]),
            channel=str(c["channel"]),
            name=str(c["name"]),
            definition=str(c.get("definition", "")),
            level_path=tuple(c.get("level_path") or ()),
            examples=tuple(c.get("examples") or ()),
            path_verified=bool(c.get("path_verified", True)),
        )
        for c in doc.get("categories", [])
    ]
    _validate(categories)
    return Codebook(version=str(doc.get("version", "0")), categories=tuple(categories))


def validate_label(codebook: Codebook, channel: str, label: Optional[str]) -> ValidatedLabel:
    """Check one channel label; ``None`` means "no association" and is valid."""
    if channel not in CHANNELS:
        raise ValueError(f"unknown channel {channel!r}")
    if label is None:
        return ValidatedLabel(True, None, None, "no-association")
    cat = codebook.by_id.get(label)
    if cat is None:
        return ValidatedLabel(False, label, None, f"unknown id {label!r}")
    if cat.channel != channel:
        return ValidatedLabel(
            False, label, None, f"{label} belongs to channel {cat.channel}, not {channel}"
        )
    return ValidatedLabel(True, label, cat, cat.name)
