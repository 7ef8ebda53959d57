"""Run configuration: annotator backends, codebook path, policy token lists."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .corpus import DEFAULT_EMOTICONS
from .ensemble import AnnotatorHandle
from .rules import DEFAULT_FILLER_TOKENS, EquivalencePolicy


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    annotators: list[AnnotatorHandle] = field(default_factory=list)
    codebook_path: Optional[str] = None
    filler_tokens: tuple[str, ...] = DEFAULT_FILLER_TOKENS
    emoticon_tokens: tuple[str, ...] = DEFAULT_EMOTICONS
    ensemble_size: int = 5
    review_threshold: int = 100
    viral_threshold: int = 1000
    in_flight_cap: int = 8
    seconds_per_record: float = 40.0

    def policy(self) -> EquivalencePolicy:
        return EquivalencePolicy(filler_tokens=self.filler_tokens)

    def ensemble_handles(self, size: Optional[int] = None) -> list[AnnotatorHandle]:
        want = size or self.ensemble_size
        if len(self.annotators) < want:
            raise ConfigError(
                f"configured annotators ({len(self.annotators)}) fewer than ensemble size {want}"
            )
        return sorted(self.annotators, key=lambda h: h.annotator_id)[:want]


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    doc = json.loads(Path(path).read_text("utf-8"))
    annotators = []
    for entry in doc.get("annotators", []):
        try:
            annotators.append(AnnotatorHandle(
                annotator_id=str(entry["annotator_id"]),
                backend=str(entry["backend"]),
                endpoint=entry.get("endpoint"),
                fixture_path=entry.get("fixture_path"),
                settings=dict(entry.get("settings") or {}),
                max_retries=int(entry.get("max_retries", 2)),
                timeout=float(entry.get("timeout", 30.0)),
            ))
        except KeyError as exc:
            raise ConfigError(f"annotator entry missing {exc}") from exc
    ids = [a.annotator_id for a in annotators]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate annotator ids in config: {sorted(ids)}")
    return RunConfig(
        annotators=annotators,
        codebook_path=doc.get("codebook_path"),
        filler_tokens=tuple(doc.get("filler_tokens", DEFAULT_FILLER_TOKENS)),
        emoticon_tokens=tuple(doc.get("emoticon_tokens", DEFAULT_EMOTICONS)),
        ensemble_size=int(doc.get("ensemble_size", 5)),
        review_threshold=int(doc.get("review_threshold", 100)),
        viral_threshold=int(doc.get("viral_threshold", 1000)),
        in_flight_cap=int(doc.get("in_flight_cap", 8)),
        seconds_per_record=float(doc.get("seconds_per_record", 40.0)),
    )
