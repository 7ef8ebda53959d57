"""Channel-combination and engagement profiling over pair records.

Classified pairs (those carrying a semantic label) fall into four presence
patterns: semantic only, semantic+phonetic, semantic+visual, and all three.
The profile runs the pattern-distribution test (goodness of fit over the
four cells), the dual-channel comparison (two-cell test), a
negative-binomial regression of per-name frequency on channel count, and
VIFs on the instance-level presence matrix.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from ..rules import EquivalencePolicy
from .chisq import ChiSquareResult, StatsError, chi_square
from .negbin import NbFit, nb_regression
from .vif import vif as vif_fn

PATTERNS = (
    "semantic_only",
    "semantic_phonetic",
    "semantic_visual",
    "semantic_phonetic_visual",
)


class EmptyProfileError(StatsError):
    """No pair carries a semantic label, so no combination can be profiled."""


@dataclass(frozen=True)
class CombinationStats:
    counts: dict
    fractions: dict
    n_classified: int
    n_unclassified: int
    h1: ChiSquareResult
    h2: Optional[ChiSquareResult]
    h3: Optional[NbFit]
    vif: list[float]
    h2_note: str = ""
    h3_note: str = ""
    vif_note: str = ""

    def to_dict(self) -> dict:
        return {
            "counts": dict(self.counts),
            "fractions": dict(self.fractions),
            "n_classified": self.n_classified,
            "n_unclassified": self.n_unclassified,
            "h1": self.h1.to_dict(),
            "h2": self.h2.to_dict() if self.h2 else None,
            "h2_note": self.h2_note,
            "h3": self.h3.to_dict() if self.h3 else None,
            "h3_note": self.h3_note,
            "vif": list(self.vif),
            "vif_note": self.vif_note,
        }


def _presence(pair) -> Optional[tuple[bool, bool, bool]]:
    labels = pair.channel_labels or {}
    s = labels.get("semantic") is not None
    if not s:
        return None
    return (True, labels.get("phonetic") is not None, labels.get("visual") is not None)


def _pattern(presence: tuple[bool, bool, bool]) -> str:
    _, p, v = presence
    if p and v:
        return "semantic_phonetic_visual"
    if p:
        return "semantic_phonetic"
    if v:
        return "semantic_visual"
    return "semantic_only"


def combination_profile(
    pairs: Iterable, policy: EquivalencePolicy | None = None
) -> CombinationStats:
    policy = policy or EquivalencePolicy()
    counts = Counter({p: 0 for p in PATTERNS})
    presence_rows: list[tuple[bool, bool, bool]] = []
    name_channels: dict[str, list[int]] = defaultdict(list)
    unclassified = 0

    for pair in pairs:
        pres = _presence(pair)
        if pres is None:
            unclassified += 1
            continue
        counts[_pattern(pres)] += 1
        presence_rows.append(pres)
        if pair.name:
            name_channels[policy.normalize(pair.name)].append(1 + pres[1] + pres[2])

    n = sum(counts.values())
    if n == 0:
        raise EmptyProfileError("no classified pairs (no semantic labels present)")
    fractions = {k: counts[k] / n for k in PATTERNS}

    h1 = chi_square([counts[k] for k in PATTERNS], mode="goodness_of_fit")
    h2: Optional[ChiSquareResult] = None
    h2_note = ""
    if counts["semantic_phonetic"] + counts["semantic_visual"] > 0:
        h2 = chi_square(
            [counts["semantic_phonetic"], counts["semantic_visual"]], mode="goodness_of_fit"
        )
    else:
        h2_note = "dual-channel comparison skipped: no dual-modal pairs"

    # Per unique canonical name: frequency regressed on channel count
    # (modal count over the name's instances, ties toward more channels).
    h3: Optional[NbFit] = None
    h3_note = ""
    rows = []
    for name_key, cc_list in sorted(name_channels.items()):
        freq = len(cc_list)
        tallies = Counter(cc_list)
        top = max(tallies.values())
        cc = max(c for c, t in tallies.items() if t == top)
        rows.append((cc, freq))
    if rows and len({cc for cc, _ in rows}) >= 2 and len(rows) > 2:
        design = np.array([[1.0, float(cc)] for cc, _ in rows])
        counts_y = np.array([float(f) for _, f in rows])
        try:
            h3 = nb_regression(design, counts_y)
        except StatsError as exc:
            h3_note = f"frequency regression failed: {exc}"
    else:
        h3_note = "frequency regression skipped: fewer than two distinct channel counts"

    presence = np.array(presence_rows, dtype=float)
    vif_values: list[float] = []
    vif_note = ""
    if presence.shape[0] > presence.shape[1] and np.all(presence.sum(axis=0) > 0):
        vif_values = vif_fn(presence)
    else:
        vif_note = "VIF skipped: a channel never occurs (zero presence column)"

    return CombinationStats(
        counts=dict(counts),
        fractions=fractions,
        n_classified=n,
        n_unclassified=unclassified,
        h1=h1,
        h2=h2,
        h3=h3,
        vif=vif_values,
        h2_note=h2_note,
        h3_note=h3_note,
        vif_note=vif_note,
    )


@dataclass(frozen=True)
class EngagementReport:
    viral_threshold: int
    category_like_sums: dict
    ranking: tuple                     # ((category, like_sum), ...) descending
    n_comments: int
    n_viral_comments: int
    zero_like_fraction: float

    def top(self, k: int = 10) -> list:
        return list(self.ranking[:k])

    def to_dict(self) -> dict:
        return {
            "viral_threshold": self.viral_threshold,
            "category_like_sums": dict(self.category_like_sums),
            "ranking": [list(r) for r in self.ranking],
            "n_comments": self.n_comments,
            "n_viral_comments": self.n_viral_comments,
            "zero_like_fraction": self.zero_like_fraction,
        }


def engagement_profile(
    pairs: Iterable,
    like_counts: dict,
    viral_threshold: int = 1000,
) -> EngagementReport:
    """Sum likes per semantic category over comments at/above the threshold.

    ``like_counts`` maps comment_id -> like count.  A comment contributes to
    a category at most once even when several of its pairs share the label.
    The zero-like fraction is computed over all referenced comments, viral
    or not (the long-tail summary).
    """
    seen: set[tuple[str, str]] = set()
    sums: dict[str, int] = defaultdict(int)
    comment_ids: set[str] = set()
    for pair in pairs:
        cid = pair.comment_id
        if cid not in like_counts:
            continue
        comment_ids.add(cid)
        category = (pair.channel_labels or {}).get("semantic")
        if category is None:
            continue
        likes = like_counts[cid]
        if likes < viral_threshold:
            continue
        key = (category, cid)
        if key in seen:
            continue
        seen.add(key)
        sums[category] += likes

    n_comments = len(comment_ids)
    n_viral = sum(1 for cid in comment_ids if like_counts[cid] >= viral_threshold)
    zero_fraction = (
        sum(1 for cid in comment_ids if like_counts[cid] == 0) / n_comments
        if n_comments
        else 0.0
    )
    ranking = tuple(sorted(sums.items(), key=lambda kv: (-kv[1], kv[0])))
    return EngagementReport(
        viral_threshold=viral_threshold,
        category_like_sums=dict(sums),
        ranking=ranking,
        n_comments=n_comments,
        n_viral_comments=n_viral,
        zero_like_fraction=zero_fraction,
    )
