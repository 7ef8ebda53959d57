"""Deterministic correction rules and the shared canonical-equivalence policy.

Two things live here because they share one normalization:

* ``canonical_equivalence`` decides whether two annotator outputs are the
  same answer written differently (punctuation, quoting, spacing, filler
  words such as 是/的).  Vote tallying and gold scoring both use it, so the
  consensus stage and the evaluation stage can never disagree about what
  counts as "the same".
* ``apply_post_rules`` runs the mechanical corrections after consensus:
  single-character names and purely foreign names are nulled, and nested
  duplicate extractions are resolved against the sibling pairs of the same
  comment.  Interpretive fixes (satire, meaning errors, unrecognized playful
  names) are *not* automated; they belong to prompt guidance and the human
  review queue.
"""

from __future__ import annotations

import enum
import json
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Any, Optional

HAN_RE = re.compile(r"[㐀-䶿一-鿿豈-﫿]")

DEFAULT_FILLER_TOKENS: tuple[str, ...] = ("是", "的")


class MatchClass(enum.Enum):
    EXACT = "exact"
    MINOR = "minor"
    DIFFERENT = "different"


@dataclass(frozen=True)
class EquivalencePolicy:
    """Normalization used to collapse surface-form variants.

    ``normalize`` drops all Unicode punctuation and whitespace (which also
    unifies CJK/ASCII punctuation variants via NFKC), casefolds Latin text,
    then removes the configured filler tokens.  Two non-identical strings
    with equal normal forms are a *minor* match; identical strings are
    *exact*.  Exact implies minor by construction.
    """

    filler_tokens: tuple[str, ...] = DEFAULT_FILLER_TOKENS

    def normalize(self, text: Optional[str]) -> str:
        if text is None:
            return ""
        s = unicodedata.normalize("NFKC", text)
        s = "".join(
            ch for ch in s
            if not unicodedata.category(ch).startswith("P") and not ch.isspace()
        )
        s = s.casefold()
        for tok in self.filler_tokens:
            s = s.replace(tok, "")
        return s

    def match(self, a: Optional[str], b: Optional[str]) -> MatchClass:
        if a is None and b is None:
            return MatchClass.EXACT
        if a is None or b is None:
            return MatchClass.DIFFERENT
        if a == b:
            return MatchClass.EXACT
        if self.normalize(a) == self.normalize(b):
            return MatchClass.MINOR
        return MatchClass.DIFFERENT

    def match_pair(
        self,
        name_a: Optional[str],
        expl_a: Optional[str],
        name_b: Optional[str],
        expl_b: Optional[str],
    ) -> MatchClass:
        """Joint class over (name, explanation): exact needs both exact,
        minor tolerates surface variation on either field."""
        mn = self.match(name_a, name_b)
        me = self.match(expl_a, expl_b)
        if MatchClass.DIFFERENT in (mn, me):
            return MatchClass.DIFFERENT
        if mn is MatchClass.EXACT and me is MatchClass.EXACT:
            return MatchClass.EXACT
        return MatchClass.MINOR

    def canonical_key(self, value: Any) -> str:
        """Deterministic tally key for an arbitrary JSON-able vote value.

        Strings are normalized; lists of extraction candidates are sorted so
        that candidate order is treated as surface form.
        """
        return json.dumps(self._canon(value), ensure_ascii=False, sort_keys=True)

    def _canon(self, value: Any) -> Any:
        if value is None:
            return None
        if isinstance(value, str):
            return self.normalize(value)
        if isinstance(value, dict):
            return {k: self._canon(v) for k, v in sorted(value.items())}
        if isinstance(value, (list, tuple)):
            items = [self._canon(v) for v in value]
            return sorted(items, key=lambda x: json.dumps(x, ensure_ascii=False, sort_keys=True))
        return value


def canonical_equivalence(
    a: Optional[str], b: Optional[str], policy: EquivalencePolicy | None = None
) -> MatchClass:
    return (policy or EquivalencePolicy()).match(a, b)


# --- post-consensus correction rules -------------------------------------

RULE_STRIP_EMOJI = 1        # handled at preprocess time
RULE_STRIP_MENTION = 2      # handled at preprocess time
RULE_SINGLE_CHARACTER = 3
RULE_PURELY_FOREIGN = 4
RULE_NON_ASSIGNED = 5       # review path only
RULE_NESTED_DUPLICATE = 6
RULE_MEANINGLESS_EXPL = 7   # review path only
RULE_UNUSUAL_NAME = 8       # review path only


class RuleAction(enum.Enum):
    NONE = "none"
    NULL_NAME = "null_name"
    NULL_EXPLANATION = "null_explanation"
    NULL_BOTH = "null_both"
    KEEP_FULL_DROP_NESTED = "keep_full_drop_nested"


@dataclass(frozen=True)
class RuleOutcome:
    rule_id: int
    action: RuleAction
    note: str

    def to_dict(self) -> dict:
        return {"rule_id": self.rule_id, "action": self.action.value, "note": self.note}


def is_purely_foreign(name: str) -> bool:
    """True when the name contains no Han character at all."""
    return HAN_RE.search(name) is None


def apply_post_rules(pair, sibling_pairs: list) -> tuple[Any, list[RuleOutcome]]:
    """Apply the mechanical rules in fixed order 3 -> 4 -> 6 to one pair.

    ``pair`` and the siblings are corpus PairRecords (duck-typed: ``name``
    and ``explanation`` attributes plus ``replace``).  A fired rule nulls the
    record's fields; records nulled on both fields are dropped by the caller.
    The function is total and idempotent: once a record is nulled no rule can
    fire on it again.
    """
    outcomes: list[RuleOutcome] = []
    name = pair.name
    if name is None:
        return pair, outcomes

    if len(name) == 1:
        outcomes.append(RuleOutcome(
            RULE_SINGLE_CHARACTER, RuleAction.NULL_BOTH,
            f"single-character name {name!r} nulled",
        ))
        return pair.replace(name=None, explanation=None), outcomes

    if is_purely_foreign(name):
        outcomes.append(RuleOutcome(
            RULE_PURELY_FOREIGN, RuleAction.NULL_BOTH,
            f"purely foreign name {name!r} nulled",
        ))
        return pair.replace(name=None, explanation=None), outcomes

    for sib in sibling_pairs:
        sib_name = getattr(sib, "name", None)
        if sib_name and name != sib_name and name in sib_name:
            outcomes.append(RuleOutcome(
                RULE_NESTED_DUPLICATE, RuleAction.KEEP_FULL_DROP_NESTED,
                f"{name!r} nested inside sibling {sib_name!r}; full name kept",
            ))
            return pair.replace(name=None, explanation=None), outcomes

    return pair, outcomes


@dataclass
class RuleAuditLog:
    """Accumulates fired-rule events for the line-delimited audit file."""

    events: list[dict] = field(default_factory=list)

    def record(self, pair_id: str, outcome: RuleOutcome) -> None:
        self.events.append({"pair_id": pair_id, **outcome.to_dict()})
