"""Scoring against a gold standard, agreement statistics, and trade-off tables.

Gold scoring reuses the exact/minor equivalence that vote tallying uses, so
"accepted despite minor differences" means the same thing at evaluation time
as it did at consensus time.  Outcomes are bucketed by consistency score to
show how agreement relates to correctness, and merged review resolutions are
tracked as the corrected fraction.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .corpus import PairRecord
from .rules import EquivalencePolicy, MatchClass

OUTCOMES = ("correct_exact", "correct_minor", "incorrect")


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class EvalCase:
    """One scored unit: the pipeline's pair plus its consensus consistency."""

    pair: PairRecord
    consistency: int


@dataclass
class EvalReport:
    n: int
    exact_match_rate: float
    minor_accept_rate: float
    overall_accuracy: float
    contingency: dict                       # consistency -> outcome -> count
    corrected_by_review: float
    outcome_by_id: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "exact_match_rate": self.exact_match_rate,
            "minor_accept_rate": self.minor_accept_rate,
            "overall_accuracy": self.overall_accuracy,
            "contingency": {str(k): dict(v) for k, v in sorted(self.contingency.items())},
            "corrected_by_review": self.corrected_by_review,
            # audit trail: every record accepted on a minor (surface-form) match
            "minor_match_ids": sorted(
                rid for rid, outcome in self.outcome_by_id.items()
                if outcome == "correct_minor"
            ),
        }

    def incorrect_rate(self, consistency: int) -> Optional[float]:
        row = self.contingency.get(consistency)
        if not row:
            return None
        total = sum(row.values())
        return row.get("incorrect", 0) / total if total else None

    def incorrect_rate_below(self, threshold: int) -> Optional[float]:
        total = wrong = 0
        for score, row in self.contingency.items():
            if score < threshold:
                total += sum(row.values())
                wrong += row.get("incorrect", 0)
        return wrong / total if total else None


def classify_outcome(
    pred: PairRecord, gold: PairRecord, policy: EquivalencePolicy | None = None
) -> str:
    policy = policy or EquivalencePolicy()
    m = policy.match_pair(pred.name, pred.explanation, gold.name, gold.explanation)
    if m is MatchClass.EXACT:
        return "correct_exact"
    if m is MatchClass.MINOR:
        return "correct_minor"
    return "incorrect"


def score_against_gold(
    cases: Sequence[EvalCase],
    gold: Sequence[PairRecord],
    policy: EquivalencePolicy | None = None,
) -> EvalReport:
    """Score cases 1:1 against gold pairs aligned by pair_id."""
    policy = policy or EquivalencePolicy()
    gold_by_id = {g.pair_id: g for g in gold}
    case_ids = {c.pair.pair_id for c in cases}
    missing_gold = sorted(case_ids - set(gold_by_id))
    missing_cases = sorted(set(gold_by_id) - case_ids)
    if missing_gold or missing_cases:
        raise EvalError(
            "id mismatch between results and gold; "
            f"no gold for {missing_gold[:5]}, no result for {missing_cases[:5]}"
        )
    if not cases:
        raise EvalError("nothing to score")

    contingency: dict[int, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    outcome_by_id: dict[str, str] = {}
    exact = minor = corrected = 0
    for case in cases:
        outcome = classify_outcome(case.pair, gold_by_id[case.pair.pair_id], policy)
        contingency[case.consistency][outcome] += 1
        outcome_by_id[case.pair.pair_id] = outcome
        if outcome == "correct_exact":
            exact += 1
        elif outcome == "correct_minor":
            minor += 1
        if case.pair.provenance == "human_resolved":
            corrected += 1

    n = len(cases)
    return EvalReport(
        n=n,
        exact_match_rate=exact / n,
        minor_accept_rate=minor / n,
        overall_accuracy=(exact + minor) / n,
        contingency={k: dict(v) for k, v in contingency.items()},
        corrected_by_review=corrected / n,
        outcome_by_id=outcome_by_id,
    )


@dataclass(frozen=True)
class KappaResult:
    kappa: Optional[float]              # None when undefined (p_e = 1, p_o < 1)
    p_observed: float
    p_expected: float
    n: int

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "p_observed": self.p_observed,
            "p_expected": self.p_expected,
            "n": self.n,
        }


def cohens_kappa(labels_a: Sequence, labels_b: Sequence) -> KappaResult:
    """Two-rater Cohen's kappa over the empirical confusion matrix."""
    if len(labels_a) != len(labels_b):
        raise EvalError(f"label lists differ in length: {len(labels_a)} vs {len(labels_b)}")
    n = len(labels_a)
    if n == 0:
        raise EvalError("label lists are empty")

    p_o = sum(1 for a, b in zip(labels_a, labels_b) if a == b) / n
    alphabet = set(labels_a) | set(labels_b)
    freq_a = {k: 0 for k in alphabet}
    freq_b = {k: 0 for k in alphabet}
    for a in labels_a:
        freq_a[a] += 1
    for b in labels_b:
        freq_b[b] += 1
    p_e = sum(freq_a[k] * freq_b[k] for k in alphabet) / (n * n)

    if p_e >= 1.0:
        kappa = 1.0 if p_o >= 1.0 else None
    else:
        kappa = (p_o - p_e) / (1.0 - p_e)
    return KappaResult(kappa=kappa, p_observed=p_o, p_expected=p_e, n=n)


@dataclass(frozen=True)
class RoundStats:
    label: str
    accuracy: Optional[float]           # fraction in [0,1], None when not measured
    hours: Optional[float]
    human_effort: str


def tradeoff_report(
    rounds: Sequence[RoundStats],
    n_records: Optional[int] = None,
    seconds_per_record: float = 40.0,
) -> str:
    """Aligned text table comparing accuracy, wall-clock, and human effort.

    When ``n_records`` is given, a manual-coding baseline row is prepended
    with its hour estimate (records x seconds per record).
    """
    rows: list[tuple[str, str, str, str]] = []
    if n_records is not None:
        est = n_records * seconds_per_record / 3600.0
        rows.append(("Manual coding", "-", f"{est:.1f} (est.)", "direct coding throughout"))
    for r in rounds:
        acc = f"{100.0 * r.accuracy:.2f}%" if r.accuracy is not None else "-"
        hrs = f"{r.hours:.1f}" if r.hours is not None else "-"
        rows.append((r.label, acc, hrs, r.human_effort))
    if not rows:
        return ""

    header = ("Approach", "Accuracy", "Hours", "Human effort")
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(header)]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in rows]
    return "\n".join(lines)
