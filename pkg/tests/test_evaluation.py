import pytest

from crowdloop.corpus import PairRecord
from crowdloop.evaluation import (
    EvalCase,
    EvalError,
    RoundStats,
    cohens_kappa,
    score_against_gold,
    tradeoff_report,
)


def _pair(pid, name, explanation=None, provenance=None):
    return PairRecord(pair_id=pid, comment_id=pid.split("#")[0], name=name,
                      explanation=explanation, provenance=provenance)


class TestScoreAgainstGold:
    def test_identity_gives_accuracy_one(self, policy):
        gold = [_pair(f"c{i}#0", f"名字{i}", f"理由{i}") for i in range(10)]
        cases = [EvalCase(pair=g.replace(provenance="auto_consensus"), consistency=100)
                 for g in gold]
        report = score_against_gold(cases, gold, policy)
        assert report.overall_accuracy == 1.0
        assert report.exact_match_rate == 1.0
        assert report.minor_accept_rate == 0.0

    def test_filler_divergence_is_minor(self, policy):
        # Hand-classified 4-record fixture: one output differs from gold only
        # by a stripped filler word, the rest are identical.
        gold = [
            _pair("c0#0", "景明", "取自春和景明的意境"),
            _pair("c1#0", "李华", "课本名字"),
            _pair("c2#0", "狗蛋", "乡土昵称"),
            _pair("c3#0", "翠花", None),
        ]
        predicted = [
            _pair("c0#0", "景明", "是取自春和景明的意境"),
            _pair("c1#0", "李华", "课本名字"),
            _pair("c2#0", "狗蛋", "乡土昵称"),
            _pair("c3#0", "翠花", None),
        ]
        cases = [EvalCase(pair=p, consistency=100) for p in predicted]
        report = score_against_gold(cases, gold, policy)
        assert report.exact_match_rate == pytest.approx(0.75)
        assert report.minor_accept_rate == pytest.approx(0.25)
        assert report.overall_accuracy == pytest.approx(1.0)

    def test_contingency_bucketing(self, policy):
        gold = [_pair("c0#0", "对的"), _pair("c1#0", "也对")]
        cases = [
            EvalCase(pair=_pair("c0#0", "错的"), consistency=100),
            EvalCase(pair=_pair("c1#0", "也对"), consistency=60),
        ]
        report = score_against_gold(cases, gold, policy)
        assert report.contingency[100] == {"incorrect": 1}
        assert report.contingency[60] == {"correct_exact": 1}
        assert sum(sum(row.values()) for row in report.contingency.values()) == report.n

    def test_id_mismatch_lists_unmatched(self, policy):
        gold = [_pair("c0#0", "a")]
        cases = [EvalCase(pair=_pair("c9#0", "a"), consistency=100)]
        with pytest.raises(EvalError, match="c9#0"):
            score_against_gold(cases, gold, policy)

    def test_corrected_fraction_counts_human_resolved(self, policy):
        gold = [_pair("c0#0", "a"), _pair("c1#0", "b")]
        cases = [
            EvalCase(pair=_pair("c0#0", "a", provenance="human_resolved"), consistency=60),
            EvalCase(pair=_pair("c1#0", "b", provenance="auto_consensus"), consistency=100),
        ]
        report = score_against_gold(cases, gold, policy)
        assert report.corrected_by_review == pytest.approx(0.5)


class TestCohensKappa:
    def test_perfect_agreement(self):
        result = cohens_kappa(list("AABBA"), list("AABBA"))
        assert result.kappa == pytest.approx(1.0)

    def test_hand_computed_confusion_matrix(self):
        # both-A 20, both-B 20, A/B 5, B/A 5 -> p_o 0.8, p_e 0.5, kappa 0.6
        a = ["A"] * 20 + ["B"] * 20 + ["A"] * 5 + ["B"] * 5
        b = ["A"] * 20 + ["B"] * 20 + ["B"] * 5 + ["A"] * 5
        result = cohens_kappa(a, b)
        assert result.p_observed == pytest.approx(0.8)
        assert result.p_expected == pytest.approx(0.5)
        assert result.kappa == pytest.approx(0.6)

    def test_constant_rater_gives_zero(self):
        # rater B constant while A is 50/50 over 100 items
        a = (["X"] * 50) + (["Y"] * 50)
        b = ["X"] * 100
        result = cohens_kappa(a, b)
        assert result.p_observed == pytest.approx(0.5)
        assert result.p_expected == pytest.approx(0.5)
        assert result.kappa == pytest.approx(0.0)

    def test_degenerate_identical_constant_lists(self):
        result = cohens_kappa(["A"] * 4, ["A"] * 4)
        assert result.kappa == pytest.approx(1.0)  # p_o = p_e = 1

    def test_p_expected_one_only_with_full_agreement(self):
        # p_e = 1 forces both raters constant on the same label, so kappa is
        # 1 there; p_e = 1 with p_o < 1 cannot be built from real label
        # lists and stays a guarded branch.
        result = cohens_kappa(["A", "A"], ["A", "A"])
        assert result.p_expected == pytest.approx(1.0)
        assert result.kappa == pytest.approx(1.0)
        opposed = cohens_kappa(["A", "A"], ["B", "B"])
        assert opposed.p_expected == pytest.approx(0.0)
        assert opposed.kappa == pytest.approx(0.0)

    def test_symmetry_and_relabeling_invariance(self):
        a = list("AABABBBA")
        b = list("ABABABBA")
        k1 = cohens_kappa(a, b).kappa
        k2 = cohens_kappa(b, a).kappa
        relabel = {"A": "zig", "B": "zag"}
        k3 = cohens_kappa([relabel[x] for x in a], [relabel[x] for x in b]).kappa
        assert k1 == pytest.approx(k2) == pytest.approx(k3)

    def test_length_mismatch_raises(self):
        with pytest.raises(EvalError):
            cohens_kappa(["A"], ["A", "B"])


class TestTradeoffReport:
    def test_manual_baseline_estimate(self):
        table = tradeoff_report([], n_records=70614, seconds_per_record=40.0)
        assert "784.6" in table

    def test_round_rows_rendered(self):
        rounds = [
            RoundStats("Round 1: baseline", 0.6784, 14.1, "none"),
            RoundStats("Round 6: full pipeline", 0.9966, 23.6, "review of flagged cases"),
        ]
        table = tradeoff_report(rounds, n_records=70614)
        assert "99.66%" in table and "67.84%" in table
        assert table.splitlines()[2].startswith("Manual coding")

    def test_empty_rounds_no_baseline_is_empty(self):
        assert tradeoff_report([]) == ""
