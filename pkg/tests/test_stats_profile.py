import pytest

from crowdloop.corpus import PairRecord
from crowdloop.stats import EmptyProfileError, combination_profile, engagement_profile

from test_stats_vif import PINNED_COUNTS


def _pair(pid, cid, semantic=None, phonetic=None, visual=None, name=None):
    labels = {}
    if semantic:
        labels["semantic"] = semantic
    if phonetic:
        labels["phonetic"] = phonetic
    if visual:
        labels["visual"] = visual
    return PairRecord(pair_id=pid, comment_id=cid, name=name, channel_labels=labels)


def pinned_fixture_pairs():
    """62,460 synthetic pairs reproducing the pinned pattern counts, with a
    name pool sized per pattern so the frequency regression has signal."""
    pools = {
        "semantic_only": ((True, False, False), 700, "甲"),
        "semantic_phonetic": ((True, True, False), 2000, "乙"),
        "semantic_visual": ((True, False, True), 2400, "丙"),
        "semantic_phonetic_visual": ((True, True, True), 2229, "丁"),
    }
    pairs = []
    i = 0
    for pattern, count in PINNED_COUNTS.items():
        (s, p, v), pool, tag = pools[pattern]
        for k in range(count):
            pairs.append(_pair(
                f"f{i}#0", f"f{i}",
                semantic="C4" if s else None,
                phonetic="PC2" if p else None,
                visual="VC1" if v else None,
                name=f"{tag}名{k % pool}",
            ))
            i += 1
    return pairs


class TestCombinationProfile:
    def test_one_pair_per_pattern_is_uniform(self):
        pairs = [
            _pair("a#0", "a", semantic="C1"),
            _pair("b#0", "b", semantic="C1", phonetic="PC1"),
            _pair("c#0", "c", semantic="C1", visual="VC1"),
            _pair("d#0", "d", semantic="C1", phonetic="PC1", visual="VC1"),
        ]
        stats = combination_profile(pairs)
        assert all(f == pytest.approx(0.25) for f in stats.fractions.values())
        assert stats.h1.statistic == pytest.approx(0.0)

    def test_pinned_fixture_reproduces_reported_shares(self):
        stats = combination_profile(pinned_fixture_pairs())
        shares = {k: round(100.0 * v, 2) for k, v in stats.fractions.items()}
        assert shares == {
            "semantic_only": 64.07,
            "semantic_phonetic": 19.94,
            "semantic_visual": 12.42,
            "semantic_phonetic_visual": 3.57,
        }
        assert stats.h1.statistic == pytest.approx(54208.67, rel=0.005)
        assert stats.h1.df == 3
        assert stats.h2.statistic == pytest.approx(1091.16, rel=0.01)
        assert stats.vif[0] == pytest.approx(1.50, abs=0.05)
        assert stats.h3 is not None and stats.h3.converged
        # more channels, rarer names: negative channel-count coefficient
        assert stats.h3.coefficients[1] < 0

    def test_all_semantic_only_degenerate(self):
        pairs = [_pair(f"p{i}#0", f"p{i}", semantic="C2") for i in range(10)]
        stats = combination_profile(pairs)
        assert stats.fractions["semantic_only"] == pytest.approx(1.0)
        assert stats.h2 is None and "skipped" in stats.h2_note
        assert stats.h3 is None and "skipped" in stats.h3_note
        assert stats.vif == [] and "skipped" in stats.vif_note

    def test_unlabeled_pairs_rejected(self):
        with pytest.raises(EmptyProfileError):
            combination_profile([_pair("p0#0", "p0")])

    def test_fractions_sum_to_one(self):
        stats = combination_profile(pinned_fixture_pairs())
        assert sum(stats.fractions.values()) == pytest.approx(1.0)


class TestEngagementProfile:
    def test_threshold_filters_viral_comments(self):
        pairs = [
            _pair("a#0", "a", semantic="C1"),
            _pair("b#0", "b", semantic="C1"),
            _pair("c#0", "c", semantic="C2"),
        ]
        likes = {"a": 1500, "b": 200, "c": 3}
        report = engagement_profile(pairs, likes, viral_threshold=1000)
        assert report.n_viral_comments == 1
        assert report.category_like_sums == {"C1": 1500}

    def test_category_ranking_fixture(self):
        # viral sums: C16 -> 73,155; C29 -> 60,014; C21 -> 49,264
        pairs = [
            _pair("a#0", "a", semantic="C16"),
            _pair("b#0", "b", semantic="C16"),
            _pair("c#0", "c", semantic="C29"),
            _pair("d#0", "d", semantic="C21"),
            _pair("e#0", "e", semantic="C16"),   # sub-threshold, excluded
        ]
        likes = {"a": 40000, "b": 33155, "c": 60014, "d": 49264, "e": 527}
        report = engagement_profile(pairs, likes, viral_threshold=1000)
        assert report.ranking[0] == ("C16", 73155)
        assert report.ranking[1] == ("C29", 60014)
        assert report.ranking[2] == ("C21", 49264)

    def test_threshold_zero_gives_raw_totals(self):
        pairs = [_pair("a#0", "a", semantic="C1"), _pair("b#0", "b", semantic="C1")]
        likes = {"a": 10, "b": 0}
        report = engagement_profile(pairs, likes, viral_threshold=0)
        assert report.category_like_sums == {"C1": 10}
        assert report.zero_like_fraction == pytest.approx(0.5)

    def test_same_comment_counted_once_per_category(self):
        pairs = [
            _pair("a#0", "a", semantic="C1"),
            _pair("a#1", "a", semantic="C1"),   # same comment, same label
        ]
        report = engagement_profile(pairs, {"a": 2000}, viral_threshold=1000)
        assert report.category_like_sums == {"C1": 2000}
