import pytest
from fastapi.testclient import TestClient

from crowdloop.consensus import decide, flag_for_review, tally
from crowdloop.ensemble import RawAnnotation, VoteSet
from crowdloop.review.service import create_app
from crowdloop.review.store import (
    MergeError,
    Resolution,
    ReviewConflict,
    ReviewStore,
    merge_final_dataset,
)
from crowdloop.rules import EquivalencePolicy

TOKEN = "letmein"
HEADERS = {"X-Review-Token": TOKEN}


def _voteset(record_id, values):
    votes = tuple(
        RawAnnotation(annotator_id=f"a{i}", value=[{"name": v, "explanation": None}],
                      raw_text=v)
        for i, v in enumerate(values)
    )
    return VoteSet(record_id=record_id, task="extract_pair", votes=votes)


def _item(record_id, values, threshold=100):
    votes = _voteset(record_id, values)
    result = decide(tally(votes, EquivalencePolicy()), seed=1)
    item = flag_for_review(result, votes, threshold=threshold)
    assert item is not None
    return item, result


def _resolution(item_id, name="王正确", reviewer="r1", explanation=None, labels=None):
    return Resolution(
        item_id=item_id, reviewer_id=reviewer, final_name=name,
        final_explanation=explanation, final_labels=labels or {},
        decided_at="2025-02-02T00:00:00.000000Z",
    )


@pytest.fixture
def seeded(tmp_path, codebook):
    items = []
    results = []
    specs = [
        ("r40", ["甲", "甲", "乙", "乙", "丙"]),   # tie at 2 -> consistency 40
        ("r60", ["甲", "甲", "甲", "乙", "丙"]),
        ("r80", ["甲", "甲", "甲", "甲", "乙"]),
    ]
    for record_id, values in specs:
        item, result = _item(record_id, values)
        items.append(item)
        results.append(result)
    unanimous = _voteset("r100", ["甲"] * 5)
    results.append(decide(tally(unanimous, EquivalencePolicy()), seed=1))
    store = ReviewStore(log_path=tmp_path / "log.jsonl", codebook=codebook,
                        snapshot_path=tmp_path / "snap.jsonl", snapshot_every=2)
    store.enqueue(items)
    app = create_app(store, consensus_results=results, token=TOKEN)
    return {"store": store, "client": TestClient(app), "items": items,
            "results": results, "tmp": tmp_path}


class TestQueue:
    def test_hardest_first_ordering(self, seeded):
        got = seeded["client"].get("/queue", headers=HEADERS).json()
        assert [i["consistency"] for i in got["items"]] == [40, 60, 80]

    def test_duplicate_enqueue_conflicts(self, seeded):
        with pytest.raises(ReviewConflict):
            seeded["store"].enqueue([seeded["items"][0]])

    def test_empty_enqueue_is_noop(self, seeded):
        before = seeded["store"].progress()
        seeded["store"].enqueue([])
        assert seeded["store"].progress() == before

    def test_auth_required(self, seeded):
        assert seeded["client"].get("/queue").status_code == 401
        assert seeded["client"].get("/progress").status_code == 401

    def test_get_item_and_404(self, seeded):
        client = seeded["client"]
        item_id = seeded["items"][0].item_id
        assert client.get(f"/items/{item_id}", headers=HEADERS).json()["record_id"] == "r40"
        assert client.get("/items/nope", headers=HEADERS).status_code == 404


class TestResolve:
    def test_resolve_then_idempotent_repeat(self, seeded):
        client = seeded["client"]
        item_id = seeded["items"][0].item_id
        body = {"reviewer_id": "r1", "final_name": "王正确",
                "decided_at": "2025-02-02T00:00:00.000000Z"}
        assert client.post(f"/items/{item_id}/resolution", json=body,
                           headers=HEADERS).json()["status"] == "resolved"
        assert client.post(f"/items/{item_id}/resolution", json=body,
                           headers=HEADERS).json()["status"] == "unchanged"
        assert seeded["store"].progress()["resolved"] == 1

    def test_different_resolution_conflicts_exposing_existing(self, seeded):
        client = seeded["client"]
        item_id = seeded["items"][0].item_id
        body = {"reviewer_id": "r1", "final_name": "王正确"}
        client.post(f"/items/{item_id}/resolution", json=body, headers=HEADERS)
        response = client.post(f"/items/{item_id}/resolution",
                               json={**body, "final_name": "李不同"}, headers=HEADERS)
        assert response.status_code == 409
        assert response.json()["detail"]["existing"]["final_name"] == "王正确"

    def test_invalid_label_rejected_by_codebook(self, seeded):
        client = seeded["client"]
        item_id = seeded["items"][1].item_id
        body = {"reviewer_id": "r1", "final_name": "王正确",
                "final_labels": {"visual": "VC9"}}
        response = client.post(f"/items/{item_id}/resolution", json=body, headers=HEADERS)
        assert response.status_code == 422
        assert "VC9" in str(response.json()["detail"])

    def test_skip_transitions(self, seeded):
        client = seeded["client"]
        item_id = seeded["items"][2].item_id
        assert client.post(f"/items/{item_id}/skip", headers=HEADERS).json()["status"] == "skipped"
        progress = client.get("/progress", headers=HEADERS).json()
        assert progress["skipped"] == 1

    def test_progress_monotone(self, seeded):
        client = seeded["client"]
        resolved_seen = []
        for item in seeded["items"]:
            body = {"reviewer_id": "r1", "final_name": "王正确"}
            client.post(f"/items/{item.item_id}/resolution", json=body, headers=HEADERS)
            resolved_seen.append(client.get("/progress", headers=HEADERS).json()["resolved"])
        assert resolved_seen == sorted(resolved_seen)


class TestEventSourcing:
    def test_replay_from_log_reproduces_state_and_export(self, seeded, codebook):
        client = seeded["client"]
        for item in seeded["items"][:2]:
            client.post(f"/items/{item.item_id}/resolution",
                        json={"reviewer_id": "r1", "final_name": "王正确",
                              "decided_at": "2025-02-02T00:00:00.000000Z"},
                        headers=HEADERS)
        export1 = client.get("/export/final", headers=HEADERS).text

        # fresh store, same log: replay must reproduce the final dataset
        store2 = ReviewStore(log_path=seeded["tmp"] / "log.jsonl", codebook=codebook)
        store2.enqueue(seeded["items"])
        store2.mark_resolved_from_log()
        app2 = create_app(store2, consensus_results=seeded["results"], token=TOKEN)
        export2 = TestClient(app2).get("/export/final", headers=HEADERS).text
        assert export1 == export2
        assert store2.progress()["resolved"] == 2

    def test_snapshot_written_periodically(self, seeded):
        client = seeded["client"]
        for item in seeded["items"][:2]:  # snapshot_every=2
            client.post(f"/items/{item.item_id}/resolution",
                        json={"reviewer_id": "r1", "final_name": "王正确"}, headers=HEADERS)
        snap = seeded["tmp"] / "snap.jsonl"
        assert snap.exists()
        assert len(snap.read_text().strip().splitlines()) == 3


class TestMerge:
    def test_merge_counts_and_untouched_unflagged(self, seeded, codebook):
        items = seeded["items"]
        results = seeded["results"]
        resolutions = [_resolution(items[0].item_id), _resolution(items[1].item_id)]
        pairs = merge_final_dataset(results, resolutions, items, codebook)
        by_provenance = {}
        for p in pairs:
            by_provenance.setdefault(p.provenance, []).append(p)
        assert len(by_provenance["human_resolved"]) == 2
        assert len(by_provenance["auto_consensus"]) == 2
        unflagged = [p for p in pairs if p.comment_id == "r100"]
        assert unflagged[0].name == "甲"  # consistency-100 record passes through

    def test_zero_resolutions_is_identity(self, seeded, codebook):
        pairs = merge_final_dataset(seeded["results"], [], seeded["items"], codebook)
        assert all(p.provenance == "auto_consensus" for p in pairs)

    def test_last_decided_at_wins(self, seeded, codebook):
        items, results = seeded["items"], seeded["results"]
        early = Resolution(item_id=items[0].item_id, reviewer_id="r1", final_name="早",
                           decided_at="2025-02-01T00:00:00Z")
        late = Resolution(item_id=items[0].item_id, reviewer_id="r2", final_name="晚",
                          decided_at="2025-02-03T00:00:00Z")
        for order in ((early, late), (late, early)):
            pairs = merge_final_dataset(results, list(order), items, codebook)
            resolved = [p for p in pairs if p.comment_id == "r40"]
            assert resolved[0].name == "晚"

    def test_unknown_item_rejected(self, seeded, codebook):
        with pytest.raises(MergeError, match="unknown item"):
            merge_final_dataset(seeded["results"], [_resolution("ghost:item")],
                                seeded["items"], codebook)

    def test_null_null_resolution_drops_record(self, seeded, codebook):
        items, results = seeded["items"], seeded["results"]
        resolution = Resolution(item_id=items[0].item_id, reviewer_id="r1",
                                decided_at="2025-02-02T00:00:00Z")
        pairs = merge_final_dataset(results, [resolution], items, codebook)
        assert not [p for p in pairs if p.comment_id == "r40"]


class TestClaim:
    def test_claim_is_advisory_and_never_blocks(self, seeded):
        client = seeded["client"]
        item_id = seeded["items"][0].item_id
        response = client.post(f"/items/{item_id}/claim",
                               json={"reviewer_id": "c1"}, headers=HEADERS)
        assert response.json()["status"] == "claimed"
        # a different reviewer can still resolve the claimed item
        done = client.post(f"/items/{item_id}/resolution",
                           json={"reviewer_id": "c2", "final_name": "王正确"},
                           headers=HEADERS)
        assert done.json()["status"] == "resolved"

    def test_claim_unknown_item_404(self, seeded):
        response = seeded["client"].post("/items/ghost/claim",
                                         json={"reviewer_id": "c1"}, headers=HEADERS)
        assert response.status_code == 404


def test_queue_lists_non_pending_statuses(seeded):
    client = seeded["client"]
    item_id = seeded["items"][0].item_id
    client.post(f"/items/{item_id}/resolution",
                json={"reviewer_id": "r1", "final_name": "王正确"}, headers=HEADERS)
    resolved = client.get("/queue?status=resolved", headers=HEADERS).json()
    assert [i["item_id"] for i in resolved["items"]] == [item_id]
