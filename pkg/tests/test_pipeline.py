import json

import pytest

from crowdloop.config import RunConfig
from crowdloop.ensemble import AnnotatorHandle, TaskSpec, prompt_hash, render_prompt
from crowdloop.jsonio import read_jsonl, write_jsonl
from crowdloop.pipeline import stage_annotate, stage_consense, stage_review_export


def _fixture_for(prompts_to_responses, path):
    rows = [
        {"prompt_sha256": prompt_hash(prompt), "response": response}
        for prompt, response in prompts_to_responses.items()
    ]
    write_jsonl(path, rows)


@pytest.fixture
def channel_run(tmp_path):
    """Run dir with one post carrying a foreign name, two comments, and two
    pairs; only the first pair can be phonetically classified."""
    run_dir = tmp_path / "run"
    run_dir.mkdir()
    write_jsonl(run_dir / "posts_norm.jsonl", [
        {"post_id": "p1", "url": None, "foreign_name": "Stefan",
         "image_description": None, "like_count": 0, "comment_count": 0, "posted_at": None},
        {"post_id": "p2", "url": None, "foreign_name": None,
         "image_description": None, "like_count": 0, "comment_count": 0, "posted_at": None},
    ])
    write_jsonl(run_dir / "comments_clean.jsonl", [
        {"comment_id": "c1", "post_id": "p1", "text": "x", "text_clean": "x",
         "like_count": 0, "posted_at": None, "removed_mentions": [], "removed_emoji_count": 0},
        {"comment_id": "c2", "post_id": "p2", "text": "y", "text_clean": "y",
         "like_count": 0, "posted_at": None, "removed_mentions": [], "removed_emoji_count": 0},
    ])
    pairs_path = tmp_path / "pairs.jsonl"
    write_jsonl(pairs_path, [
        {"pair_id": "c1#0", "comment_id": "c1", "name": "史德风", "explanation": None,
         "channel_labels": {}, "generated_explanations": {}, "provenance": "auto_consensus"},
        {"pair_id": "c2#0", "comment_id": "c2", "name": "狗蛋", "explanation": None,
         "channel_labels": {}, "generated_explanations": {}, "provenance": "auto_consensus"},
    ])
    return run_dir, pairs_path


def test_channel_task_joins_post_context_and_skips_missing(channel_run, tmp_path):
    run_dir, pairs_path = channel_run
    spec = TaskSpec(task="phonetic_classify")
    prompt = render_prompt(spec, {
        "record_id": "c1#0", "name": "史德风", "explanation": None, "foreign_name": "Stefan",
    })
    fixture = tmp_path / "fixture.jsonl"
    _fixture_for({prompt: json.dumps({"label": "PC1"})}, fixture)
    config = RunConfig(annotators=[
        AnnotatorHandle(annotator_id=f"s{i}", backend="scripted", fixture_path=str(fixture))
        for i in range(2)
    ], ensemble_size=2, in_flight_cap=2)

    out_path = run_dir / "votes_phonetic.jsonl"
    report = stage_annotate(run_dir, out_path, config, task="phonetic_classify",
                            ensemble_size=2, pairs_path=pairs_path)
    assert report["records"] == 2
    assert report["skipped"] == 1   # c2's post has no foreign name

    rows = {rec["record_id"]: rec for _, rec in read_jsonl(out_path)}
    assert rows["c1#0"]["votes"][0]["value"] == {"label": "PC1"}
    assert rows["c2#0"]["skipped"].startswith("missing foreign_name")

    consensus_path = run_dir / "consensus_phonetic.jsonl"
    summary = stage_consense(out_path, consensus_path, seed=1, config=config)
    assert summary == {"records": 1, "failed_or_skipped": 1}
    result = next(rec for _, rec in read_jsonl(consensus_path))
    assert result["label"] == {"label": "PC1"}
    assert result["consistency"] == 100


def test_ensemble_failed_records_reach_the_review_queue(tmp_path):
    """A record whose ensemble mostly failed gets no consensus row but is
    exported as a review item with no provisional label."""
    run_dir = tmp_path
    good = {
        "record_id": "ok1", "task": "extract_pair",
        "votes": [
            {"annotator_id": f"a{i}", "value": [{"name": "王好名", "explanation": None}],
             "raw_text": "x", "retry_count": 0, "repaired": False}
            for i in range(5)
        ],
        "failures": [],
    }
    broken = {
        "record_id": "bad1", "task": "extract_pair",
        "votes": [
            {"annotator_id": "a0", "value": [{"name": "残名", "explanation": None}],
             "raw_text": "x", "retry_count": 0, "repaired": False},
            {"annotator_id": "a1", "value": [{"name": "残名", "explanation": None}],
             "raw_text": "x", "retry_count": 0, "repaired": False},
        ],
        "failures": [["a2", "timeout"], ["a3", "timeout"], ["a4", "schema"]],
    }
    votes_path = run_dir / "votes.jsonl"
    write_jsonl(votes_path, [good, broken])

    consensus_path = run_dir / "consensus.jsonl"
    summary = stage_consense(votes_path, consensus_path, seed=3, config=RunConfig())
    assert summary == {"records": 1, "failed_or_skipped": 1}

    items_path = run_dir / "review_items.jsonl"
    report = stage_review_export(votes_path, consensus_path, items_path, threshold=100)
    assert report["flagged"] == 1
    item = next(rec for _, rec in read_jsonl(items_path))
    assert item["record_id"] == "bad1"
    assert item["provisional"] is None
    assert "ensemble failed" in item["context"]["failure_reason"]
