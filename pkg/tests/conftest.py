import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from crowdloop import cli
from crowdloop.codebook import load_codebook
from crowdloop.consensus import ReviewItem
from crowdloop.jsonio import read_jsonl
from crowdloop.review.store import Resolution, ReviewStore
from crowdloop.rules import EquivalencePolicy
from crowdloop.synth import generate_synthetic_corpus

E2E_SEED = 42
E2E_N = 500

# Deterministic artifacts a same-seed rerun must reproduce byte for byte.
E2E_ARTIFACTS = (
    "comments_clean.jsonl",
    "posts_norm.jsonl",
    "gold_norm.jsonl",
    "votes_extract_pair.jsonl",
    "consensus_extract_pair.jsonl",
    "review_items.jsonl",
    "resolutions.jsonl",
    "final_pairs_pre.jsonl",
    "final_pairs.jsonl",
    "pairs_corrected.jsonl",
    "eval_pre.json",
    "eval_report.json",
)


@pytest.fixture(scope="session")
def policy():
    return EquivalencePolicy()


@pytest.fixture(scope="session")
def codebook():
    return load_codebook()


def _invoke(args):
    runner = CliRunner()
    result = runner.invoke(cli.main, [str(a) for a in args], catch_exceptions=False)
    assert result.exit_code == 0, f"{args} failed:\n{result.output}"
    return result.output


def _oracle_review(run_dir: Path, gold_by_record: dict) -> None:
    """Scripted reviewer: resolve every pending item to its gold pair."""
    store = ReviewStore(log_path=run_dir / "resolutions.jsonl", codebook=load_codebook())
    store.enqueue([ReviewItem.from_dict(rec) for _, rec in read_jsonl(run_dir / "review_items.jsonl")])
    store.mark_resolved_from_log()
    for item in store.pending(None):
        gold = gold_by_record[item.record_id]
        store.resolve(item.item_id, Resolution(
            item_id=item.item_id,
            reviewer_id="oracle",
            final_name=gold["name"],
            final_explanation=gold["explanation"],
            decided_at="2025-02-01T00:00:00.000000Z",
        ))


def _run_pipeline(corpus: Path, run_dir: Path) -> None:
    cfg = ["--config", corpus / "config.json", "--run-dir", run_dir, "--seed", E2E_SEED]
    _invoke(["ingest", "--posts", corpus / "posts.jsonl", "--comments", corpus / "comments.jsonl",
             "--gold", corpus / "gold.jsonl", *cfg])
    _invoke(["annotate", *cfg])
    _invoke(["consense", *cfg])
    _invoke(["review-export", "--review-threshold", 100, *cfg])
    _invoke(["merge", "--out", run_dir / "final_pairs_pre.jsonl", *cfg])
    _invoke(["evaluate", "--in", run_dir / "final_pairs_pre.jsonl",
             "--out", run_dir / "eval_pre.json", *cfg])
    gold_by_record = {r["comment_id"]: r for _, r in read_jsonl(corpus / "gold.jsonl")}
    _oracle_review(run_dir, gold_by_record)
    _invoke(["merge", *cfg])
    _invoke(["rules", *cfg])
    _invoke(["evaluate", *cfg])


@pytest.fixture(scope="session")
def e2e(tmp_path_factory):
    """Full pipeline over the synthetic corpus, twice with the same seed."""
    base = tmp_path_factory.mktemp("e2e")
    corpus = base / "corpus"
    summary = generate_synthetic_corpus(
        corpus, n_comments=E2E_N, n_annotators=5, error_rate=0.10, seed=E2E_SEED
    )
    runs = (base / "run1", base / "run2")
    for run_dir in runs:
        _run_pipeline(corpus, run_dir)
    return {
        "base": base,
        "corpus": corpus,
        "runs": runs,
        "summary": summary,
        "eval_pre": json.loads((runs[0] / "eval_pre.json").read_text("utf-8")),
        "eval_post": json.loads((runs[0] / "eval_report.json").read_text("utf-8")),
    }
