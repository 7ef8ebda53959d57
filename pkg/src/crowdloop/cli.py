"""Command-line entry point wiring the pipeline stages.

Stages read and write line-delimited artifact files inside a run directory.
Each mutating stage takes the run lock, consults the run manifest, and skips
itself when inputs, parameters, and outputs are all unchanged.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path
from typing import Optional

import click

from . import pipeline
from .config import ConfigError, load_config
from .corpus import IngestError
from .evaluation import RoundStats, tradeoff_report
from .manifest import RunLock, RunLocked, RunManifest
from .stats import StatsError


def _guarded(manifest: RunManifest, stage: str, inputs: list[str], outputs: list[str],
             params: dict, fn):
    """Run ``fn`` unless the manifest proves this stage is already current."""
    existing = [p for p in inputs if Path(p).exists()]
    if len(existing) == len(inputs) and manifest.can_skip(stage, existing, params):
        click.echo(f"{stage}: up to date, skipping")
        return None
    started = time.monotonic()
    result = fn()
    manifest.record(stage, existing, [p for p in outputs if Path(p).exists()],
                    params, time.monotonic() - started)
    return result


def _load(config_path: Optional[str]):
    try:
        return load_config(config_path)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"configuration error: {exc}")


@click.group()
def main():
    """Ensemble annotation pipeline with consistency-guided human review."""


run_dir_opt = click.option("--run-dir", default="run", show_default=True,
                           help="Directory holding this run's artifact files.")
config_opt = click.option("--config", "config_path", default=None, type=click.Path(exists=True),
                          help="JSON config with backends, codebook path, token lists.")
seed_opt = click.option("--seed", default=42, show_default=True, type=int,
                        help="Run-level seed governing all tie-breaking.")


@main.command()
@click.option("--posts", type=click.Path(exists=True), default=None)
@click.option("--comments", type=click.Path(exists=True), default=None)
@click.option("--gold", type=click.Path(exists=True), default=None)
@run_dir_opt
@config_opt
@seed_opt
def ingest(posts, comments, gold, run_dir, config_path, seed):
    """Load, validate, deduplicate, and clean the corpus files."""
    if not posts and not comments and not gold:
        raise click.UsageError("nothing to ingest: give --posts, --comments, and/or --gold")
    config = _load(config_path)
    inputs = [p for p in (posts, comments, gold) if p]
    outputs = [str(Path(run_dir) / n) for n in
               ("comments_clean.jsonl", "posts_norm.jsonl", "gold_norm.jsonl", "ingest_report.json")]
    try:
        with RunLock(run_dir):
            manifest = RunManifest.open(run_dir, seed, config_path)
            report = _guarded(
                manifest, "ingest", inputs, outputs,
                {"posts": posts, "comments": comments, "gold": gold},
                lambda: pipeline.stage_ingest(posts, comments, gold, run_dir, config),
            )
    except RunLocked as exc:
        raise click.ClickException(str(exc))
    except IngestError as exc:
        raise click.ClickException(f"ingest error: {exc}")
    if report is not None:
        click.echo(json.dumps(report, sort_keys=True))


@main.command()
@click.option("--task", default="extract_pair", show_default=True,
              type=click.Choice(["extract_pair", "semantic_explain", "visual_classify",
                                 "phonetic_classify"]))
@click.option("--ensemble-size", default=5, show_default=True, type=int)
@click.option("--pairs", "pairs_path", type=click.Path(exists=True), default=None,
              help="Pair records to annotate (channel tasks).")
@click.option("--out", "out_path", default=None, help="Votes output file.")
@run_dir_opt
@config_opt
@seed_opt
def annotate(task, ensemble_size, pairs_path, out_path, run_dir, config_path, seed):
    """Fan records out to the annotator ensemble, producing vote sets."""
    config = _load(config_path)
    out_path = out_path or str(Path(run_dir) / f"votes_{task}.jsonl")
    cache_path = str(Path(run_dir) / f"cache_{task}.jsonl")
    inputs = [str(Path(run_dir) / "comments_clean.jsonl")]
    if pairs_path:
        inputs.append(pairs_path)
    try:
        with RunLock(run_dir):
            manifest = RunManifest.open(run_dir, seed, config_path)
            report = _guarded(
                manifest, f"annotate:{task}", inputs, [out_path],
                {"task": task, "ensemble_size": ensemble_size},
                lambda: pipeline.stage_annotate(
                    run_dir, out_path, config, task=task,
                    ensemble_size=ensemble_size, cache_path=cache_path,
                    pairs_path=pairs_path,
                ),
            )
    except RunLocked as exc:
        raise click.ClickException(str(exc))
    except ConfigError as exc:
        raise click.ClickException(f"configuration error: {exc}")
    if report is not None:
        click.echo(json.dumps(report, sort_keys=True))


@main.command()
@click.option("--in", "votes_path", default=None, help="Votes input file.")
@click.option("--out", "out_path", default=None, help="Consensus output file.")
@click.option("--task", default="extract_pair", show_default=True)
@run_dir_opt
@config_opt
@seed_opt
def consense(votes_path, out_path, task, run_dir, config_path, seed):
    """Aggregate vote sets by majority vote with consistency scores."""
    config = _load(config_path)
    votes_path = votes_path or str(Path(run_dir) / f"votes_{task}.jsonl")
    out_path = out_path or str(Path(run_dir) / f"consensus_{task}.jsonl")
    if not Path(votes_path).exists():
        raise click.ClickException(f"missing upstream votes file {votes_path}; run annotate first")
    try:
        with RunLock(run_dir):
            manifest = RunManifest.open(run_dir, seed, config_path)
            report = _guarded(
                manifest, f"consense:{task}", [votes_path], [out_path],
                {"seed": seed},
                lambda: pipeline.stage_consense(votes_path, out_path, seed, config),
            )
    except RunLocked as exc:
        raise click.ClickException(str(exc))
    if report is not None:
        click.echo(json.dumps(report, sort_keys=True))


@main.command("review-export")
@click.option("--review-threshold", default=100, show_default=True, type=int)
@click.option("--task", default="extract_pair", show_default=True)
@click.option("--out", "out_path", default=None)
@run_dir_opt
@config_opt
@seed_opt
def review_export(review_threshold, task, out_path, run_dir, config_path, seed):
    """Export sub-threshold and ensemble-failed records as review items."""
    votes_path = str(Path(run_dir) / f"votes_{task}.jsonl")
    consensus_path = str(Path(run_dir) / f"consensus_{task}.jsonl")
    out_path = out_path or str(Path(run_dir) / "review_items.jsonl")
    for p in (votes_path, consensus_path):
        if not Path(p).exists():
            raise click.ClickException(f"missing upstream file {p}")
    try:
        with RunLock(run_dir):
            manifest = RunManifest.open(run_dir, seed, config_path)
            report = _guarded(
                manifest, f"review-export:{task}", [votes_path, consensus_path], [out_path],
                {"threshold": review_threshold},
                lambda: pipeline.stage_review_export(
                    votes_path, consensus_path, out_path, review_threshold, context_dir=run_dir,
                ),
            )
    except RunLocked as exc:
        raise click.ClickException(str(exc))
    if report is not None:
        click.echo(json.dumps(report, sort_keys=True))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8400, show_default=True, type=int)
@click.option("--task", default="extract_pair", show_default=True)
@run_dir_opt
@config_opt
@seed_opt
def serve(host, port, task, run_dir, config_path, seed):
    """Serve the review queue over HTTP for human adjudicators."""
    import uvicorn

    from .codebook import load_codebook
    from .consensus import ConsensusResult, ReviewItem
    from .jsonio import read_jsonl
    from .review.service import create_app
    from .review.store import ReviewStore

    config = _load(config_path)
    items_path = Path(run_dir) / "review_items.jsonl"
    consensus_path = Path(run_dir) / f"consensus_{task}.jsonl"
    if not items_path.exists():
        raise click.ClickException(f"missing review items file {items_path}; run review-export first")
    codebook = load_codebook(config.codebook_path)
    store = ReviewStore(
        log_path=Path(run_dir) / "resolutions.jsonl",
        codebook=codebook,
        snapshot_path=Path(run_dir) / "review_snapshot.jsonl",
    )
    store.enqueue([ReviewItem.from_dict(rec) for _, rec in read_jsonl(items_path)])
    store.mark_resolved_from_log()
    results = []
    if consensus_path.exists():
        results = [ConsensusResult(**rec) for _, rec in read_jsonl(consensus_path)]
    app = create_app(store, consensus_results=results)
    click.echo(f"review service on http://{host}:{port} "
               f"({store.progress()['pending']} pending items)")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--resolutions", "resolutions_path", default=None,
              help="Resolution log (defaults to the run directory's).")
@click.option("--task", default="extract_pair", show_default=True)
@click.option("--out", "out_path", default=None)
@run_dir_opt
@config_opt
@seed_opt
def merge(resolutions_path, task, out_path, run_dir, config_path, seed):
    """Merge consensus output with review resolutions into the final pairs."""
    config = _load(config_path)
    consensus_path = str(Path(run_dir) / f"consensus_{task}.jsonl")
    items_path = str(Path(run_dir) / "review_items.jsonl")
    resolutions_path = resolutions_path or str(Path(run_dir) / "resolutions.jsonl")
    out_path = out_path or str(Path(run_dir) / "final_pairs.jsonl")
    if not Path(consensus_path).exists():
        raise click.ClickException(f"missing upstream file {consensus_path}")
    inputs = [p for p in (consensus_path, items_path, resolutions_path) if Path(p).exists()]
    try:
        with RunLock(run_dir):
            manifest = RunManifest.open(run_dir, seed, config_path)
            report = _guarded(
                manifest, f"merge:{task}", inputs, [out_path], {},
                lambda: pipeline.stage_merge(
                    consensus_path, items_path,
                    resolutions_path if Path(resolutions_path).exists() else None,
                    out_path, codebook_path=config.codebook_path,
                ),
            )
    except RunLocked as exc:
        raise click.ClickException(str(exc))
    if report is not None:
        click.echo(json.dumps(report, sort_keys=True))


@main.command()
@click.option("--in", "pairs_path", default=None, help="Pairs input file.")
@click.option("--out", "out_path", default=None)
@run_dir_opt
@config_opt
@seed_opt
def rules(pairs_path, out_path, run_dir, config_path, seed):
    """Apply the deterministic post-consensus correction rules."""
    pairs_path = pairs_path or str(Path(run_dir) / "final_pairs.jsonl")
    out_path = out_path or str(Path(run_dir) / "pairs_corrected.jsonl")
    audit_path = str(Path(run_dir) / "rule_outcomes.jsonl")
    if not Path(pairs_path).exists():
        raise click.ClickException(f"missing upstream pairs file {pairs_path}")
    try:
        with RunLock(run_dir):
            manifest = RunManifest.open(run_dir, seed, config_path)
            report = _guarded(
                manifest, "rules", [pairs_path], [out_path, audit_path], {},
                lambda: pipeline.stage_rules(pairs_path, out_path, audit_path),
            )
    except RunLocked as exc:
        raise click.ClickException(str(exc))
    if report is not None:
        click.echo(json.dumps(report, sort_keys=True))


@main.command()
@click.option("--in", "pairs_path", default=None, help="Final pairs to score.")
@click.option("--gold", "gold_path", default=None, help="Gold pairs file.")
@click.option("--task", default="extract_pair", show_default=True)
@click.option("--out", "out_path", default=None)
@run_dir_opt
@config_opt
@seed_opt
def evaluate(pairs_path, gold_path, task, out_path, run_dir, config_path, seed):
    """Score the final dataset against the gold standard."""
    config = _load(config_path)
    pairs_path = pairs_path or str(Path(run_dir) / "final_pairs.jsonl")
    gold_path = gold_path or str(Path(run_dir) / "gold_norm.jsonl")
    consensus_path = str(Path(run_dir) / f"consensus_{task}.jsonl")
    out_path = out_path or str(Path(run_dir) / "eval_report.json")
    for p in (pairs_path, gold_path, consensus_path):
        if not Path(p).exists():
            raise click.ClickException(f"missing upstream file {p}")
    try:
        with RunLock(run_dir):
            manifest = RunManifest.open(run_dir, seed, config_path)
            report = _guarded(
                manifest, f"evaluate:{task}", [pairs_path, gold_path, consensus_path],
                [out_path], {},
                lambda: pipeline.stage_evaluate(
                    pairs_path, consensus_path, gold_path, out_path, config
                ),
            )
    except RunLocked as exc:
        raise click.ClickException(str(exc))
    except Exception as exc:  # EvalError carries the unmatched-id detail
        raise click.ClickException(str(exc))
    if report is not None:
        click.echo(f"n={report.n} exact={report.exact_match_rate:.4f} "
                   f"minor={report.minor_accept_rate:.4f} overall={report.overall_accuracy:.4f}")


@main.command()
@click.option("--profile", default="combinations", show_default=True,
              type=click.Choice(["combinations", "engagement", "representativeness"]))
@click.option("--in", "pairs_path", default=None, help="Pairs input file.")
@click.option("--comments", "comments_path", default=None,
              help="Cleaned comments (for engagement likes).")
@click.option("--viral-threshold", default=1000, show_default=True, type=int)
@click.option("--out", "out_path", default=None)
@run_dir_opt
@config_opt
@seed_opt
def stats(profile, pairs_path, comments_path, viral_threshold, out_path, run_dir,
          config_path, seed):
    """Run a statistics profile and emit an auditable report."""
    config = _load(config_path)
    pairs_path = pairs_path or str(Path(run_dir) / "pairs_corrected.jsonl")
    out_path = out_path or str(Path(run_dir) / f"stats_{profile}.jsonl")
    if not Path(pairs_path).exists():
        raise click.ClickException(f"missing pairs file {pairs_path}")
    if profile in ("engagement", "representativeness") and comments_path is None:
        default_comments = Path(run_dir) / "comments_clean.jsonl"
        if not default_comments.exists():
            raise click.ClickException("engagement profile needs --comments")
        comments_path = str(default_comments)
    try:
        with RunLock(run_dir):
            manifest = RunManifest.open(run_dir, seed, config_path)
            inputs = [pairs_path] + ([comments_path] if comments_path else [])
            doc = _guarded(
                manifest, f"stats:{profile}", inputs, [out_path],
                {"viral_threshold": viral_threshold},
                lambda: pipeline.stage_stats(
                    pairs_path, out_path, profile, config,
                    comments_path=comments_path, viral_threshold=viral_threshold,
                ),
            )
    except RunLocked as exc:
        raise click.ClickException(str(exc))
    except (StatsError, ConfigError) as exc:
        raise click.ClickException(str(exc))
    if doc is not None:
        click.echo(Path(out_path).with_suffix(".txt").read_text("utf-8"), nl=False)


@main.command()
@click.option("--rounds", "rounds_path", type=click.Path(exists=True), required=True,
              help="JSON list of {label, accuracy, hours, human_effort}.")
@click.option("--n-records", default=None, type=int,
              help="Corpus size for the manual-coding baseline estimate.")
@click.option("--seconds-per-record", default=40.0, show_default=True, type=float)
@click.option("--out", "out_path", default=None)
@run_dir_opt
def report(rounds_path, n_records, seconds_per_record, out_path, run_dir):
    """Emit the accuracy / efficiency / human-effort comparison table."""
    rows = json.loads(Path(rounds_path).read_text("utf-8"))
    rounds_list = [
        RoundStats(
            label=str(r["label"]),
            accuracy=r.get("accuracy"),
            hours=r.get("hours"),
            human_effort=str(r.get("human_effort", "")),
        )
        for r in rows
    ]
    table = tradeoff_report(rounds_list, n_records=n_records,
                            seconds_per_record=seconds_per_record)
    out_path = out_path or str(Path(run_dir) / "tradeoff.txt")
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    Path(out_path).write_text(table + "\n", "utf-8")
    click.echo(table)


@main.command()
@click.option("--out", "out_dir", default="synthetic", show_default=True)
@click.option("--n", "n_comments", default=500, show_default=True, type=int)
@click.option("--annotators", "n_annotators", default=5, show_default=True, type=int)
@click.option("--error-rate", default=0.10, show_default=True, type=float)
@seed_opt
def synth(out_dir, n_comments, n_annotators, error_rate, seed):
    """Generate a synthetic corpus with scripted annotator fixtures."""
    from .synth import generate_synthetic_corpus

    summary = generate_synthetic_corpus(
        out_dir, n_comments=n_comments, n_annotators=n_annotators,
        error_rate=error_rate, seed=seed,
    )
    click.echo(json.dumps(summary, sort_keys=True))


if __name__ == "__main__":
    sys.exit(main())
