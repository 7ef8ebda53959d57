"""Pipeline stages wiring the modules over line-delimited artifact files.

Each stage is a plain function from input files to output files so the CLI,
the tests, and the review service can share one implementation.  Outputs
are canonical JSON lines (sorted keys, no timestamps), which is what makes
same-seed reruns byte-identical.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

from . import consensus as cns
from .codebook import load_codebook
from .config import ConfigError, RunConfig
from .corpus import CorpusSnapshot, PairRecord, ingest, preprocess
from .ensemble import ResponseCache, SkippedRecord, TaskSpec, VoteSet, run_ensemble
from .evaluation import EvalCase, EvalReport, score_against_gold
from .jsonio import read_jsonl, write_jsonl
from .review.store import Resolution, merge_final_dataset
from .rules import RuleAuditLog, apply_post_rules
from .stats import combination_profile, engagement_profile


def extract_context(clean: dict, post: Optional[dict]) -> dict:
    """Prompt context for extract_pair; shared with the fixture generator so
    scripted prompt hashes line up with live runs."""
    ctx = {"record_id": clean["comment_id"], "text_clean": clean["text_clean"]}
    if post and post.get("foreign_name"):
        ctx["foreign_name"] = post["foreign_name"]
    return ctx


# -- ingest -----------------------------------------------------------------

def stage_ingest(
    posts_path: Optional[str],
    comments_path: Optional[str],
    gold_path: Optional[str],
    out_dir: str | Path,
    config: RunConfig,
) -> dict:
    out = Path(out_dir)
    snapshot = CorpusSnapshot()
    if posts_path:
        ingest(posts_path, "posts", snapshot)
    if comments_path:
        ingest(comments_path, "comments", snapshot)
    if gold_path:
        ingest(gold_path, "gold", snapshot)

    unresolved = snapshot.unresolved_comment_posts()
    dropped_empty = 0
    clean_rows = []
    for cid in sorted(snapshot.comments):
        comment = snapshot.comments[cid]
        clean = preprocess(comment, emoticon_tokens=config.emoticon_tokens)
        if clean.empty_after_clean:
            dropped_empty += 1
            continue
        clean_rows.append({
            "comment_id": cid,
            "post_id": comment.post_id,
            "text": comment.text,
            "text_clean": clean.text_clean,
            "removed_mentions": list(clean.removed_mentions),
            "removed_emoji_count": clean.removed_emoji_count,
            "like_count": comment.like_count,
            "posted_at": comment.posted_at.isoformat() if comment.posted_at else None,
        })
    write_jsonl(out / "comments_clean.jsonl", clean_rows)

    post_rows = []
    for pid in sorted(snapshot.posts):
        post = snapshot.posts[pid]
        post_rows.append({
            "post_id": pid,
            "url": post.url,
            "foreign_name": post.foreign_name,
            "image_description": post.image_description,
            "like_count": post.like_count,
            "comment_count": post.comment_count,
            "posted_at": post.posted_at.isoformat() if post.posted_at else None,
        })
    write_jsonl(out / "posts_norm.jsonl", post_rows)
    write_jsonl(out / "gold_norm.jsonl", [g.to_dict() for g in snapshot.gold])

    report = {
        "counts": snapshot.counts(),
        "duplicates": snapshot.duplicate_counts,
        "dropped_empty_after_clean": dropped_empty,
        "unresolved_post_ids": unresolved,
    }
    (out / "ingest_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", "utf-8"
    )
    return report


# -- annotate ---------------------------------------------------------------

def stage_annotate(
    in_dir: str | Path,
    out_path: str | Path,
    config: RunConfig,
    task: str = "extract_pair",
    ensemble_size: Optional[int] = None,
    cache_path: str | Path | None = None,
    pairs_path: str | Path | None = None,
) -> dict:
    if not config.annotators:
        raise ConfigError("no annotator backends configured; add them to the config file")
    handles = config.ensemble_handles(ensemble_size)
    spec = TaskSpec(task=task)
    in_dir = Path(in_dir)

    cache = ResponseCache.load(cache_path) if cache_path else ResponseCache()
    posts = {r["post_id"]: r for _, r in read_jsonl(in_dir / "posts_norm.jsonl")} \
        if (in_dir / "posts_norm.jsonl").exists() else {}

    records: list[dict] = []
    if task == "extract_pair":
        for _, clean in read_jsonl(in_dir / "comments_clean.jsonl"):
            records.append(extract_context(clean, posts.get(clean["post_id"])))
    else:
        if pairs_path is None:
            raise ConfigError(f"task {task} needs --pairs with the pair records to annotate")
        post_of_comment = {}
        clean_file = in_dir / "comments_clean.jsonl"
        if clean_file.exists():
            post_of_comment = {
                r["comment_id"]: r["post_id"] for _, r in read_jsonl(clean_file)
            }
        for _, pair in read_jsonl(pairs_path):
            ctx = {
                "record_id": pair["pair_id"],
                "name": pair.get("name"),
                "explanation": pair.get("explanation"),
            }
            post = posts.get(post_of_comment.get(pair.get("comment_id", ""), "")) or {}
            for key in ("foreign_name", "image_description"):
                if post.get(key):
                    ctx[key] = post[key]
            records.append(ctx)

    results: list[VoteSet | SkippedRecord] = []
    with ThreadPoolExecutor(max_workers=config.in_flight_cap) as pool:
        for record in records:
            results.append(
                run_ensemble(spec, record, handles, cache=cache, executor=pool, retry_wait=0.05)
            )

    rows = [r.to_dict() for r in results]
    rows.sort(key=lambda r: r["record_id"])
    write_jsonl(out_path, rows)
    if cache_path:
        cache.dump(cache_path)
    n_skipped = sum(1 for r in results if isinstance(r, SkippedRecord))
    return {
        "records": len(records),
        "skipped": n_skipped,
        "cache_hits": cache.hits,
        "cache_misses": cache.misses,
        "backend_calls": cache.misses,
    }


# -- consense ---------------------------------------------------------------

def stage_consense(
    votes_path: str | Path,
    out_path: str | Path,
    seed: int,
    config: RunConfig,
) -> dict:
    policy = config.policy()
    rows = []
    failed_rows = []
    for _, rec in read_jsonl(votes_path):
        if "skipped" in rec:
            failed_rows.append(rec)
            continue
        votes = VoteSet.from_dict(rec)
        if votes.ensemble_failed or not votes.votes:
            failed_rows.append({
                "record_id": votes.record_id,
                "task": votes.task,
                "ensemble_failed": True,
                "failures": [list(f) for f in votes.failures],
            })
            continue
        tally = cns.tally(votes, policy)
        result = cns.decide(tally, cns.derive_seed(seed, votes.record_id))
        rows.append(result.to_dict())
    rows.sort(key=lambda r: r["record_id"])
    write_jsonl(out_path, rows)
    failed_path = Path(out_path).with_name(Path(out_path).stem + "_failed.jsonl")
    write_jsonl(failed_path, sorted(failed_rows, key=lambda r: r["record_id"]))
    return {"records": len(rows), "failed_or_skipped": len(failed_rows)}


# -- review export ----------------------------------------------------------

def stage_review_export(
    votes_path: str | Path,
    consensus_path: str | Path,
    out_path: str | Path,
    threshold: int,
    context_dir: str | Path | None = None,
) -> dict:
    contexts = {}
    if context_dir is not None:
        clean = Path(context_dir) / "comments_clean.jsonl"
        if clean.exists():
            contexts = {
                r["comment_id"]: {"text": r["text"], "text_clean": r["text_clean"]}
                for _, r in read_jsonl(clean)
            }

    by_record: dict[str, VoteSet] = {}
    failed: list[VoteSet] = []
    for _, rec in read_jsonl(votes_path):
        if "skipped" in rec:
            continue
        votes = VoteSet.from_dict(rec)
        if votes.ensemble_failed or not votes.votes:
            failed.append(votes)
        else:
            by_record[votes.record_id] = votes

    items = []
    for _, rec in read_jsonl(consensus_path):
        result = cns.ConsensusResult(**rec)
        votes = by_record.get(result.record_id)
        if votes is None:
            continue
        item = cns.flag_for_review(
            result, votes, threshold=threshold, context=contexts.get(result.record_id, {})
        )
        if item is not None:
            items.append(item)
    for votes in failed:
        items.append(cns.review_item_for_failure(
            votes, "ensemble failed (majority of annotators unusable)",
            context=contexts.get(votes.record_id, {}),
        ))

    items.sort(key=lambda i: i.item_id)
    write_jsonl(out_path, [i.to_dict() for i in items])
    return {"flagged": len(items)}


# -- merge ------------------------------------------------------------------

def stage_merge(
    consensus_path: str | Path,
    items_path: str | Path,
    resolutions_path: str | Path | None,
    out_path: str | Path,
    codebook_path: str | Path | None = None,
) -> dict:
    results = [cns.ConsensusResult(**rec) for _, rec in read_jsonl(consensus_path)]
    items = [cns.ReviewItem.from_dict(rec) for _, rec in read_jsonl(items_path)] \
        if Path(items_path).exists() else []
    resolutions = []
    if resolutions_path and Path(resolutions_path).exists():
        resolutions = [Resolution.from_dict(rec) for _, rec in read_jsonl(resolutions_path)]
    codebook = load_codebook(codebook_path) if codebook_path else load_codebook()

    pairs = merge_final_dataset(results, resolutions, items, codebook=codebook)
    write_jsonl(out_path, [p.to_dict() for p in pairs])
    provenance_counts: dict[str, int] = {}
    for p in pairs:
        provenance_counts[p.provenance or "unset"] = provenance_counts.get(p.provenance or "unset", 0) + 1
    return {"pairs": len(pairs), "provenance": provenance_counts}


# -- rules ------------------------------------------------------------------

def stage_rules(pairs_path: str | Path, out_path: str | Path, audit_path: str | Path) -> dict:
    pairs = [PairRecord.from_dict(rec) for _, rec in read_jsonl(pairs_path)]
    by_comment: dict[str, list[PairRecord]] = {}
    for p in pairs:
        by_comment.setdefault(p.comment_id, []).append(p)

    audit = RuleAuditLog()
    kept: list[PairRecord] = []
    dropped = 0
    for cid in sorted(by_comment):
        group = by_comment[cid]
        corrected = []
        for pair in group:
            siblings = [s for s in group if s.pair_id != pair.pair_id]
            new_pair, outcomes = apply_post_rules(pair, siblings)
            for outcome in outcomes:
                audit.record(pair.pair_id, outcome)
            corrected.append(new_pair)
        for pair in corrected:
            if pair.name is None and pair.explanation is None:
                dropped += 1
            else:
                kept.append(pair)

    kept.sort(key=lambda p: p.pair_id)
    write_jsonl(out_path, [p.to_dict() for p in kept])
    write_jsonl(audit_path, audit.events)
    return {"pairs_in": len(pairs), "pairs_out": len(kept), "dropped": dropped,
            "rule_events": len(audit.events)}


# -- evaluate ---------------------------------------------------------------

def stage_evaluate(
    pairs_path: str | Path,
    consensus_path: str | Path,
    gold_path: str | Path,
    out_path: str | Path,
    config: RunConfig,
) -> EvalReport:
    consistency_by_record = {
        rec["record_id"]: int(rec["consistency"]) for _, rec in read_jsonl(consensus_path)
    }
    cases = []
    for _, rec in read_jsonl(pairs_path):
        pair = PairRecord.from_dict(rec)
        cases.append(EvalCase(
            pair=pair,
            consistency=consistency_by_record.get(pair.comment_id, -1),
        ))
    gold = [PairRecord.from_dict(rec) for _, rec in read_jsonl(gold_path)]
    report = score_against_gold(cases, gold, config.policy())
    Path(out_path).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8"
    )
    return report


# -- stats ------------------------------------------------------------------

def stage_stats(
    pairs_path: str | Path,
    out_path: str | Path,
    profile: str,
    config: RunConfig,
    comments_path: str | Path | None = None,
    viral_threshold: Optional[int] = None,
) -> dict:
    if profile == "representativeness":
        # sample vs full corpus: two-sample KS on likes and posting times
        if comments_path is None:
            raise ConfigError("representativeness profile needs --comments (the full corpus)")
        doc = _representativeness(pairs_path, comments_path)
        write_jsonl(out_path, [{"profile": profile, **doc}])
        txt_path = Path(out_path).with_suffix(".txt")
        txt_path.write_text(_render_stats_text(profile, doc), "utf-8")
        return doc

    pairs = [PairRecord.from_dict(rec) for _, rec in read_jsonl(pairs_path)]
    if profile == "combinations":
        stats = combination_profile(pairs, config.policy())
        doc = stats.to_dict()
    elif profile == "engagement":
        if comments_path is None:
            raise ConfigError("engagement profile needs --comments")
        likes = {r["comment_id"]: int(r["like_count"]) for _, r in read_jsonl(comments_path)}
        stats = engagement_profile(
            pairs, likes, viral_threshold=viral_threshold or config.viral_threshold
        )
        doc = stats.to_dict()
    else:
        raise ConfigError(f"unknown stats profile {profile!r}")
    write_jsonl(out_path, [{"profile": profile, **doc}])
    txt_path = Path(out_path).with_suffix(".txt")
    txt_path.write_text(_render_stats_text(profile, doc), "utf-8")
    return doc


def _representativeness(sample_path: str | Path, full_path: str | Path) -> dict:
    from datetime import datetime

    from .stats import ks_two_sample

    def load(path):
        likes, times = [], []
        for _, r in read_jsonl(path):
            likes.append(int(r["like_count"]))
            if r.get("posted_at"):
                times.append(datetime.fromisoformat(r["posted_at"]).timestamp())
        return likes, times

    sample_likes, sample_times = load(sample_path)
    full_likes, full_times = load(full_path)
    doc: dict = {
        "n_sample": len(sample_likes),
        "n_full": len(full_likes),
        "likes": ks_two_sample(sample_likes, full_likes).to_dict(),
    }
    if sample_times and full_times:
        doc["posted_at"] = ks_two_sample(sample_times, full_times).to_dict()
    return doc


def _render_stats_text(profile: str, doc: dict) -> str:
    lines = [f"profile: {profile}"]
    if profile == "combinations":
        lines.append(f"classified pairs: {doc['n_classified']} (unclassified {doc['n_unclassified']})")
        for k, v in doc["counts"].items():
            lines.append(f"  {k:26s} {v:>8d}  ({100.0 * doc['fractions'][k]:6.2f}%)")
        h1, h2 = doc["h1"], doc["h2"]
        lines.append(
            f"pattern distribution: chi2({h1['df']}) = {h1['statistic']:.2f}, "
            f"p = {h1['p_value']:.3g}, V = {h1['cramers_v']:.2f}"
        )
        if h2:
            lines.append(
                f"dual-channel comparison: chi2({h2['df']}) = {h2['statistic']:.2f}, "
                f"p = {h2['p_value']:.3g}, V = {h2['cramers_v']:.2f}"
            )
        elif doc.get("h2_note"):
            lines.append(f"dual-channel comparison: {doc['h2_note']}")
        if doc.get("h3"):
            h3 = doc["h3"]
            beta = h3["coefficients"][1] if len(h3["coefficients"]) > 1 else float("nan")
            rr = h3["rate_ratios"][1] if len(h3["rate_ratios"]) > 1 else float("nan")
            pv = h3["p_values"][1] if len(h3["p_values"]) > 1 else float("nan")
            lines.append(
                f"frequency ~ channel count: beta = {beta:.3f}, exp(beta) = {rr:.3f}, "
                f"p = {pv:.3g}, dispersion = {h3['dispersion']:.3f}, "
                f"converged = {h3['converged']}"
            )
        elif doc.get("h3_note"):
            lines.append(f"frequency regression: {doc['h3_note']}")
        if doc["vif"]:
            vifs = ", ".join(f"{v:.2f}" for v in doc["vif"])
            lines.append(f"presence-matrix VIF: ({vifs})")
        elif doc.get("vif_note"):
            lines.append(doc["vif_note"])
    elif profile == "representativeness":
        lines.append(f"sample n = {doc['n_sample']}, full corpus n = {doc['n_full']}")
        for field in ("likes", "posted_at"):
            if field in doc:
                ks = doc[field]
                lines.append(
                    f"{field}: D = {ks['d_statistic']:.4f}, p = {ks['p_value']:.4g} "
                    f"({ks['method']})"
                )
    else:
        lines.append(f"viral threshold: {doc['viral_threshold']}")
        lines.append(f"comments: {doc['n_comments']}, viral: {doc['n_viral_comments']}, "
                     f"zero-like fraction: {doc['zero_like_fraction']:.3f}")
        for cat, total in doc["ranking"][:10]:
            lines.append(f"  {cat:6s} {total:>10d}")
    return "\n".join(lines) + "\n"
