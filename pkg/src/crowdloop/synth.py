"""Synthetic corpus with scripted annotators for end-to-end runs.

Generates a seeded corpus (posts, comments, gold pairs), one scripted
fixture file per annotator, and a ready-to-run config.  Each annotator
answers each record with the gold extraction, except on an independent
per-(annotator, record) draw at the configured error rate, where it answers
the record's designated wrong pair instead -- so majority-wrong records
exist but unanimous-wrong ones are vanishingly rare.  A slice of correct
answers is emitted as surface variants (added filler word / punctuation) to
exercise canonicalization and minor-match scoring end to end.  Everything
derives from sha256 draws, so identical seeds give identical corpora.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .corpus import CommentRecord, preprocess
from .ensemble import TaskSpec, prompt_hash, render_prompt
from .jsonio import write_jsonl
from .pipeline import extract_context

SURNAMES = "李王张刘陈杨赵黄周吴徐孙马朱胡郭何高林罗"
GIVEN = ["明远", "乐乐", "思源", "雅静", "建华", "晓梅", "子轩", "雨桐", "浩然", "嘉怡",
         "文博", "欣怡", "志强", "丽华", "俊杰", "婷婷", "国栋", "小满", "青山", "若曦"]
EXPLANATIONS = [
    "取自成语，寓意美好",
    "听起来很普通但是很亲切",
    "和他的气质很搭",
    "课本里常见的名字",
    "有文化底蕴的名字",
    "叫起来顺口",
    "寓意聪明好学",
    "带着祝福的名字",
]
FOREIGN_NAMES = ["Lira", "James", "Ash", "Daniel", "Sophie", "Mark", "Nina", "Oliver"]
DECOR_EMOJI = ["👍👍", "😂", "🎉🎉", "🌸"]


def _draw(seed: int, *parts, mod: int = 10_000) -> int:
    payload = ":".join([str(seed), *map(str, parts)]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big") % mod


def _name_at(i: int) -> str:
    return SURNAMES[i % len(SURNAMES)] + GIVEN[(i // len(SURNAMES)) % len(GIVEN)]


def _gold_pair(seed: int, idx: int) -> tuple[str, str | None]:
    name = _name_at(_draw(seed, "name", idx, mod=10_000))
    expl = None
    if _draw(seed, "hasexpl", idx, mod=100) < 70:
        expl = EXPLANATIONS[_draw(seed, "expl", idx, mod=len(EXPLANATIONS))]
    return name, expl


def _wrong_pair(seed: int, idx: int, gold_name: str) -> tuple[str, str | None]:
    shift = 1 + _draw(seed, "wrongshift", idx, mod=50)
    name = _name_at(_draw(seed, "name", idx, mod=10_000) + shift)
    if name == gold_name:
        name = _name_at(_draw(seed, "name", idx, mod=10_000) + shift + 1)
    return name, "听起来也不错"


def _variant(text: str | None, kind: int) -> str | None:
    if text is None:
        return None
    if kind == 0:
        return "是" + text
    if kind == 1:
        return f"「{text}」"
    return text + "。"


def generate_synthetic_corpus(
    out_dir: str | Path,
    n_comments: int = 500,
    n_annotators: int = 5,
    error_rate: float = 0.10,
    seed: int = 42,
    n_posts: int = 20,
    variant_rate: float = 0.08,
) -> dict:
    """Write corpus + fixtures + config under ``out_dir``; returns a summary."""
    out = Path(out_dir)
    fixtures_dir = out / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    fixtures_dir.mkdir(parents=True, exist_ok=True)

    posts = []
    for p in range(n_posts):
        posts.append({
            "post_id": f"p{p:03d}",
            "url": f"https://example.invalid/posts/p{p:03d}",
            "foreign_name": FOREIGN_NAMES[p % len(FOREIGN_NAMES)] if p % 5 != 4 else None,
            "image_description": ("short blond hair, smiling" if p % 3 == 0 else None),
            "like_count": 200 + 37 * p,
            "comment_count": n_comments // n_posts,
            "posted_at": f"2025-01-{21 + p % 7:02d}T0{p % 10}:15:00Z",
        })

    comments = []
    gold_rows = []
    gold_by_record: dict[str, dict] = {}
    for i in range(n_comments):
        cid = f"c{i:04d}"
        name, expl = _gold_pair(seed, i)
        # The floor marker keeps every comment text (and hence every prompt)
        # distinct, so scripted error draws stay independent across records.
        core = f"叫{name}吧" if expl is None else f"叫{name}吧，{expl}"
        body = f"{i + 1}楼：{core}"
        decor = _draw(seed, "decor", i, mod=100)
        if decor < 6:
            body = body + " " + DECOR_EMOJI[decor % len(DECOR_EMOJI)]
        elif decor < 10:
            body = f"@楼主{decor} " + body
        like_draw = _draw(seed, "likes", i, mod=1000)
        likes = 0
        if like_draw >= 700:
            likes = like_draw - 690
        if like_draw >= 995:
            likes = 1000 + like_draw * 3
        comments.append({
            "comment_id": cid,
            "post_id": f"p{i % n_posts:03d}",
            "text": body,
            "like_count": likes,
            "posted_at": f"2025-01-{22 + i % 6:02d}T{i % 24:02d}:{i % 60:02d}:00Z",
        })
        gold = {"name": name, "explanation": expl}
        gold_by_record[cid] = gold
        gold_rows.append({
            "pair_id": f"{cid}#0",
            "comment_id": cid,
            "name": name,
            "explanation": expl,
            "provenance": "gold",
        })

    spec = TaskSpec(task="extract_pair")
    annotator_ids = [f"scripted-{chr(ord('a') + k)}" for k in range(n_annotators)]
    fixture_rows: dict[str, list[dict]] = {aid: [] for aid in annotator_ids}
    planned_wrong: dict[str, list[str]] = {}

    posts_by_id = {p["post_id"]: p for p in posts}
    for i, comment in enumerate(comments):
        cid = comment["comment_id"]
        clean = preprocess(CommentRecord(
            comment_id=cid, post_id=comment["post_id"], text=comment["text"],
        ))
        ctx = extract_context(
            {"comment_id": cid, "text_clean": clean.text_clean},
            posts_by_id.get(comment["post_id"]),
        )
        prompt = render_prompt(spec, ctx)
        phash = prompt_hash(prompt)
        gold = gold_by_record[cid]
        wrong_name, wrong_expl = _wrong_pair(seed, i, gold["name"])
        wrong_aids = []
        for k, aid in enumerate(annotator_ids):
            if _draw(seed, "err", aid, cid, mod=10_000) < int(error_rate * 10_000):
                value = [{"name": wrong_name, "explanation": wrong_expl}]
                wrong_aids.append(aid)
            elif _draw(seed, "var", aid, cid, mod=10_000) < int(variant_rate * 10_000):
                kind = _draw(seed, "varkind", aid, cid, mod=3)
                value = [{"name": gold["name"], "explanation": _variant(gold["explanation"], kind)}]
            else:
                value = [{"name": gold["name"], "explanation": gold["explanation"]}]
            fixture_rows[aid].append({
                "prompt_sha256": phash,
                "response": json.dumps(value, ensure_ascii=False),
            })
        if wrong_aids:
            planned_wrong[cid] = wrong_aids

    for aid, rows in fixture_rows.items():
        write_jsonl(fixtures_dir / f"{aid}.jsonl", rows)

    write_jsonl(out / "posts.jsonl", posts)
    write_jsonl(out / "comments.jsonl", comments)
    write_jsonl(out / "gold.jsonl", gold_rows)

    config = {
        "annotators": [
            {
                "annotator_id": aid,
                "backend": "scripted",
                "fixture_path": str(fixtures_dir / f"{aid}.jsonl"),
            }
            for aid in annotator_ids
        ],
        "ensemble_size": n_annotators,
        "review_threshold": 100,
        "viral_threshold": 1000,
    }
    (out / "config.json").write_text(
        json.dumps(config, indent=2, sort_keys=True) + "\n", "utf-8"
    )

    return {
        "n_comments": n_comments,
        "n_posts": n_posts,
        "n_annotators": n_annotators,
        "error_rate": error_rate,
        "seed": seed,
        "records_with_planned_errors": len(planned_wrong),
        "paths": {
            "posts": str(out / "posts.jsonl"),
            "comments": str(out / "comments.jsonl"),
            "gold": str(out / "gold.jsonl"),
            "config": str(out / "config.json"),
        },
    }
