"""Fan annotation tasks out to N independent annotator backends.

A backend is either a remote HTTP endpoint (``{prompt, settings}`` in, text
out; credentials from the environment) or a scripted fixture mapping
prompt-hash to response.  Every response is parsed into the task's
structured shape; an unparseable response gets exactly one repair re-ask
before it counts as a failure.  Votes are always ordered by annotator_id,
never by arrival, so consensus is independent of network timing.  A response
cache keyed by (annotator_id, prompt hash) makes reruns free.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
import time
from concurrent.futures import Executor, Future
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .jsonio import read_jsonl, write_jsonl
from .prompts import DEFAULT_TEMPLATE_FOR_TASK, MissingFieldError, REPAIR_INSTRUCTION, TEMPLATES

TASKS = ("extract_pair", "semantic_explain", "visual_classify", "phonetic_classify")


class EnsembleConfigError(ValueError):
    """Unusable ensemble configuration (too few or duplicate annotators)."""


class TransportError(RuntimeError):
    """Retryable backend failure: timeout, connection error, HTTP 5xx."""


class ScriptedResponseMissing(RuntimeError):
    """Scripted fixture has no entry for this prompt (not retryable)."""


class OutputParseError(ValueError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    task: str
    template_id: str = ""
    context_fields: tuple[str, ...] = ()

    def resolved_template(self):
        tid = self.template_id or DEFAULT_TEMPLATE_FOR_TASK[self.task]
        if tid not in TEMPLATES:
            raise EnsembleConfigError(f"unknown template {tid!r}")
        return TEMPLATES[tid]


@dataclass
class AnnotatorHandle:
    annotator_id: str
    backend: str                       # "remote_http" | "scripted"
    endpoint: Optional[str] = None
    fixture_path: Optional[str] = None
    settings: dict = field(default_factory=dict)
    max_retries: int = 2
    timeout: float = 30.0

    _backend_obj: Any = field(default=None, repr=False, compare=False)

    def backend_obj(self):
        if self._backend_obj is None:
            if self.backend == "scripted":
                if not self.fixture_path:
                    raise EnsembleConfigError(
                        f"annotator {self.annotator_id}: scripted backend needs a fixture_path"
                    )
                self._backend_obj = ScriptedBackend(self.fixture_path)
            elif self.backend == "remote_http":
                if not self.endpoint:
                    raise EnsembleConfigError(
                        f"annotator {self.annotator_id}: remote_http backend needs an endpoint"
                    )
                self._backend_obj = RemoteHttpBackend(self.endpoint, self.timeout)
            else:
                raise EnsembleConfigError(
                    f"annotator {self.annotator_id}: unknown backend {self.backend!r}"
                )
        return self._backend_obj


@dataclass(frozen=True)
class RawAnnotation:
    annotator_id: str
    value: Any
    raw_text: str
    retry_count: int = 0
    repaired: bool = False

    def to_dict(self) -> dict:
        return {
            "annotator_id": self.annotator_id,
            "value": self.value,
            "raw_text": self.raw_text,
            "retry_count": self.retry_count,
            "repaired": self.repaired,
        }


@dataclass(frozen=True)
class VoteSet:
    record_id: str
    task: str
    votes: tuple[RawAnnotation, ...]
    failures: tuple[tuple[str, str], ...] = ()   # (annotator_id, reason)

    @property
    def arity(self) -> int:
        return len(self.votes) + len(self.failures)

    @property
    def ensemble_failed(self) -> bool:
        return len(self.failures) >= math.ceil(self.arity / 2)

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "task": self.task,
            "votes": [v.to_dict() for v in self.votes],
            "failures": [list(f) for f in self.failures],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VoteSet":
        return cls(
            record_id=str(d["record_id"]),
            task=str(d["task"]),
            votes=tuple(
                RawAnnotation(
                    annotator_id=str(v["annotator_id"]),
                    value=v.get("value"),
                    raw_text=str(v.get("raw_text", "")),
                    retry_count=int(v.get("retry_count", 0)),
                    repaired=bool(v.get("repaired", False)),
                )
                for v in d.get("votes", [])
            ),
            failures=tuple((str(a), str(r)) for a, r in d.get("failures", [])),
        )


@dataclass(frozen=True)
class SkippedRecord:
    record_id: str
    task: str
    reason: str

    def to_dict(self) -> dict:
        return {"record_id": self.record_id, "task": self.task, "skipped": self.reason}


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def render_prompt(spec: TaskSpec, record: dict) -> str:
    """Deterministic prompt text; raises MissingFieldError for absent context."""
    return spec.resolved_template().render(record)


# --- backends -------------------------------------------------------------

class ScriptedBackend:
    """Replays canned responses from a fixture file of prompt-hash -> response."""

    def __init__(self, fixture_path: str | Path):
        self.responses: dict[str, str] = {}
        for _, rec in read_jsonl(fixture_path):
            self.responses[rec["prompt_sha256"]] = rec["response"]

    def complete(self, prompt: str, settings: dict) -> str:
        key = prompt_hash(prompt)
        if key not in self.responses:
            raise ScriptedResponseMissing(f"no scripted response for prompt {key[:12]}")
        return self.responses[key]


class RemoteHttpBackend:
    """POSTs {prompt, settings} to an endpoint and returns the text reply.

    Credentials come from the CROWDLOOP_API_KEY environment variable when
    set.  Timeouts, connection errors, and 5xx responses raise
    TransportError so the caller's retry policy applies.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def complete(self, prompt: str, settings: dict) -> str:
        import os

        import httpx

        headers = {}
        api_key = os.environ.get("CROWDLOOP_API_KEY")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            resp = httpx.post(
                self.endpoint,
                json={"prompt": prompt, "settings": settings},
                headers=headers,
                timeout=self.timeout,
            )
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise ScriptedResponseMissing(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            if isinstance(body, dict) and "text" in body:
                return str(body["text"])
        except ValueError:
            pass
        return resp.text


# --- output parsing -------------------------------------------------------

_JSON_SNIPPET_RE = re.compile(r"(\[.*\]|\{.*\})", re.DOTALL)


def _extract_json(text: str) -> Any:
    try:
        return json.loads(text)
    except ValueError:
        m = _JSON_SNIPPET_RE.search(text)
        if m:
            return json.loads(m.group(1))
        raise OutputParseError("no JSON found in response")


def parse_output(task: str, text: str) -> Any:
    """Parse a backend reply into the task's structured value.

    extract_pair -> list of {"name", "explanation"}; classify tasks ->
    {"label": id-or-null}; semantic_explain -> {"explanation": str}.
    """
    data = _extract_json(text)
    if task == "extract_pair":
        if isinstance(data, dict) and "pairs" in data:
            data = data["pairs"]
        if not isinstance(data, list):
            raise OutputParseError("extract_pair reply must be a list")
        out = []
        for item in data:
            if not isinstance(item, dict) or ("name" not in item and "explanation" not in item):
                raise OutputParseError("extract_pair item missing name/explanation")
            out.append({"name": item.get("name"), "explanation": item.get("explanation")})
        return out
    if task in ("visual_classify", "phonetic_classify"):
        if not isinstance(data, dict) or "label" not in data:
            raise OutputParseError("classification reply must carry a label field")
        label = data["label"]
        if label is not None and not isinstance(label, str):
            raise OutputParseError("label must be a string or null")
        return {"label": label}
    if task == "semantic_explain":
        if not isinstance(data, dict) or not isinstance(data.get("explanation"), str):
            raise OutputParseError("semantic_explain reply must carry an explanation string")
        return {"explanation": data["explanation"]}
    raise OutputParseError(f"unknown task {task!r}")


# --- response cache -------------------------------------------------------

class ResponseCache:
    """(annotator_id, prompt hash) -> raw response text.

    Concurrent readers are safe; writes take a lock.  ``hits``/``misses``
    feed the rerun-is-free check.
    """

    def __init__(self):
        self._data: dict[tuple[str, str], str] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, annotator_id: str, phash: str) -> Optional[str]:
        got = self._data.get((annotator_id, phash))
        with self._lock:
            if got is None:
                self.misses += 1
            else:
                self.hits += 1
        return got

    def put(self, annotator_id: str, phash: str, response: str) -> None:
        with self._lock:
            self._data[(annotator_id, phash)] = response

    def __len__(self) -> int:
        return len(self._data)

    def dump(self, path: str | Path) -> int:
        rows = [
            {"annotator_id": a, "prompt_sha256": h, "response": r}
            for (a, h), r in sorted(self._data.items())
        ]
        return write_jsonl(path, rows)

    @classmethod
    def load(cls, path: str | Path) -> "ResponseCache":
        cache = cls()
        p = Path(path)
        if p.exists():
            for _, rec in read_jsonl(p):
                cache._data[(rec["annotator_id"], rec["prompt_sha256"])] = rec["response"]
        return cache


# --- annotate + fan-out ---------------------------------------------------

@dataclass
class AnnotateFailure(Exception):
    annotator_id: str
    reason: str
    raw_text: str = ""

    def __str__(self) -> str:
        return f"{self.annotator_id}: {self.reason}"


def annotate(
    handle: AnnotatorHandle,
    prompt: str,
    task: str,
    cache: ResponseCache | None = None,
    retry_wait: float = 0.2,
) -> RawAnnotation:
    """One annotator, one prompt: retries transport errors up to
    ``max_retries``, re-asks once on unparseable output, then fails."""
    phash = prompt_hash(prompt)
    backend = handle.backend_obj()

    def fetch(p: str, h: str) -> tuple[str, int]:
        if cache is not None:
            cached = cache.get(handle.annotator_id, h)
            if cached is not None:
                return cached, 0
        attempts = 0
        while True:
            try:
                text = backend.complete(p, handle.settings)
                break
            except TransportError as exc:
                attempts += 1
                if attempts > handle.max_retries:
                    raise AnnotateFailure(handle.annotator_id, f"transport: {exc}") from exc
                if retry_wait:
                    time.sleep(retry_wait * attempts)
            except ScriptedResponseMissing as exc:
                raise AnnotateFailure(handle.annotator_id, f"no response: {exc}") from exc
        if cache is not None:
            cache.put(handle.annotator_id, h, text)
        return text, attempts

    text, retries = fetch(prompt, phash)
    try:
        value = parse_output(task, text)
        return RawAnnotation(handle.annotator_id, value, text, retry_count=retries)
    except OutputParseError:
        pass

    repair_prompt = prompt + REPAIR_INSTRUCTION
    try:
        text2, retries2 = fetch(repair_prompt, prompt_hash(repair_prompt))
    except AnnotateFailure:
        raise AnnotateFailure(
            handle.annotator_id, "schema-invalid output and repair re-ask unavailable", text
        ) from None
    try:
        value = parse_output(task, text2)
        return RawAnnotation(
            handle.annotator_id, value, text2, retry_count=retries + retries2, repaired=True
        )
    except OutputParseError as exc:
        raise AnnotateFailure(
            handle.annotator_id, f"schema-invalid after repair: {exc}", text2
        ) from exc


def run_ensemble(
    spec: TaskSpec,
    record: dict,
    handles: list[AnnotatorHandle],
    cache: ResponseCache | None = None,
    executor: Executor | None = None,
    retry_wait: float = 0.2,
) -> VoteSet | SkippedRecord:
    """Consult all N annotators for one record.

    Returns a VoteSet ordered by annotator_id (never by arrival), or a
    SkippedRecord when the prompt cannot be rendered for this record.
    """
    if len(handles) < 2:
        raise EnsembleConfigError("an ensemble needs at least 2 annotators")
    ids = [h.annotator_id for h in handles]
    if len(set(ids)) != len(ids):
        raise EnsembleConfigError(f"annotator ids must be distinct, got {sorted(ids)}")

    record_id = str(record.get("record_id") or record.get("comment_id") or record.get("pair_id"))
    try:
        prompt = render_prompt(spec, record)
    except MissingFieldError as exc:
        return SkippedRecord(record_id, spec.task, f"missing {', '.join(exc.fields)}")

    ordered = sorted(handles, key=lambda h: h.annotator_id)

    def work(handle: AnnotatorHandle):
        return annotate(handle, prompt, spec.task, cache=cache, retry_wait=retry_wait)

    results: list[RawAnnotation | AnnotateFailure] = []
    if executor is None:
        for handle in ordered:
            try:
                results.append(work(handle))
            except AnnotateFailure as fail:
                results.append(fail)
    else:
        futures: list[Future] = [executor.submit(work, h) for h in ordered]
        for fut in futures:
            try:
                results.append(fut.result())
            except AnnotateFailure as fail:
                results.append(fail)

    votes = tuple(r for r in results if isinstance(r, RawAnnotation))
    failures = tuple(
        (r.annotator_id, r.reason) for r in results if isinstance(r, AnnotateFailure)
    )
    return VoteSet(record_id=record_id, task=spec.task, votes=votes, failures=failures)
