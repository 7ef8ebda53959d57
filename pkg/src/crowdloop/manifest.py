"""Run manifest and single-entrant lock for a run directory.

Every stage records sha256 digests of its inputs and outputs plus its
parameters.  A rerun whose inputs and parameters match the recorded ones is
a no-op when its outputs still match too; anything else re-executes.  Data
files never contain timestamps; wall-clock timings live only here.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class RunLocked(RuntimeError):
    pass


class RunLock:
    """Exclusive lock file: one pipeline entrant per run directory."""

    def __init__(self, run_dir: str | Path):
        self.path = Path(run_dir) / ".lock"
        self._fd: Optional[int] = None

    def __enter__(self) -> "RunLock":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            self._fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RunLocked(
                f"run directory is locked by another process ({self.path}); "
                "remove the stale lock if no run is active"
            ) from None
        os.write(self._fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc_info) -> None:
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None
        self.path.unlink(missing_ok=True)


@dataclass
class RunManifest:
    run_id: str
    seed: int
    config_path: Optional[str] = None
    stages: dict = field(default_factory=dict)
    path: Optional[Path] = None

    @classmethod
    def open(cls, run_dir: str | Path, seed: int, config_path: Optional[str] = None) -> "RunManifest":
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        path = run_dir / "manifest.json"
        if path.exists():
            doc = json.loads(path.read_text("utf-8"))
            manifest = cls(
                run_id=doc["run_id"],
                seed=int(doc["seed"]),
                config_path=doc.get("config_path"),
                stages=doc.get("stages", {}),
                path=path,
            )
            if manifest.seed != seed:
                manifest.seed = seed
            return manifest
        manifest = cls(run_id=uuid.uuid4().hex, seed=seed, config_path=config_path, path=path)
        manifest.save()
        return manifest

    def save(self) -> None:
        if self.path is None:
            return
        doc = {
            "run_id": self.run_id,
            "seed": self.seed,
            "config_path": self.config_path,
            "stages": self.stages,
        }
        self.path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", "utf-8")

    def _digests(self, paths: list[str]) -> dict:
        return {str(p): file_digest(p) for p in sorted(paths)}

    def can_skip(self, stage: str, inputs: list[str], params: dict) -> bool:
        """True when the stage already ran on byte-identical inputs with the
        same parameters and its recorded outputs are still intact."""
        rec = self.stages.get(stage)
        if not rec:
            return False
        if rec.get("params") != params:
            return False
        try:
            if rec.get("inputs") != self._digests(inputs):
                return False
            for out_path, digest in rec.get("outputs", {}).items():
                if not Path(out_path).exists() or file_digest(out_path) != digest:
                    return False
        except FileNotFoundError:
            return False
        return True

    def record(
        self, stage: str, inputs: list[str], outputs: list[str], params: dict, seconds: float
    ) -> None:
        self.stages[stage] = {
            "inputs": self._digests(inputs),
            "outputs": self._digests(outputs),
            "params": params,
            "seconds": round(seconds, 6),
            "recorded_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        self.save()
