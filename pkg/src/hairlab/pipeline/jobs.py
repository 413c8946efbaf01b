"""Append-only, content-addressed job persistence for the service.

Layout under the store root:
  index.json              job id -> status record
  requests/<id>.json      the submitted parameters (raw payload hashes)
  artifacts/<id>/<name>   result files; existing files are never rewritten
  logs/<id>.log           one line per state transition
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from pathlib import Path

STATUSES = ("queued", "running", "done", "error")


class JobStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        for sub in ("requests", "artifacts", "logs"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        if not self._index_path.exists():
            self._write_index({})

    @property
    def _index_path(self) -> Path:
        return self.root / "index.json"

    def _write_index(self, index: dict) -> None:
        tmp = self._index_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(index, indent=2, sort_keys=True))
        tmp.replace(self._index_path)

    def _read_index(self) -> dict:
        return json.loads(self._index_path.read_text())

    def create(self, request_payload: dict) -> tuple[str, bool]:
        """Register a job keyed by request content; returns (id, created).

        A payload identical to an existing job returns that job instead of
        queuing a duplicate (same request + same seed means same output).
        """
        blob = json.dumps(request_payload, sort_keys=True, separators=(",", ":"))
        job_id = hashlib.sha256(blob.encode()).hexdigest()[:16]
        with self._lock:
            index = self._read_index()
            if job_id in index:
                return job_id, False
            index[job_id] = {"status": "queued", "created": time.time()}
            self._write_index(index)
            (self.root / "requests" / f"{job_id}.json").write_text(blob)
            (self.root / "artifacts" / job_id).mkdir(exist_ok=True)
            self._log(job_id, "queued")
        return job_id, True

    def _log(self, job_id: str, line: str) -> None:
        with open(self.root / "logs" / f"{job_id}.log", "a") as fh:
            fh.write(f"{time.time():.3f} {line}\n")

    def set_status(self, job_id: str, status: str, error: str | None = None) -> None:
        if status not in STATUSES:
            raise ValueError(f"unknown status {status!r}")
        with self._lock:
            index = self._read_index()
            if job_id not in index:
                raise KeyError(job_id)
            index[job_id]["status"] = status
            if error is not None:
                index[job_id]["error"] = error
            self._write_index(index)
            self._log(job_id, status if error is None else f"{status}: {error}")

    def status(self, job_id: str) -> dict:
        index = self._read_index()
        if job_id not in index:
            raise KeyError(job_id)
        return dict(index[job_id])

    def write_artifact(self, job_id: str, name: str, payload: bytes) -> Path:
        if "/" in name or name.startswith("."):
            raise ValueError(f"bad artifact name {name!r}")
        path = self.root / "artifacts" / job_id / name
        if path.exists():
            raise FileExistsError(f"artifact {name} already written for {job_id}")
        path.write_bytes(payload)
        self._log(job_id, f"artifact {name} ({len(payload)} bytes)")
        return path

    def artifact_path(self, job_id: str, name: str) -> Path:
        path = self.root / "artifacts" / job_id / name
        if "/" in name or name.startswith(".") or not path.exists():
            raise KeyError(f"{job_id}/{name}")
        return path

    def list_artifacts(self, job_id: str) -> list[str]:
        d = self.root / "artifacts" / job_id
        if not d.exists():
            raise KeyError(job_id)
        return sorted(p.name for p in d.iterdir() if p.is_file())
