"""Run manifests written next to every command output."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

from . import __version__

MANIFEST_VERSION = 1
MANIFEST_SUFFIX = ".manifest.json"
_HASH_CHUNK = 1 << 16


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def _utcnow_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(_HASH_CHUNK), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_path_for(output: Path, tag: Optional[str] = None) -> Path:
    """``results.csv`` -> ``results.csv.manifest.json``.

    With ``tag`` the name becomes ``results.csv.<tag>.manifest.json``, which
    keeps a command's record apart from the one describing its input file.
    """

    output = Path(output)
    infix = f".{tag}" if tag else ""
    return output.with_name(output.name + infix + MANIFEST_SUFFIX)


@dataclass
class RunManifest:
    """Command, resolved parameters, input hashes and artifacts of one run."""

    path: Path
    command: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    inputs: Dict[str, str] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)
    started_at: str = field(default_factory=_utcnow_iso)
    completed_at: Optional[str] = None
    status: str = "running"
    details: Dict[str, Any] = field(default_factory=dict)
    _dirty: bool = field(default=True, init=False, repr=False)

    def record_input(self, name: str, path: Path) -> None:
        self.inputs[name] = file_sha256(path)
        self.params.setdefault(name, str(path))
        self._dirty = True

    def record_artifact(self, name: str, path: Path) -> None:
        self.artifacts[name] = str(path)
        self._dirty = True

    def complete(self, status: str = "ok", details: Optional[Dict[str, Any]] = None) -> None:
        self.status = status
        self.completed_at = _utcnow_iso()
        if details is not None:
            self.details = details
        self._dirty = True

    def to_payload(self) -> Dict[str, Any]:
        return {
            "version": MANIFEST_VERSION,
            "qshs_version": __version__,
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
            "inputs": self.inputs,
            "artifacts": self.artifacts,
            "started_at": self.started_at,
            "completed_at": self.completed_at,
            "status": self.status,
            "details": self.details,
        }

    def save(self) -> None:
        if not self._dirty:
            return
        _ensure_parent(self.path)
        with self.path.open("w", encoding="utf-8") as handle:
            json.dump(self.to_payload(), handle, indent=2, default=str)
            handle.write("\n")
        self._dirty = False


def start_manifest(
    output: Path,
    command: str,
    params: Dict[str, Any],
    seed: Optional[int] = None,
    *,
    tag: Optional[str] = None,
) -> RunManifest:
    path = manifest_path_for(output, tag)
    return RunManifest(path=path, command=command, params=dict(params), seed=seed)


def load_manifest(path: Path) -> RunManifest:
    with Path(path).open("r", encoding="utf-8") as handle:
        payload = json.load(handle) or {}
    manifest = RunManifest(
        path=Path(path),
        command=payload.get("command", ""),
        params=payload.get("params") or {},
        seed=payload.get("seed"),
        inputs=payload.get("inputs") or {},
        artifacts=payload.get("artifacts") or {},
        started_at=payload.get("started_at") or _utcnow_iso(),
        completed_at=payload.get("completed_at"),
        status=payload.get("status", "unknown"),
        details=payload.get("details") or {},
    )
    manifest._dirty = False
    return manifest
