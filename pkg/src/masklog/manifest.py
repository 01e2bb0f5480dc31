"""Run manifests: enough recorded state to re-run a command bit-exactly."""

from __future__ import annotations

import hashlib
import json
import os
import time

from .errors import DigestMismatch, MissingInput

TOOL_NAME = "masklog"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def digest_map(paths) -> dict:
    out = {}
    for p in paths:
        if p is None:
            continue
        p = str(p)
        if not os.path.exists(p):
            raise MissingInput(f"required file {p} does not exist")
        out[p] = file_digest(p)
    return out


def manifest_path_for(artifact_path) -> str:
    return str(artifact_path) + ".manifest.json"


def write_manifest(
    command: str,
    options: dict,
    inputs: dict,
    outputs: dict,
    started_at: float,
    version: str,
    logs: dict | None = None,
) -> dict:
    doc = {
        "tool": TOOL_NAME,
        "version": version,
        "command": command,
        "options": options,
        "inputs": inputs,
        "outputs": outputs,
        "logs": logs or {},
        "started_at": started_at,
        "finished_at": time.time(),
    }
    primary = next(iter(outputs)) if outputs else None
    if primary is not None:
        path = manifest_path_for(primary)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(doc, f, sort_keys=True, indent=2)
            f.write("\n")
        doc["manifest_path"] = path
    return doc


def load_manifest(path) -> dict:
    if not os.path.exists(path):
        raise MissingInput(f"manifest {path} does not exist")
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def verify_inputs(manifest: dict) -> None:
    """Check that every recorded input still has its recorded digest."""
    for path, digest in manifest.get("inputs", {}).items():
        if not os.path.exists(path):
            raise MissingInput(f"recorded input {path} is missing")
        actual = file_digest(path)
        if actual != digest:
            raise DigestMismatch(f"input {path} changed since the recorded run")
