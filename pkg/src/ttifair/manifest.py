"""Run provenance: content fingerprints embedded in every output document.

The embedded manifest carries only deterministic identity (config
fingerprint, input content hashes, seed, tool version), so identical
inputs yield byte-identical outputs. Wall-clock time and local paths go
to a sidecar manifest file instead.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .config import EvalConfig
from .records import utc_now_iso

TOOL_VERSION = "0.1.0"


def canonical_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def file_sha256(path: str | Path) -> str:
    return sha256_hex(Path(path).read_bytes())


def config_fingerprint(cfg: EvalConfig) -> str:
    return sha256_hex(canonical_json(cfg.to_dict()))


@dataclass(frozen=True)
class RunManifest:
    config_fingerprint: str
    master_seed: int
    tool_version: str = TOOL_VERSION
    input_hashes: dict[str, str] = field(default_factory=dict)
    input_paths: dict[str, str] = field(default_factory=dict)
    created_at: str = field(default_factory=utc_now_iso)

    def embedded(self) -> dict:
        """The deterministic identity embedded in output documents."""
        return {
            "config_fingerprint": self.config_fingerprint,
            "master_seed": self.master_seed,
            "tool_version": self.tool_version,
            "inputs": dict(self.input_hashes),
        }

    def full(self) -> dict:
        """Complete provenance for the sidecar manifest file."""
        d = self.embedded()
        d["input_paths"] = dict(self.input_paths)
        d["created_at"] = self.created_at
        return d


def build_manifest(
    cfg: EvalConfig, inputs: dict[str, str | Path], content_hashes: dict[str, str] | None = None
) -> RunManifest:
    """Manifest over the effective config and named input files.

    ``content_hashes`` overrides the on-disk hash for inputs whose
    canonical content is produced in memory (e.g. a correction log).
    """
    hashes: dict[str, str] = {}
    paths: dict[str, str] = {}
    for name, path in inputs.items():
        paths[name] = str(path)
        hashes[name] = file_sha256(path)
    if content_hashes:
        for name, digest in content_hashes.items():
            hashes[name] = digest
    return RunManifest(
        config_fingerprint=config_fingerprint(cfg),
        master_seed=cfg.master_seed,
        input_hashes=hashes,
        input_paths=paths,
    )
