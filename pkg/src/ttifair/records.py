"""Annotation record ingestion and the human-correction layer.

Records arrive as line-delimited JSON. The ``race`` field always carries
the configured sensitive attribute's label, whatever that attribute is
named. Any annotation may be unlabeled, written ``"-"`` on the wire and
held as ``None`` in memory; unlabeled values never enter a score or a
distribution.

Human review is an append-only event log over the model layer. Replaying
the log in file order reproduces the effective human layer, and both
layers stay recoverable for agreement analysis.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .config import AttributeScheme
from .metrics import Distribution

log = logging.getLogger(__name__)

UNLABELED = "-"
RELEVANCE_VALUES = (0.0, 0.5, 1.0)
QUALITY_VALUES = (1, 2, 3)
AGE_BOUNDS = (0.0, 120.0)
CORRECTABLE_FIELDS = ("race", "age", "gender", "relevance", "quality")

MODEL_LAYER = "model"
HUMAN_LAYER = "human"


class RecordError(ValueError):
    """A record or correction line violates the schema."""


class NoLabeledRecordsError(ValueError):
    """A pool has no labeled annotations to aggregate."""


@dataclass(frozen=True)
class ImageRecord:
    """One generated image with its layered annotations."""

    image_id: str
    job_id: str
    query: str
    conditioned_value: str | None
    seed: int
    race: str | None
    age: float | None
    gender: str | None
    relevance: float | None
    quality: int | None
    caption: str | None
    layer: str = MODEL_LAYER

    def to_json_dict(self) -> dict:
        def ann(v):
            return UNLABELED if v is None else v

        return {
            "image_id": self.image_id,
            "job_id": self.job_id,
            "query": self.query,
            "conditioned_value": self.conditioned_value,
            "seed": self.seed,
            "race": ann(self.race),
            "age": ann(self.age),
            "gender": ann(self.gender),
            "relevance": ann(self.relevance),
            "quality": ann(self.quality),
            "caption": ann(self.caption),
            "layer": self.layer,
        }


@dataclass(frozen=True)
class CorrectionEvent:
    """One reviewer correction; ``new_value`` None means 'mark unlabeled'."""

    reviewer_id: str
    image_id: str
    field: str
    old_value: str | float | int | None
    new_value: str | float | int | None
    timestamp: str
    event_id: str | None = None

    def to_json_dict(self) -> dict:
        d = {
            "reviewer_id": self.reviewer_id,
            "image_id": self.image_id,
            "field": self.field,
            "old_value": UNLABELED if self.old_value is None else self.old_value,
            "new_value": UNLABELED if self.new_value is None else self.new_value,
            "timestamp": self.timestamp,
        }
        if self.event_id is not None:
            d["event_id"] = self.event_id
        return d


def normalize_timestamp(value: str) -> str:
    """Parse any ISO-8601 instant and canonicalize it to UTC ``...Z`` form."""
    try:
        dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError as exc:
        raise RecordError(f"timestamp {value!r} is not ISO-8601") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds").replace("+00:00", "Z")


def parse_annotation(raw, field: str):
    """Wire value -> in-memory annotation; raises RecordError out of domain."""
    if raw is None or raw == UNLABELED:
        return None
    if field == "race" or field == "gender":
        if not isinstance(raw, str) or not raw:
            raise RecordError(f"{field}: expected a label string or '-'")
        return raw
    if field == "age":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise RecordError("age: expected a number or '-'")
        age = float(raw)
        if not (AGE_BOUNDS[0] <= age <= AGE_BOUNDS[1]):
            raise RecordError(f"age: {age} outside [{AGE_BOUNDS[0]:.0f}, {AGE_BOUNDS[1]:.0f}]")
        return age
    if field == "relevance":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)) or float(raw) not in RELEVANCE_VALUES:
            raise RecordError(f"relevance: {raw!r} not in {{0, 0.5, 1}}")
        return float(raw)
    if field == "quality":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)) or raw not in QUALITY_VALUES:
            raise RecordError(f"quality: {raw!r} not in {{1, 2, 3}}")
        return int(raw)
    raise RecordError(f"unknown annotation field {field!r}")


def record_from_dict(d: dict) -> ImageRecord:
    if not isinstance(d, dict):
        raise RecordError("record line must be a JSON object")
    for key in ("image_id", "query"):
        if not isinstance(d.get(key), str) or not d[key]:
            raise RecordError(f"{key}: required string field")
    seed = d.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise RecordError("seed: must be an integer")
    conditioned = d.get("conditioned_value")
    if conditioned is not None and not isinstance(conditioned, str):
        raise RecordError("conditioned_value: must be a string or null")
    caption = d.get("caption")
    if caption in (None, UNLABELED):
        caption = None
    elif not isinstance(caption, str):
        raise RecordError("caption: must be a string, '-' or null")
    layer = d.get("layer", MODEL_LAYER)
    if layer not in (MODEL_LAYER, HUMAN_LAYER):
        raise RecordError(f"layer: {layer!r} not in {{model, human}}")
    return ImageRecord(
        image_id=d["image_id"],
        job_id=str(d.get("job_id", "")),
        query=d["query"],
        conditioned_value=conditioned,
        seed=seed,
        race=parse_annotation(d.get("race"), "race"),
        age=parse_annotation(d.get("age"), "age"),
        gender=parse_annotation(d.get("gender"), "gender"),
        relevance=parse_annotation(d.get("relevance"), "relevance"),
        quality=parse_annotation(d.get("quality"), "quality"),
        caption=caption,
        layer=layer,
    )


def _parse_lines(path: str | Path, parse_one, error_sink: list[str] | None):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                try:
                    d = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise RecordError(f"invalid JSON: {exc}") from exc
                out.append(parse_one(d))
            except RecordError as exc:
                msg = f"{path}:{lineno}: {exc}"
                if error_sink is None:
                    raise RecordError(msg) from exc
                error_sink.append(msg)
    return out


def parse_records(path: str | Path, *, error_sink: list[str] | None = None) -> list[ImageRecord]:
    """Parse a line-delimited records file.

    With ``error_sink=None`` the first bad line raises, naming the line
    number; with a list, bad lines are rejected into the sink and parsing
    continues.
    """
    records = _parse_lines(path, record_from_dict, error_sink)
    seen: set[str] = set()
    for r in records:
        if r.image_id in seen:
            msg = f"{path}: duplicate image_id {r.image_id!r}"
            if error_sink is None:
                raise RecordError(msg)
            error_sink.append(msg)
        seen.add(r.image_id)
    return records


def correction_from_dict(d: dict) -> CorrectionEvent:
    if not isinstance(d, dict):
        raise RecordError("correction line must be a JSON object")
    for key in ("reviewer_id", "image_id", "field", "timestamp"):
        if not isinstance(d.get(key), str) or not d[key]:
            raise RecordError(f"{key}: required string field")
    field = d["field"]
    if field not in CORRECTABLE_FIELDS:
        raise RecordError(f"field: {field!r} not in {CORRECTABLE_FIELDS}")
    event_id = d.get("event_id")
    if event_id is not None and not isinstance(event_id, str):
        raise RecordError("event_id: must be a string")
    return CorrectionEvent(
        reviewer_id=d["reviewer_id"],
        image_id=d["image_id"],
        field=field,
        old_value=parse_annotation(d.get("old_value"), field),
        new_value=parse_annotation(d.get("new_value"), field),
        timestamp=normalize_timestamp(d["timestamp"]),
        event_id=event_id,
    )


def parse_corrections(
    path: str | Path, *, error_sink: list[str] | None = None
) -> list[CorrectionEvent]:
    return _parse_lines(path, correction_from_dict, error_sink)


def corrections_to_ndjson(events: Iterable[CorrectionEvent]) -> str:
    """Canonical serialization; also the hashing and export format."""
    return "".join(
        json.dumps(e.to_json_dict(), ensure_ascii=False, sort_keys=True) + "\n" for e in events
    )


def write_corrections(events: Iterable[CorrectionEvent], path: str | Path) -> None:
    Path(path).write_text(corrections_to_ndjson(events), encoding="utf-8")


def write_records(records: Iterable[ImageRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def merge_layers(
    records: Sequence[ImageRecord],
    corrections: Sequence[CorrectionEvent],
    *,
    error_sink: list[str] | None = None,
) -> list[ImageRecord]:
    """Apply the correction log over the model layer.

    Per field the last correction in log order wins; corrected records
    are marked as human layer. Corrections referencing unknown image ids
    are reported and skipped. Replay is idempotent.
    """
    by_id = {r.image_id: i for i, r in enumerate(records)}
    merged = list(records)
    for event in corrections:
        idx = by_id.get(event.image_id)
        if idx is None:
            msg = f"correction for unknown image_id {event.image_id!r} skipped"
            log.warning(msg)
            if error_sink is not None:
                error_sink.append(msg)
            continue
        merged[idx] = replace(
            merged[idx], **{event.field: event.new_value}, layer=HUMAN_LAYER
        )
    return merged


def distribution_of(records: Sequence[ImageRecord], attribute: AttributeScheme) -> Distribution:
    """Observed distribution of the sensitive attribute over labeled records.

    Unlabeled records are excluded from numerator and denominator; labels
    outside the scheme are a data error.
    """
    counts = {v: 0 for v in attribute.values}
    unknown: set[str] = set()
    for r in records:
        if r.race is None:
            continue
        if r.race in counts:
            counts[r.race] += 1
        else:
            unknown.add(r.race)
    if unknown:
        raise ValueError(
            f"labels not in attribute scheme {attribute.name!r}: {sorted(unknown)}"
        )
    total = sum(counts.values())
    if total == 0:
        raise NoLabeledRecordsError("no labeled records to build a distribution from")
    return Distribution(
        labels=attribute.values,
        probs=tuple(counts[v] / total for v in attribute.values),
    )


def filter_pool(
    records: Sequence[ImageRecord], query: str, conditioned_value: str | None = None
) -> list[ImageRecord]:
    """Records matching (query, conditioned_value) exactly; None matches None."""
    return [
        r for r in records if r.query == query and r.conditioned_value == conditioned_value
    ]
