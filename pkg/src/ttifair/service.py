"""HTTP review service: annotation-review tasks, surveys, image bytes,
correction ingestion, and on-demand audit reports.

Persistence is one append-only line-delimited log holding corrections
and survey responses (discriminated by a ``type`` tag). Every write is
flushed and fsynced before it is acknowledged; replaying the log
reproduces the full service state, and replaying it twice changes
nothing.
"""

from __future__ import annotations

import json
import mimetypes
import os
import threading
import uuid
from pathlib import Path
from typing import Sequence

from fastapi import Depends, FastAPI, HTTPException, Query, Request, Response
from pydantic import BaseModel

from .config import EvalConfig
from .manifest import RunManifest, config_fingerprint, file_sha256, sha256_hex
from .pipeline import build_score_document, decide_from_document
from .records import (
    HUMAN_LAYER,
    MODEL_LAYER,
    UNLABELED,
    CorrectionEvent,
    ImageRecord,
    RecordError,
    correction_from_dict,
    parse_annotation,
    corrections_to_ndjson,
    filter_pool,
    normalize_timestamp,
    utc_now_iso,
)
from .decision import METRIC_KL, METRIC_TVD, render_report
from .scoring import CROWD_INCLUSION_ANSWERS, crowd_quality_score
from .seeding import stream

KIND_REVIEW = "annotation-review"
KIND_INCLUSION = "inclusion-survey"
KIND_QUALITY = "quality-survey"
TASK_KINDS = (KIND_REVIEW, KIND_INCLUSION, KIND_QUALITY)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".webp")


class CorrectionIn(BaseModel):
    reviewer_id: str
    image_id: str
    field: str
    new_value: str | float | int | None = None
    old_value: str | float | int | None = None
    timestamp: str | None = None
    event_id: str | None = None


class SurveyIn(BaseModel):
    respondent_id: str
    declared_value: str
    task_id: str
    declared_age: float | None = None
    declared_gender: str | None = None
    answer: str | None = None
    selected_count: int | None = None
    timestamp: str | None = None
    event_id: str | None = None


class ServiceState:
    """Owns the records, the event log, and the single-writer lock."""

    def __init__(
        self,
        cfg: EvalConfig,
        records: Sequence[ImageRecord],
        *,
        log_path: str | Path,
        image_root: str | Path | None = None,
        token: str | None = None,
        records_path: str | Path | None = None,
    ):
        self.cfg = cfg
        self.records = list(records)
        self.records_by_id = {r.image_id: r for r in self.records}
        self.log_path = Path(log_path)
        self.image_root = Path(image_root).resolve() if image_root else None
        self.token = token
        self.corrections: list[CorrectionEvent] = []
        self.surveys: list[dict] = []
        self.seen_event_ids: set[str] = set()
        self.write_lock = threading.Lock()
        self._records_hash = (
            file_sha256(records_path) if records_path else None
        )
        self._replay()

    def _replay(self) -> None:
        if not self.log_path.exists():
            return
        with open(self.log_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                entry = json.loads(line)
                kind = entry.get("type")
                if kind == "correction":
                    event = correction_from_dict({k: v for k, v in entry.items() if k != "type"})
                    self.corrections.append(event)
                    if event.event_id:
                        self.seen_event_ids.add(event.event_id)
                elif kind == "survey":
                    self.surveys.append(entry)
                    if entry.get("event_id"):
                        self.seen_event_ids.add(entry["event_id"])

    def append(self, entry: dict) -> None:
        """Durable append: the line hits disk before the caller responds."""
        with self.write_lock:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    # -- task assembly -------------------------------------------------

    def survey_sets(self) -> dict[tuple[str, str], list[list[str]]]:
        """Deterministic per-(value, query) image sets of size images_per_seed.

        All respondents of one attribute value see the same sets; a
        remainder smaller than a full set is dropped.
        """
        conditioned = [r for r in self.records if r.conditioned_value is not None]
        size = self.cfg.images_per_seed
        out: dict[tuple[str, str], list[list[str]]] = {}
        for value in self.cfg.attribute.values:
            for query in self.cfg.queries:
                ids = sorted(r.image_id for r in filter_pool(conditioned, query, value))
                if not ids:
                    continue
                rng = stream(self.cfg.master_seed, "survey-sets", value, query)
                shuffled = [ids[i] for i in rng.permutation(len(ids))]
                sets = [
                    shuffled[k : k + size]
                    for k in range(0, len(shuffled) - size + 1, size)
                ]
                if sets:
                    out[(value, query)] = sets
        return out

    def tasks(self, kind: str, value: str | None, query: str | None) -> list[dict]:
        out: list[dict] = []
        if kind == KIND_REVIEW:
            for r in self.records:
                if value is not None and r.conditioned_value != value:
                    continue
                if query is not None and r.query != query:
                    continue
                out.append(
                    {
                        "task_id": f"{KIND_REVIEW}:{r.image_id}",
                        "kind": KIND_REVIEW,
                        "image_set": [r.image_id],
                        "context": {"query": r.query, "conditioned_value": r.conditioned_value},
                        "current_labels": {
                            "race": r.race if r.race is not None else UNLABELED,
                            "age": r.age if r.age is not None else UNLABELED,
                            "gender": r.gender if r.gender is not None else UNLABELED,
                            "relevance": r.relevance if r.relevance is not None else UNLABELED,
                            "quality": r.quality if r.quality is not None else UNLABELED,
                            "caption": r.caption,
                        },
                    }
                )
        else:
            for (v, q), sets in self.survey_sets().items():
                if value is not None and v != value:
                    continue
                if query is not None and q != query:
                    continue
                for k, image_set in enumerate(sets):
                    out.append(
                        {
                            "task_id": f"{kind}:{v}:{q}:{k}",
                            "kind": kind,
                            "image_set": image_set,
                            "context": {"query": q, "conditioned_value": v},
                            "current_labels": None,
                        }
                    )
        out.sort(key=lambda t: t["task_id"])
        return out

    def find_survey_task(self, task_id: str) -> dict | None:
        parts = task_id.split(":")
        if len(parts) != 4 or parts[0] not in (KIND_INCLUSION, KIND_QUALITY):
            return None
        kind, value, query, k = parts
        if not k.isdigit():
            return None
        sets = self.survey_sets().get((value, query))
        if sets is None or int(k) >= len(sets):
            return None
        return {
            "task_id": task_id,
            "kind": kind,
            "value": value,
            "query": query,
            "image_set": sets[int(k)],
        }

    def effective_value(self, image_id: str, field: str):
        value = getattr(self.records_by_id[image_id], field)
        for e in self.corrections:
            if e.image_id == image_id and e.field == field:
                value = e.new_value
        return value

    # -- report --------------------------------------------------------

    def report_manifest(self) -> RunManifest:
        hashes: dict[str, str] = {}
        if self._records_hash:
            hashes["records"] = self._records_hash
        if self.corrections:
            hashes["corrections"] = sha256_hex(corrections_to_ndjson(self.corrections))
        return RunManifest(
            config_fingerprint=config_fingerprint(self.cfg),
            master_seed=self.cfg.master_seed,
            input_hashes=hashes,
        )

    def render_structured_report(self, layer: str, metric: str) -> str:
        corrections = self.corrections if layer != MODEL_LAYER else []
        doc = build_score_document(
            self.cfg,
            self.records,
            corrections,
            self.report_manifest(),
            layers=(MODEL_LAYER, HUMAN_LAYER),
        )
        report = decide_from_document(doc, self.cfg, layer=layer, metric=metric)
        return render_report(report, "structured")


def _validate_correction_value(state: ServiceState, field: str, raw):
    """Wire value -> annotation value; HTTP 422 on any domain violation."""
    try:
        value = parse_annotation(raw, field)
    except RecordError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    if value is None:
        return None
    if field == "race" and value not in state.cfg.attribute.values:
        raise HTTPException(
            status_code=422,
            detail=f"race {value!r} not in {list(state.cfg.attribute.values)}",
        )
    gender_spec = state.cfg.feature("gender")
    if field == "gender" and gender_spec and value not in gender_spec.categories:
        raise HTTPException(
            status_code=422,
            detail=f"gender {value!r} not in {list(gender_spec.categories)}",
        )
    return value


def create_app(
    cfg: EvalConfig,
    records: Sequence[ImageRecord],
    *,
    log_path: str | Path,
    image_root: str | Path | None = None,
    token: str | None = None,
    records_path: str | Path | None = None,
) -> FastAPI:
    state = ServiceState(
        cfg,
        records,
        log_path=log_path,
        image_root=image_root,
        token=token,
        records_path=records_path,
    )
    app = FastAPI(title="ttifair review service")
    app.state.audit = state

    def require_auth(request: Request) -> None:
        if state.token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {state.token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    auth = Depends(require_auth)

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/api/meta", dependencies=[auth])
    def meta() -> dict:
        gender_spec = cfg.feature("gender")
        age_spec = cfg.feature("age")
        return {
            "attribute": {"name": cfg.attribute.name, "values": list(cfg.attribute.values)},
            "queries": list(cfg.queries),
            "gender_categories": list(gender_spec.categories) if gender_spec else [],
            "age_range": list(age_spec.range) if age_spec and age_spec.range else None,
            "set_size": cfg.images_per_seed,
            "n_records": len(state.records),
        }

    @app.get("/api/tasks", dependencies=[auth])
    def get_tasks(
        kind: str = Query(KIND_REVIEW),
        value: str | None = Query(None),
        query: str | None = Query(None),
    ) -> list[dict]:
        if kind not in TASK_KINDS:
            raise HTTPException(status_code=400, detail=f"unknown task kind {kind!r}")
        if value is not None and value not in cfg.attribute.values:
            raise HTTPException(status_code=404, detail=f"unknown attribute value {value!r}")
        return state.tasks(kind, value, query)

    @app.post("/api/corrections", dependencies=[auth], status_code=201)
    def post_correction(body: CorrectionIn, response: Response) -> dict:
        record = state.records_by_id.get(body.image_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown image {body.image_id!r}")
        if body.field not in ("race", "age", "gender", "relevance", "quality"):
            raise HTTPException(status_code=422, detail=f"unknown field {body.field!r}")
        new_value = _validate_correction_value(state, body.field, body.new_value)
        event_id = body.event_id or str(uuid.uuid4())
        if event_id in state.seen_event_ids:
            response.status_code = 200
            return {"status": "duplicate", "event_id": event_id}
        if body.timestamp is not None:
            try:
                timestamp = normalize_timestamp(body.timestamp)
            except RecordError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
        else:
            timestamp = utc_now_iso()
        old_value = body.old_value
        if old_value is None:
            old_value = state.effective_value(body.image_id, body.field)
        else:
            old_value = _validate_correction_value(state, body.field, old_value)
        event = CorrectionEvent(
            reviewer_id=body.reviewer_id,
            image_id=body.image_id,
            field=body.field,
            old_value=old_value,
            new_value=new_value,
            timestamp=timestamp,
            event_id=event_id,
        )
        state.append({"type": "correction", **event.to_json_dict()})
        state.corrections.append(event)
        state.seen_event_ids.add(event_id)
        return {"status": "accepted", "event_id": event_id}

    @app.get("/api/corrections/export", dependencies=[auth])
    def export_corrections() -> Response:
        return Response(
            content=corrections_to_ndjson(state.corrections),
            media_type="application/x-ndjson",
        )

    @app.post("/api/surveys", dependencies=[auth], status_code=201)
    def post_survey(body: SurveyIn, response: Response) -> dict:
        task = state.find_survey_task(body.task_id)
        if task is None:
            raise HTTPException(status_code=422, detail=f"unknown survey task {body.task_id!r}")
        if body.declared_value != task["value"]:
            raise HTTPException(
                status_code=422,
                detail="survey sets are drawn from the respondent's declared value; "
                f"declared {body.declared_value!r} but task is for {task['value']!r}",
            )
        set_size = len(task["image_set"])
        if task["kind"] == KIND_INCLUSION:
            if body.answer not in CROWD_INCLUSION_ANSWERS:
                raise HTTPException(
                    status_code=422,
                    detail=f"answer must be one of {sorted(CROWD_INCLUSION_ANSWERS)}",
                )
        else:
            if body.selected_count is None or not (0 <= body.selected_count <= set_size):
                raise HTTPException(
                    status_code=422,
                    detail=f"selected_count must be within [0, {set_size}]",
                )
        event_id = body.event_id or str(uuid.uuid4())
        if event_id in state.seen_event_ids:
            response.status_code = 200
            return {"status": "duplicate", "event_id": event_id}
        entry = {
            "type": "survey",
            "event_id": event_id,
            "respondent_id": body.respondent_id,
            "declared_value": body.declared_value,
            "declared_age": body.declared_age,
            "declared_gender": body.declared_gender,
            "task_id": body.task_id,
            "kind": task["kind"],
            "value": task["value"],
            "query": task["query"],
            "answer": body.answer,
            "selected_count": body.selected_count,
            "set_size": set_size,
            "timestamp": body.timestamp or utc_now_iso(),
        }
        state.append(entry)
        state.surveys.append(entry)
        state.seen_event_ids.add(event_id)
        return {"status": "accepted", "event_id": event_id}

    @app.get("/api/surveys/aggregate", dependencies=[auth])
    def aggregate_surveys(
        kind: str | None = Query(None),
        value: str | None = Query(None),
        query: str | None = Query(None),
    ) -> dict:
        kinds = [kind] if kind else [KIND_INCLUSION, KIND_QUALITY]
        for k in kinds:
            if k not in (KIND_INCLUSION, KIND_QUALITY):
                raise HTTPException(status_code=400, detail=f"unknown survey kind {k!r}")
        out: dict[str, dict] = {}
        for k in kinds:
            cells: dict[str, dict[str, dict]] = {}
            for s in state.surveys:
                if s["kind"] != k:
                    continue
                if value is not None and s["value"] != value:
                    continue
                if query is not None and s["query"] != query:
                    continue
                if k == KIND_INCLUSION:
                    score = CROWD_INCLUSION_ANSWERS[s["answer"]]
                else:
                    score = crowd_quality_score(s["selected_count"], s["set_size"])
                cell = cells.setdefault(s["value"], {}).setdefault(
                    s["query"], {"total": 0.0, "n": 0}
                )
                cell["total"] += score
                cell["n"] += 1
            out[k] = {
                v: {
                    q: {"score": c["total"] / c["n"], "n": c["n"]}
                    for q, c in per_q.items()
                }
                for v, per_q in cells.items()
            }
        return out

    @app.get("/api/images/{image_id:path}", dependencies=[auth])
    def get_image(image_id: str) -> Response:
        if state.image_root is None:
            raise HTTPException(status_code=404, detail="no image root configured")
        if ".." in Path(image_id).parts or Path(image_id).is_absolute():
            raise HTTPException(status_code=403, detail="path escapes the image root")
        candidates = [image_id] + [image_id + ext for ext in IMAGE_EXTENSIONS]
        for name in candidates:
            path = (state.image_root / name).resolve()
            if not path.is_relative_to(state.image_root):
                raise HTTPException(status_code=403, detail="path escapes the image root")
            if path.is_file():
                media_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
                return Response(content=path.read_bytes(), media_type=media_type)
        raise HTTPException(status_code=404, detail=f"unknown image {image_id!r}")

    @app.get("/api/report", dependencies=[auth])
    def get_report(
        layer: str = Query("auto"),
        metric: str = Query(METRIC_KL),
    ) -> Response:
        if layer not in ("auto", MODEL_LAYER, HUMAN_LAYER):
            raise HTTPException(status_code=400, detail=f"unknown layer {layer!r}")
        if metric not in (METRIC_KL, METRIC_TVD):
            raise HTTPException(status_code=400, detail=f"unknown metric {metric!r}")
        try:
            rendered = state.render_structured_report(layer, metric)
        except ValueError as exc:
            raise HTTPException(status_code=409, detail=f"cannot score: {exc}") from exc
        return Response(content=rendered, media_type="application/json")

    return app
