"""Audit orchestration shared by the CLI and the review service.

Both front ends call into the same functions, so a report produced over
HTTP is byte-identical to one produced by the command line on the same
inputs.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Mapping, Sequence

from .config import EvalConfig
from .decision import METRIC_KL, AuditReport, DiversityScores, decide
from .manifest import RunManifest, canonical_json, config_fingerprint
from .metrics import Distribution, kl_divergence, tvd
from .records import (
    HUMAN_LAYER,
    MODEL_LAYER,
    CorrectionEvent,
    ImageRecord,
    NoLabeledRecordsError,
    distribution_of,
    merge_layers,
)
from .scoring import build_score_table, relevance_from_confidence, sample_personas, ScoreTable
from .seeding import stream

SCORES_KIND = "ttifair-scores"


def _kl_score(divergence: float, complement: bool) -> float:
    score = math.exp(-divergence)
    return 1.0 - score if complement else score


def apply_confidences(
    records: Sequence[ImageRecord], confidences: Mapping[str, float]
) -> list[ImageRecord]:
    """Set model-layer relevance from external classifier confidences.

    A supplied confidence replaces whatever relevance the record carried.
    """
    out = []
    for r in records:
        c = confidences.get(r.image_id)
        out.append(r if c is None else replace(r, relevance=relevance_from_confidence(c)))
    return out


def compute_diversity(
    records: Sequence[ImageRecord], cfg: EvalConfig
) -> DiversityScores | None:
    """Diversity of the unconditioned pool against the fair distribution.

    Returns None when no unconditioned record carries a label (the score
    document then simply lacks a diversity section).
    """
    fair = Distribution(
        labels=cfg.attribute.values,
        probs=cfg.fair_distribution.probs_for(cfg.attribute.values),
    )
    pool = [r for r in records if r.conditioned_value is None]

    def scores_of(rs: Sequence[ImageRecord]) -> dict | None:
        try:
            observed = distribution_of(rs, cfg.attribute)
        except NoLabeledRecordsError:
            return None
        kl = kl_divergence(observed, fair)
        t = tvd(observed, fair)
        return {
            "kl_divergence": kl,
            "tvd": t,
            "score_kl": _kl_score(kl, False),
            "score_tvd": 1.0 - t,
            "n_labeled": sum(1 for r in rs if r.race is not None),
        }

    overall = scores_of(pool)
    if overall is None:
        return None
    per_query = {}
    for query in cfg.queries:
        entry = scores_of([r for r in pool if r.query == query])
        if entry is not None:
            per_query[query] = entry
    return DiversityScores(
        score_kl=overall["score_kl"],
        score_tvd=overall["score_tvd"],
        kl_divergence=overall["kl_divergence"],
        tvd=overall["tvd"],
        per_query=per_query,
        n_labeled=overall["n_labeled"],
    )


def score_layer(records: Sequence[ImageRecord], cfg: EvalConfig) -> dict:
    """Diversity plus score table for one annotation layer."""
    personas = sample_personas(cfg, stream(cfg.master_seed, "personas"))
    diversity = compute_diversity(records, cfg)
    table = build_score_table(records, cfg, personas)
    return {
        "diversity": diversity.to_dict() if diversity is not None else None,
        "score_table": table.to_dict(),
        "n_records": len(records),
        "n_conditioned": sum(1 for r in records if r.conditioned_value is not None),
        "n_unconditioned": sum(1 for r in records if r.conditioned_value is None),
    }


def build_score_document(
    cfg: EvalConfig,
    model_records: Sequence[ImageRecord],
    corrections: Sequence[CorrectionEvent],
    manifest: RunManifest,
    *,
    layers: Sequence[str] = (MODEL_LAYER, HUMAN_LAYER),
) -> dict:
    """Score requested layers; the human layer exists only with corrections."""
    docs: dict[str, dict] = {}
    if MODEL_LAYER in layers:
        docs[MODEL_LAYER] = score_layer(model_records, cfg)
    if HUMAN_LAYER in layers and corrections:
        effective = merge_layers(model_records, corrections)
        docs[HUMAN_LAYER] = score_layer(effective, cfg)
    return {
        "kind": SCORES_KIND,
        "manifest": manifest.embedded(),
        "config_fingerprint": config_fingerprint(cfg),
        "layers": docs,
    }


def pick_layer(score_doc: Mapping, requested: str) -> str:
    """'auto' resolves to the human layer when present, else model."""
    layers = score_doc.get("layers", {})
    if requested == "auto":
        return HUMAN_LAYER if HUMAN_LAYER in layers else MODEL_LAYER
    if requested not in layers:
        raise ValueError(
            f"layer {requested!r} not present in score document (has: {sorted(layers)})"
        )
    return requested


def decide_from_document(
    score_doc: Mapping,
    cfg: EvalConfig,
    *,
    layer: str = "auto",
    metric: str = METRIC_KL,
    complement_kl: bool = False,
) -> AuditReport:
    """Gate one layer of a score document into a verdict report."""
    if score_doc.get("kind") != SCORES_KIND:
        raise ValueError("not a score document")
    chosen = pick_layer(score_doc, layer)
    layer_doc = score_doc["layers"][chosen]
    div_raw = layer_doc.get("diversity")
    if div_raw is None:
        raise ValueError(f"layer {chosen!r} has no diversity scores (no labeled unconditioned records)")

    per_query = div_raw.get("per_query", {})
    if complement_kl:
        per_query = {
            q: {**e, "score_kl": _kl_score(e["kl_divergence"], True)} for q, e in per_query.items()
        }
    diversity = DiversityScores(
        score_kl=_kl_score(div_raw["kl_divergence"], complement_kl),
        score_tvd=div_raw["score_tvd"],
        kl_divergence=div_raw["kl_divergence"],
        tvd=div_raw["tvd"],
        per_query=per_query,
        n_labeled=div_raw.get("n_labeled"),
    )
    table = ScoreTable.from_dict(layer_doc["score_table"])
    weights = None
    if cfg.fair_distribution.kind == "explicit":
        weights = dict(cfg.fair_distribution.weights or {})
    report = decide(
        diversity,
        table,
        cfg.thresholds,
        metric=metric,
        fair_weights=weights,
        config_fingerprint=score_doc.get("config_fingerprint", config_fingerprint(cfg)),
        layer=chosen,
    )
    manifest = score_doc.get("manifest")
    return report.with_manifest(dict(manifest)) if manifest is not None else report


def render_score_document(score_doc: Mapping) -> str:
    return canonical_json(score_doc)
