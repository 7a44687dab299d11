"""Three-stage bias verdict: diversity gate, per-value inclusion gate,
then statistical parity of inclusion and quality.

Diversity is a necessary condition, so a failed first gate already fixes
the verdict; later stages are still computed but marked informational.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping

from .config import Thresholds
from .metrics import parity_check
from .scoring import ScoreTable

VERDICT_FAIR = "representativity-fair"
VERDICT_BIAS = "representativity-bias"

METRIC_KL = "kl"
METRIC_TVD = "tvd"


def fmt_score(x: float) -> str:
    """Two decimals when exact at that precision, full precision otherwise."""
    if abs(x - round(x, 2)) < 1e-12:
        return f"{x:.2f}"
    return format(x, "g")


@dataclass(frozen=True)
class DiversityScores:
    """Both diversity readings of one generated population."""

    score_kl: float
    score_tvd: float
    kl_divergence: float | None = None
    tvd: float | None = None
    per_query: dict[str, dict] | None = None
    n_labeled: int | None = None

    def score(self, metric: str) -> float:
        if metric == METRIC_KL:
            return self.score_kl
        if metric == METRIC_TVD:
            return self.score_tvd
        raise ValueError(f"unknown diversity metric {metric!r}")

    def to_dict(self) -> dict:
        d: dict = {"score_kl": self.score_kl, "score_tvd": self.score_tvd}
        if self.kl_divergence is not None:
            d["kl_divergence"] = self.kl_divergence
        if self.tvd is not None:
            d["tvd"] = self.tvd
        if self.per_query is not None:
            d["per_query"] = self.per_query
        if self.n_labeled is not None:
            d["n_labeled"] = self.n_labeled
        return d


@dataclass(frozen=True)
class AuditReport:
    """Full verdict with per-stage detail and provenance."""

    verdict: str
    reasons: tuple[str, ...]
    diversity: dict
    inclusion_gate: dict
    inclusion_parity: dict
    quality_parity: dict
    layer: str
    config_fingerprint: str
    manifest: dict | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == VERDICT_FAIR

    def with_manifest(self, manifest: dict) -> "AuditReport":
        return replace(self, manifest=manifest)

    def to_dict(self) -> dict:
        d = {
            "kind": "ttifair-report",
            "verdict": self.verdict,
            "reasons": list(self.reasons),
            "diversity": self.diversity,
            "inclusion_gate": self.inclusion_gate,
            "inclusion_parity": self.inclusion_parity,
            "quality_parity": self.quality_parity,
            "layer": self.layer,
            "config_fingerprint": self.config_fingerprint,
        }
        if self.manifest is not None:
            d["manifest"] = self.manifest
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "AuditReport":
        return cls(
            verdict=d["verdict"],
            reasons=tuple(d["reasons"]),
            diversity=dict(d["diversity"]),
            inclusion_gate=dict(d["inclusion_gate"]),
            inclusion_parity=dict(d["inclusion_parity"]),
            quality_parity=dict(d["quality_parity"]),
            layer=d["layer"],
            config_fingerprint=d["config_fingerprint"],
            manifest=dict(d["manifest"]) if d.get("manifest") is not None else None,
        )


def decide(
    diversity: DiversityScores,
    score_table: ScoreTable,
    thresholds: Thresholds,
    *,
    metric: str = METRIC_KL,
    fair_weights: Mapping[str, float] | None = None,
    config_fingerprint: str = "",
    layer: str = "model",
) -> AuditReport:
    """Run the three gates over one layer's scores.

    Gate semantics: diversity passes at ``score >= diversity_min``; the
    per-value inclusion gate is strict (``score > inclusion_min``);
    parity passes at ``deviation <= epsilon``. Raises if any configured
    attribute value lacks a marginal.
    """
    div_score = diversity.score(metric)
    div_passed = div_score >= thresholds.diversity_min
    diversity_section = diversity.to_dict()
    diversity_section.update(
        {
            "metric_used": metric,
            "score": div_score,
            "threshold": thresholds.diversity_min,
            "passed": div_passed,
        }
    )

    values = score_table.values
    missing = [v for v in values if v not in score_table.inclusion_marginals]
    if missing:
        raise ValueError(f"missing inclusion marginals for configured values: {missing}")
    missing_q = [v for v in values if v not in score_table.quality_marginals]
    if missing_q:
        raise ValueError(f"missing quality marginals for configured values: {missing_q}")

    inm = {v: score_table.inclusion_marginals[v] for v in values}
    per_value = {
        v: {"score": s, "passed": s > thresholds.inclusion_min} for v, s in inm.items()
    }
    gate_passed = all(entry["passed"] for entry in per_value.values())
    inclusion_gate = {
        "per_value": per_value,
        "threshold": thresholds.inclusion_min,
        "passed": gate_passed,
        "informational": not div_passed,
    }

    qnm = {v: score_table.quality_marginals[v] for v in values}
    parity_informational = not (div_passed and gate_passed)
    inclusion_parity = parity_check(inm, thresholds.parity_epsilon, fair_weights).to_dict()
    quality_parity = parity_check(qnm, thresholds.parity_epsilon, fair_weights).to_dict()
    inclusion_parity["informational"] = parity_informational
    quality_parity["informational"] = parity_informational

    reasons: list[str] = []
    if not div_passed:
        reasons.append(
            f"diversity gate: FAIL ({fmt_score(div_score)} < {fmt_score(thresholds.diversity_min)})"
        )
    gate_note = " [informational]" if inclusion_gate["informational"] else ""
    for v in values:
        if not per_value[v]["passed"]:
            reasons.append(
                f"inclusion gate: FAIL for {v} ({fmt_score(per_value[v]['score'])} <= "
                f"{fmt_score(thresholds.inclusion_min)}){gate_note}"
            )
    parity_note = " [informational]" if parity_informational else ""
    for section, name in ((inclusion_parity, "inclusion parity"), (quality_parity, "quality parity")):
        for v in section["failing_values"]:
            reasons.append(
                f"{name}: FAIL for {v} (deviation {fmt_score(section['deviations'][v])} > "
                f"{fmt_score(thresholds.parity_epsilon)}){parity_note}"
            )

    all_passed = (
        div_passed and gate_passed and inclusion_parity["passed"] and quality_parity["passed"]
    )
    return AuditReport(
        verdict=VERDICT_FAIR if all_passed else VERDICT_BIAS,
        reasons=tuple(reasons),
        diversity=diversity_section,
        inclusion_gate=inclusion_gate,
        inclusion_parity=inclusion_parity,
        quality_parity=quality_parity,
        layer=layer,
        config_fingerprint=config_fingerprint,
    )


def render_report(report: AuditReport, format: str = "text") -> str:
    """Human-readable text or the lossless structured document."""
    if format == "structured":
        return json.dumps(report.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n"
    if format != "text":
        raise ValueError(f"unknown report format {format!r}")

    lines = ["representativity audit report", f"verdict: {report.verdict}", f"layer: {report.layer}"]
    if report.config_fingerprint:
        lines.append(f"config: {report.config_fingerprint}")
    lines.append("")

    div = report.diversity
    word = "PASS" if div["passed"] else "FAIL"
    rel = ">=" if div["passed"] else "<"
    lines.append(
        f"diversity gate: {word} ({fmt_score(div['score'])} {rel} {fmt_score(div['threshold'])})"
    )
    lines.append(
        f"  metric: {div['metric_used']} | score_kl={fmt_score(div['score_kl'])} "
        f"score_tvd={fmt_score(div['score_tvd'])}"
    )

    gate = report.inclusion_gate
    note = " [informational]" if gate["informational"] else ""
    word = "PASS" if gate["passed"] else "FAIL"
    lines.append(f"inclusion gate{note}: {word} (threshold {fmt_score(gate['threshold'])})")
    for v, entry in gate["per_value"].items():
        lines.append(
            f"  {v}: {fmt_score(entry['score'])} {'PASS' if entry['passed'] else 'FAIL'}"
        )

    for name, section in (
        ("inclusion parity", report.inclusion_parity),
        ("quality parity", report.quality_parity),
    ):
        note = " [informational]" if section["informational"] else ""
        word = "PASS" if section["passed"] else "FAIL"
        lines.append(f"{name}{note}: {word} (epsilon {fmt_score(section['epsilon'])})")
        lines.append(f"  expectation: {fmt_score(section['expectation'])}")
        for v, dev in section["deviations"].items():
            flag = "FAIL" if v in section["failing_values"] else "ok"
            lines.append(f"  {v}: score {fmt_score(section['per_value_score'][v])}, deviation {fmt_score(dev)} {flag}")

    if report.reasons:
        lines.append("")
        lines.append("reasons:")
        for r in report.reasons:
            lines.append(f"  - {r}")
    return "\n".join(lines) + "\n"
