"""ttifair: representativity fairness audit engine for text-to-image systems."""

from .config import (
    AttributeScheme,
    ConfigError,
    EvalConfig,
    FairDistribution,
    InclusionFeatureSpec,
    Thresholds,
    load_config,
    save_config,
    validate_config,
)
from .decision import AuditReport, DiversityScores, decide, render_report
from .manifest import TOOL_VERSION, RunManifest, config_fingerprint
from .metrics import (
    AgreementResult,
    Distribution,
    ParityResult,
    agreement,
    diversity_score_kl,
    diversity_score_tvd,
    kl_divergence,
    parity_check,
    pearson,
    spearman,
    tvd,
)
from .plan import PromptJob, build_plan, render_prompt
from .records import (
    CorrectionEvent,
    ImageRecord,
    distribution_of,
    filter_pool,
    merge_layers,
    parse_corrections,
    parse_records,
)
from .scoring import (
    Persona,
    ScoreTable,
    build_score_table,
    crowd_inclusion_score,
    crowd_quality_score,
    inclusion_score,
    nash,
    neutralize_caption,
    quality_score,
    relevance_from_confidence,
    relevance_score,
    rep_attr_score,
    sample_personas,
    score_age,
    score_gender,
)

__version__ = TOOL_VERSION

__all__ = [
    "AttributeScheme",
    "AgreementResult",
    "AuditReport",
    "ConfigError",
    "CorrectionEvent",
    "Distribution",
    "DiversityScores",
    "EvalConfig",
    "FairDistribution",
    "ImageRecord",
    "InclusionFeatureSpec",
    "ParityResult",
    "Persona",
    "PromptJob",
    "RunManifest",
    "ScoreTable",
    "Thresholds",
    "agreement",
    "build_plan",
    "build_score_table",
    "config_fingerprint",
    "crowd_inclusion_score",
    "crowd_quality_score",
    "decide",
    "distribution_of",
    "diversity_score_kl",
    "diversity_score_tvd",
    "filter_pool",
    "inclusion_score",
    "kl_divergence",
    "load_config",
    "merge_layers",
    "nash",
    "neutralize_caption",
    "parity_check",
    "parse_corrections",
    "parse_records",
    "pearson",
    "quality_score",
    "relevance_from_confidence",
    "relevance_score",
    "render_prompt",
    "render_report",
    "rep_attr_score",
    "sample_personas",
    "save_config",
    "score_age",
    "score_gender",
    "spearman",
    "tvd",
    "validate_config",
]
