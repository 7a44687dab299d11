"""Inclusion, relevance, and quality scoring.

The inclusion-of-representativity-attributes score probes each
(attribute value, query) image pool with synthetic personas: every
persona draws a handful of images, each image gets the geometric mean of
its per-feature match scores, the persona keeps the best image, and the
pool's score is the mean of those per-persona maxima.

All randomness flows through named streams off the master seed; per-cell
streams are independent, so cells can be scored in any order (or in
parallel) without changing a single bit of the result.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .config import CATEGORICAL, NUMERIC_RANGE, EvalConfig, InclusionFeatureSpec
from .records import ImageRecord, NoLabeledRecordsError, filter_pool
from .seeding import stream

DEFAULT_GENDER_MARKERS = ("man", "woman", "boy", "girl", "male", "female")

CROWD_INCLUSION_ANSWERS = {"both": 1.0, "either": 0.5, "none": 0.0}


@dataclass(frozen=True)
class Persona:
    """A synthetic user probing whether some image in a set matches them."""

    age: float
    gender: str


def sample_personas(cfg: EvalConfig, rng: np.random.Generator) -> list[Persona]:
    """Draw ``cfg.persona_count`` personas from the configured distributions.

    Ages follow the age feature's range (uniform by default, optionally
    normal clipped into the range); genders are uniform over the gender
    feature's categories.
    """
    gender_spec = cfg.feature("gender")
    age_spec = cfg.feature("age")
    if gender_spec is None or gender_spec.kind != CATEGORICAL:
        raise ValueError("persona sampling needs a categorical 'gender' feature")
    if age_spec is None or age_spec.kind != NUMERIC_RANGE or age_spec.range is None:
        raise ValueError("persona sampling needs a numeric-range 'age' feature")
    lo, hi = age_spec.range
    n = cfg.persona_count
    dist = cfg.persona_age_distribution
    if dist.kind == "normal":
        ages = np.clip(rng.normal(dist.mean, dist.stddev, size=n), lo, hi)
    else:
        ages = rng.uniform(lo, hi, size=n)
    genders = rng.integers(0, len(gender_spec.categories), size=n)
    return [
        Persona(age=float(a), gender=gender_spec.categories[g])
        for a, g in zip(ages, genders)
    ]


def score_gender(persona: Persona, img: ImageRecord) -> int:
    """1 iff the image's gender label equals the persona's."""
    if img.gender is None:
        raise ValueError(f"image {img.image_id} has unlabeled gender")
    return 1 if img.gender == persona.gender else 0


def score_age(persona: Persona, img: ImageRecord, range_width: float) -> float:
    """1 - |persona age - image age| / range width, clamped into [0, 1]."""
    if img.age is None:
        raise ValueError(f"image {img.image_id} has unlabeled age")
    return min(1.0, max(0.0, 1.0 - abs(persona.age - img.age) / range_width))


def nash(scores: Sequence[float]) -> float:
    """Geometric mean of per-feature scores; any zero annihilates it."""
    vals = [float(s) for s in scores]
    if not vals:
        raise ValueError("nash aggregation needs at least one score")
    if any(v < 0.0 or v > 1.0 for v in vals):
        raise ValueError("nash scores must be within [0, 1]")
    if len(vals) == 1:
        return vals[0]
    product = math.prod(sorted(vals))  # fixed order: exactly permutation-invariant
    if product == 0.0:
        return 0.0
    return product ** (1.0 / len(vals))


def _feature_matrix(
    personas: Sequence[Persona],
    pool: Sequence[ImageRecord],
    features: Sequence[InclusionFeatureSpec],
) -> tuple[np.ndarray, np.ndarray]:
    """Nash score of every (persona, record) pair plus the fully-labeled mask."""
    n, m = len(personas), len(pool)
    labeled = np.ones(m, dtype=bool)
    product = np.ones((n, m), dtype=float)
    for spec in features:
        record_vals = [getattr(r, spec.name) for r in pool]
        present = np.array([v is not None for v in record_vals], dtype=bool)
        labeled &= present
        if spec.kind == CATEGORICAL:
            p_vals = np.array([getattr(p, spec.name) for p in personas], dtype=object)
            r_vals = np.array(
                [v if v is not None else "" for v in record_vals], dtype=object
            )
            product *= (p_vals[:, None] == r_vals[None, :]).astype(float)
        else:
            p_vals = np.array([getattr(p, spec.name) for p in personas], dtype=float)
            r_vals = np.array(
                [v if v is not None else np.nan for v in record_vals], dtype=float
            )
            with np.errstate(invalid="ignore"):
                s = 1.0 - np.abs(p_vals[:, None] - r_vals[None, :]) / spec.range_width
            product *= np.clip(np.nan_to_num(s, nan=0.0), 0.0, 1.0)
    return product ** (1.0 / len(features)), labeled


def rep_attr_score(
    pool: Sequence[ImageRecord],
    personas: Sequence[Persona],
    features: Sequence[InclusionFeatureSpec],
    sample_size: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo inclusion-of-representativity-attributes score of a pool.

    Each persona draws ``min(sample_size, len(pool))`` records without
    replacement (the whole pool, deterministically, when it is small
    enough), keeps the best per-record Nash score among its fully
    labeled draws, and the final score averages those maxima. Personas
    whose entire draw is unlabeled drop out of the average.
    """
    if not personas:
        raise ValueError("rep_attr_score needs at least one persona")
    if not features:
        raise ValueError("rep_attr_score needs at least one inclusion feature")
    m = len(pool)
    if m == 0:
        raise NoLabeledRecordsError("empty image pool")
    nash_matrix, labeled = _feature_matrix(personas, pool, features)
    if not labeled.any():
        raise NoLabeledRecordsError("no fully labeled records in pool")
    n = len(personas)
    if m <= sample_size:
        sampled = np.tile(np.arange(m), (n, 1))
    else:
        keys = rng.random((n, m))
        sampled = np.argpartition(keys, sample_size, axis=1)[:, :sample_size]
    drawn = nash_matrix[np.arange(n)[:, None], sampled]
    drawn = np.where(labeled[sampled], drawn, -np.inf)
    maxima = drawn.max(axis=1)
    valid = maxima > -np.inf
    if not valid.any():
        raise NoLabeledRecordsError("every persona sample was fully unlabeled")
    return float(maxima[valid].mean())


def relevance_from_confidence(c: float) -> float:
    """Map a classifier confidence to the {0, 0.5, 1} relevance scale."""
    if not (0.0 <= c <= 1.0):
        raise ValueError(f"confidence {c!r} outside [0, 1]")
    if c > 0.3:
        return 1.0
    if c < 0.2:
        return 0.0
    return 0.5


def neutralize_caption(text: str, markers: Sequence[str] = DEFAULT_GENDER_MARKERS) -> str:
    """Replace whole-word gender markers with 'person'.

    Residual markers (beards, clothing, ...) are a known leak this
    deliberately does not chase.
    """
    if not markers:
        return text
    pattern = re.compile(
        r"\b(?:" + "|".join(re.escape(m) for m in markers) + r")\b", re.IGNORECASE
    )
    return pattern.sub("person", text)


def relevance_score(pool: Sequence[ImageRecord]) -> float:
    """Mean of labeled relevance annotations in {0, 0.5, 1}."""
    vals = [r.relevance for r in pool if r.relevance is not None]
    if not vals:
        raise NoLabeledRecordsError("no labeled relevance in pool")
    return float(sum(vals) / len(vals))


def inclusion_score(rep: float, rel: float) -> float:
    """Midpoint of the representativity-attributes and relevance scores."""
    return (rep + rel) / 2.0


@dataclass(frozen=True)
class QualityScore:
    raw: float  # mean on the 1..3 annotation scale
    norm: float  # affine rescale to [0, 1]: (raw - 1) / 2


def quality_score(pool: Sequence[ImageRecord]) -> QualityScore:
    vals = [r.quality for r in pool if r.quality is not None]
    if not vals:
        raise NoLabeledRecordsError("no labeled quality in pool")
    raw = float(sum(vals) / len(vals))
    return QualityScore(raw=raw, norm=(raw - 1.0) / 2.0)


def crowd_inclusion_score(answer: str) -> float:
    """both -> 1, either -> 0.5, none -> 0."""
    try:
        return CROWD_INCLUSION_ANSWERS[answer]
    except KeyError:
        raise ValueError(f"unknown inclusion answer {answer!r}") from None


def crowd_quality_score(selected: int, set_size: int) -> float:
    """Ratio of images a respondent would actually use out of a set."""
    if set_size < 1:
        raise ValueError("set_size must be >= 1")
    if not (0 <= selected <= set_size):
        raise ValueError(f"selected {selected} outside [0, {set_size}]")
    return selected / set_size


@dataclass(frozen=True)
class CellScores:
    rep_attr: float | None
    relevance: float | None
    inclusion: float | None
    quality_raw: float | None
    quality_norm: float | None
    n_records: int

    def to_dict(self) -> dict:
        return {
            "rep_attr": self.rep_attr,
            "relevance": self.relevance,
            "inclusion": self.inclusion,
            "quality_raw": self.quality_raw,
            "quality_norm": self.quality_norm,
            "n_records": self.n_records,
        }


@dataclass(frozen=True)
class ScoreTable:
    """Per-(attribute value, query) scores plus per-value marginals."""

    values: tuple[str, ...]
    queries: tuple[str, ...]
    cells: dict[tuple[str, str], CellScores]
    inclusion_marginals: dict[str, float]
    quality_marginals: dict[str, float]

    def to_dict(self) -> dict:
        nested: dict[str, dict] = {}
        for (value, query), cell in self.cells.items():
            nested.setdefault(value, {})[query] = cell.to_dict()
        return {
            "values": list(self.values),
            "queries": list(self.queries),
            "cells": nested,
            "marginals": {
                "inclusion": dict(self.inclusion_marginals),
                "quality_norm": dict(self.quality_marginals),
            },
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScoreTable":
        cells = {}
        for value, per_query in d["cells"].items():
            for query, c in per_query.items():
                cells[(value, query)] = CellScores(
                    rep_attr=c["rep_attr"],
                    relevance=c["relevance"],
                    inclusion=c["inclusion"],
                    quality_raw=c["quality_raw"],
                    quality_norm=c["quality_norm"],
                    n_records=c["n_records"],
                )
        return cls(
            values=tuple(d["values"]),
            queries=tuple(d["queries"]),
            cells=cells,
            inclusion_marginals=dict(d["marginals"]["inclusion"]),
            quality_marginals=dict(d["marginals"]["quality_norm"]),
        )


def build_score_table(
    records: Sequence[ImageRecord],
    cfg: EvalConfig,
    personas: Sequence[Persona],
    *,
    master_seed: int | None = None,
) -> ScoreTable:
    """Score every covered (value, query) cell of the conditioned records.

    A cell with records but no labeled data at all is treated as absent;
    marginals average whatever cells carry each score kind.
    """
    seed = cfg.master_seed if master_seed is None else master_seed
    conditioned = [r for r in records if r.conditioned_value is not None]
    cells: dict[tuple[str, str], CellScores] = {}
    for value in cfg.attribute.values:
        for query in cfg.queries:
            pool = filter_pool(conditioned, query, value)
            if not pool:
                continue
            try:
                rep = rep_attr_score(
                    pool,
                    personas,
                    cfg.inclusion_features,
                    cfg.persona_sample_size,
                    stream(seed, "rep-attr", value, query),
                )
            except NoLabeledRecordsError:
                rep = None
            try:
                rel = relevance_score(pool)
            except NoLabeledRecordsError:
                rel = None
            inc = inclusion_score(rep, rel) if rep is not None and rel is not None else None
            try:
                q = quality_score(pool)
            except NoLabeledRecordsError:
                q = None
            cell = CellScores(
                rep_attr=rep,
                relevance=rel,
                inclusion=inc,
                quality_raw=q.raw if q else None,
                quality_norm=q.norm if q else None,
                n_records=len(pool),
            )
            if all(
                x is None
                for x in (cell.rep_attr, cell.relevance, cell.inclusion, cell.quality_raw)
            ):
                continue
            cells[(value, query)] = cell
    if not cells:
        raise ValueError("records cover no (value, query) cell")

    inclusion_marginals: dict[str, float] = {}
    quality_marginals: dict[str, float] = {}
    for value in cfg.attribute.values:
        incs = [c.inclusion for (v, _), c in cells.items() if v == value and c.inclusion is not None]
        quals = [
            c.quality_norm for (v, _), c in cells.items() if v == value and c.quality_norm is not None
        ]
        if incs:
            inclusion_marginals[value] = float(sum(incs) / len(incs))
        if quals:
            quality_marginals[value] = float(sum(quals) / len(quals))
    return ScoreTable(
        values=cfg.attribute.values,
        queries=cfg.queries,
        cells=cells,
        inclusion_marginals=inclusion_marginals,
        quality_marginals=quality_marginals,
    )
