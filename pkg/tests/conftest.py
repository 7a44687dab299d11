"""Shared fixtures: paper-scale audit config and synthetic record sets."""

from __future__ import annotations

import numpy as np
import pytest

from ttifair.config import EvalConfig, config_from_dict
from ttifair.records import ImageRecord

QUERIES = ("doctor", "cashier", "baker", "secretary", "software developer", "lawyer")
RACES = ("Asian", "Black", "Caucasian", "Indian", "Latino", "Middle Eastern")
GENDERS = ("woman", "man")

# Realized unconditioned race mix for the biased fixture; heavy enough
# that exp(-KL) lands well below the 0.70 diversity threshold.
BIASED_RACE_WEIGHTS = (0.05, 0.08, 0.60, 0.05, 0.10, 0.12)


def paper_config_dict(**overrides) -> dict:
    d = {
        "queries": list(QUERIES),
        "attribute": {"name": "race", "values": list(RACES)},
        "features": [
            {"name": "gender", "kind": "categorical-match", "categories": list(GENDERS)},
            {"name": "age", "kind": "numeric-range", "range": [15, 65]},
        ],
        "fair_distribution": {"kind": "uniform"},
        "thresholds": {"diversity_min": 0.70, "inclusion_min": 0.55, "parity_epsilon": 0.15},
        "prompt_templates": ["A {value} {query}.", "A photo face of a {value} {query}."],
        "seeds": {"diversity": 19, "conditioned": 3},
        "images_per_seed": 5,
        "personas": {"count": 5000, "sample_size": 5},
        "master_seed": 20240001,
    }
    d.update(overrides)
    return d


@pytest.fixture
def paper_config() -> EvalConfig:
    return config_from_dict(paper_config_dict())


def make_unconditioned_records(
    rng: np.random.Generator,
    *,
    race_weights=BIASED_RACE_WEIGHTS,
    queries=QUERIES,
    seeds_per_query: int = 19,
    images_per_seed: int = 5,
    unlabeled: int = 38,
) -> list[ImageRecord]:
    """Diversity pool: queries x seeds x images, with some '-' race labels."""
    records = []
    total = len(queries) * seeds_per_query * images_per_seed
    unlabeled_at = set(rng.choice(total, size=min(unlabeled, total), replace=False).tolist())
    i = 0
    for qi, query in enumerate(queries):
        for si in range(seeds_per_query):
            seed = 1000 * qi + si
            for k in range(images_per_seed):
                race = None if i in unlabeled_at else str(rng.choice(RACES, p=race_weights))
                records.append(
                    ImageRecord(
                        image_id=f"d-{qi:02d}-{si:02d}-{k}",
                        job_id=f"job-d-{qi:02d}-{si:02d}",
                        query=query,
                        conditioned_value=None,
                        seed=seed,
                        race=race,
                        age=float(rng.integers(18, 70)),
                        gender=str(rng.choice(GENDERS)),
                        relevance=float(rng.choice([0.0, 0.5, 1.0], p=[0.1, 0.2, 0.7])),
                        quality=int(rng.choice([1, 2, 3], p=[0.1, 0.3, 0.6])),
                        caption=None,
                    )
                )
                i += 1
    return records


def make_conditioned_records(
    rng: np.random.Generator,
    *,
    values=RACES,
    queries=QUERIES,
    seeds_per_cell: int = 3,
    images_per_seed: int = 5,
) -> list[ImageRecord]:
    """Inclusion pool: values x queries x seeds x images, fully labeled."""
    records = []
    for ai, value in enumerate(values):
        for qi, query in enumerate(queries):
            for si in range(seeds_per_cell):
                seed = 100 * si + 1
                for k in range(images_per_seed):
                    records.append(
                        ImageRecord(
                            image_id=f"c-{ai}-{qi:02d}-{si}-{k}",
                            job_id=f"job-c-{ai}-{qi:02d}-{si}",
                            query=query,
                            conditioned_value=value,
                            seed=seed,
                            race=value,
                            age=float(rng.integers(18, 66)),
                            gender=str(rng.choice(GENDERS)),
                            relevance=float(rng.choice([0.0, 0.5, 1.0], p=[0.05, 0.15, 0.8])),
                            quality=int(rng.choice([1, 2, 3], p=[0.05, 0.25, 0.7])),
                            caption="a person at work" if k == 0 else None,
                        )
                    )
    return records


@pytest.fixture
def fixture_1110(paper_config) -> list[ImageRecord]:
    """570 unconditioned + 540 conditioned synthetic records."""
    rng = np.random.default_rng(424242)
    return make_unconditioned_records(rng) + make_conditioned_records(rng)


@pytest.fixture
def records_540() -> list[ImageRecord]:
    rng = np.random.default_rng(77)
    return make_conditioned_records(rng)
