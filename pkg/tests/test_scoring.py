import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ttifair.config import config_from_dict
from ttifair.records import ImageRecord, NoLabeledRecordsError
from ttifair.scoring import (
    Persona,
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
from ttifair.seeding import stream

from conftest import GENDERS, make_conditioned_records, paper_config_dict


def _img(image_id="i1", age=30.0, gender="woman", **kw) -> ImageRecord:
    base = dict(
        image_id=image_id,
        job_id="j",
        query="baker",
        conditioned_value="Asian",
        seed=1,
        race="Asian",
        age=age,
        gender=gender,
        relevance=1.0,
        quality=3,
        caption=None,
    )
    base.update(kw)
    return ImageRecord(**base)


def exhaustive_rep_score(pool, age_range=(15, 65)) -> float:
    """Independent oracle: every integer age x gender against the whole pool."""
    lo, hi = age_range
    width = hi - lo
    total, n = 0.0, 0
    for age in range(int(lo), int(hi) + 1):
        for gender in GENDERS:
            best = 0.0
            for r in pool:
                g = 1.0 if r.gender == gender else 0.0
                a = max(0.0, min(1.0, 1.0 - abs(age - r.age) / width))
                best = max(best, math.sqrt(g * a))
            total += best
            n += 1
    return total / n


# -- feature scores ------------------------------------------------------------


def test_score_gender_match():
    p = Persona(age=30, gender="woman")
    assert score_gender(p, _img(gender="woman")) == 1
    assert score_gender(p, _img(gender="man")) == 0


def test_score_gender_unlabeled_raises():
    with pytest.raises(ValueError, match="unlabeled"):
        score_gender(Persona(age=30, gender="man"), _img(gender=None))


def test_score_age_values():
    assert score_age(Persona(30, "woman"), _img(age=30.0), 50) == 1.0
    assert score_age(Persona(30, "woman"), _img(age=40.0), 50) == pytest.approx(0.8)
    assert score_age(Persona(15, "woman"), _img(age=70.0), 50) == 0.0  # clamped


def test_score_age_symmetric_and_decreasing():
    width = 50
    for d in (0, 5, 10, 20, 40):
        a = score_age(Persona(40 - d, "woman"), _img(age=40.0), width)
        b = score_age(Persona(40 + d, "woman"), _img(age=40.0), width)
        assert a == b
    deltas = [score_age(Persona(40, "woman"), _img(age=40.0 + d), width) for d in (0, 5, 10, 30)]
    assert deltas == sorted(deltas, reverse=True)


# -- nash ------------------------------------------------------------------------


def test_nash_examples():
    assert nash([1.0, 0.64]) == pytest.approx(0.8, abs=1e-12)
    assert nash([0.7, 0.0, 1.0]) == 0.0
    assert nash([0.37]) == 0.37


def test_nash_errors():
    with pytest.raises(ValueError):
        nash([])
    with pytest.raises(ValueError):
        nash([1.2])


@settings(max_examples=250, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8))
def test_nash_am_gm_and_permutation(vals):
    g = nash(vals)
    assert 0.0 <= g <= 1.0 + 1e-15
    assert g <= sum(vals) / len(vals) + 1e-12
    assert nash(list(reversed(vals))) == g
    if 0.0 in vals:
        assert g == 0.0
    if len(vals) == 1:
        assert g == vals[0]


def test_nash_am_gm_exact_on_1000_random_vectors():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        vals = rng.uniform(0.0, 1.0, size=int(rng.integers(1, 7))).tolist()
        g = nash(vals)
        assert g <= sum(vals) / len(vals)
        assert nash(vals + [0.0]) == 0.0
        assert nash([vals[0]]) == vals[0]


# -- personas ----------------------------------------------------------------------


def test_sample_personas_count_and_domains(paper_config):
    personas = sample_personas(paper_config, stream(paper_config.master_seed, "personas"))
    assert len(personas) == 5000
    assert all(15 <= p.age <= 65 for p in personas)
    assert all(p.gender in GENDERS for p in personas)
    ratio = sum(1 for p in personas if p.gender == "woman") / len(personas)
    assert ratio == pytest.approx(0.5, abs=0.02)


def test_sample_personas_single(paper_config):
    cfg = config_from_dict(paper_config_dict(personas={"count": 1, "sample_size": 5}))
    assert len(sample_personas(cfg, stream(0, "personas"))) == 1


def test_sample_personas_deterministic(paper_config):
    a = sample_personas(paper_config, stream(paper_config.master_seed, "personas"))
    b = sample_personas(paper_config, stream(paper_config.master_seed, "personas"))
    assert a == b


def test_sample_personas_normal_age():
    cfg = config_from_dict(
        paper_config_dict(
            personas={
                "count": 4000,
                "sample_size": 5,
                "age_distribution": {"kind": "normal", "mean": 32, "stddev": 8},
            }
        )
    )
    personas = sample_personas(cfg, stream(1, "personas"))
    ages = np.array([p.age for p in personas])
    assert ages.min() >= 15 and ages.max() <= 65
    assert abs(ages.mean() - 32) < 1.0


def test_sample_personas_requires_features():
    from dataclasses import replace

    cfg = config_from_dict(paper_config_dict())
    gender_only = replace(cfg, inclusion_features=cfg.inclusion_features[:1])
    with pytest.raises(ValueError, match="age"):
        sample_personas(gender_only, stream(0, "personas"))
    age_only = replace(cfg, inclusion_features=cfg.inclusion_features[1:])
    with pytest.raises(ValueError, match="gender"):
        sample_personas(age_only, stream(0, "personas"))


# -- rep_attr_score -----------------------------------------------------------------


def test_rep_attr_perfect_pool(paper_config):
    # every image exactly matches every persona: single gender, identical ages
    personas = [Persona(age=30.0, gender="woman")] * 100
    pool = [_img(image_id=f"i{k}", age=30.0, gender="woman") for k in range(3)]
    score = rep_attr_score(pool, personas, paper_config.inclusion_features, 5, stream(5, "cell"))
    assert score == 1.0


def test_rep_attr_single_mismatched_gender(paper_config):
    personas = [Persona(age=30, gender="woman")] * 50
    pool = [_img(gender="man", age=30.0)]
    score = rep_attr_score(pool, personas, paper_config.inclusion_features, 5, stream(5, "c"))
    assert score == 0.0


def test_rep_attr_within_002_of_exhaustive_oracle(paper_config):
    pool = [
        _img("p1", age=25.0, gender="woman"),
        _img("p2", age=32.0, gender="man"),
        _img("p3", age=47.0, gender="woman"),
        _img("p4", age=58.0, gender="man"),
        _img("p5", age=19.0, gender="woman"),
    ]
    personas = sample_personas(paper_config, stream(paper_config.master_seed, "personas"))
    mc = rep_attr_score(
        pool, personas, paper_config.inclusion_features, paper_config.persona_sample_size,
        stream(paper_config.master_seed, "cell"),
    )
    oracle = exhaustive_rep_score(pool)
    assert mc == pytest.approx(oracle, abs=0.02)
    again = rep_attr_score(
        pool, personas, paper_config.inclusion_features, paper_config.persona_sample_size,
        stream(paper_config.master_seed, "cell"),
    )
    assert again == mc


def test_rep_attr_unlabeled_records_skipped_not_zeroed(paper_config):
    personas = sample_personas(paper_config, stream(3, "personas"))
    good = _img("g", age=30.0, gender="woman")
    partial = _img("u", age=None, gender="woman")
    with_unlabeled = rep_attr_score(
        [good, partial], personas, paper_config.inclusion_features, 5, stream(3, "c")
    )
    alone = rep_attr_score([good], personas, paper_config.inclusion_features, 5, stream(3, "c"))
    assert with_unlabeled == alone  # pool <= sample size: skip, never score 0


def test_rep_attr_pool_with_no_fully_labeled_rejected(paper_config):
    personas = sample_personas(paper_config, stream(3, "personas"))
    with pytest.raises(NoLabeledRecordsError):
        rep_attr_score(
            [_img(age=None)], personas, paper_config.inclusion_features, 5, stream(3, "c")
        )


def test_rep_attr_adding_image_never_decreases_with_full_pool_use(paper_config):
    # with pool <= sample size every persona sees the whole pool, so any
    # added image can only raise the per-persona maximum
    rng = np.random.default_rng(17)
    personas = sample_personas(paper_config, stream(9, "personas"))[:500]
    features = paper_config.inclusion_features
    for trial in range(20):
        pool = [
            _img(f"t{trial}-{k}", age=float(rng.integers(15, 66)), gender=str(rng.choice(GENDERS)))
            for k in range(int(rng.integers(1, 4)))
        ]
        extra = _img(f"t{trial}-x", age=float(rng.integers(15, 66)), gender=str(rng.choice(GENDERS)))
        base = rep_attr_score(pool, personas, features, 5, stream(9, "c"))
        grown = rep_attr_score(pool + [extra], personas, features, 5, stream(9, "c"))
        assert grown >= base - 1e-12


def test_rep_attr_deterministic_with_sampling(paper_config):
    rng = np.random.default_rng(23)
    pool = [
        _img(f"s{k}", age=float(rng.integers(15, 66)), gender=str(rng.choice(GENDERS)))
        for k in range(15)
    ]
    personas = sample_personas(paper_config, stream(paper_config.master_seed, "personas"))
    kwargs = dict()
    a = rep_attr_score(pool, personas, paper_config.inclusion_features, 5, stream(1, "cell", "x"))
    b = rep_attr_score(pool, personas, paper_config.inclusion_features, 5, stream(1, "cell", "x"))
    assert a == b


# -- relevance / caption / quality ---------------------------------------------------


def test_relevance_from_confidence_mapping():
    assert relevance_from_confidence(0.35) == 1.0
    assert relevance_from_confidence(0.10) == 0.0
    assert relevance_from_confidence(0.25) == 0.5
    # boundaries are inclusive to the middle band
    assert relevance_from_confidence(0.3) == 0.5
    assert relevance_from_confidence(0.2) == 0.5
    with pytest.raises(ValueError):
        relevance_from_confidence(1.5)


def test_neutralize_caption():
    assert (
        neutralize_caption("a woman in a chef's uniform stands behind a row of donuts.")
        == "a person in a chef's uniform stands behind a row of donuts."
    )
    assert (
        neutralize_caption("a man wearing a chef's apron stands in a kitchen")
        == "a person wearing a chef's apron stands in a kitchen"
    )
    assert neutralize_caption("a mantle on a wall") == "a mantle on a wall"
    assert neutralize_caption("A Woman and a BOY") == "A person and a person"
    assert neutralize_caption("the female pilot") == "the person pilot"


def test_relevance_score_mean():
    pool = [_img(f"i{k}", relevance=v) for k, v in enumerate([1.0, 1.0, 0.5, 0.5, 0.0])]
    assert relevance_score(pool) == pytest.approx(0.6)
    assert relevance_score([_img(relevance=1.0)]) == 1.0
    assert relevance_score([_img(relevance=0.0)]) == 0.0
    with pytest.raises(NoLabeledRecordsError):
        relevance_score([_img(relevance=None)])


def test_inclusion_score_midpoint():
    assert inclusion_score(0.6, 0.8) == pytest.approx(0.7)
    assert inclusion_score(0.0, 0.0) == 0.0
    assert inclusion_score(1.0, 0.0) == 0.5
    assert inclusion_score(0.3, 0.9) == inclusion_score(0.9, 0.3)


def test_quality_score_scale():
    assert quality_score([_img(quality=3), _img("b", quality=3)]) .raw == 3.0
    qs = quality_score([_img(f"i{k}", quality=q) for k, q in enumerate([3, 3, 3, 2, 2])])
    assert qs.raw == pytest.approx(2.6)
    assert qs.norm == pytest.approx(0.8)
    lo = quality_score([_img(quality=1)])
    assert lo.raw == 1.0 and lo.norm == 0.0
    # norm <-> raw is an exact affine bijection
    for q in ([1, 2], [3, 1, 2], [2, 2, 3]):
        s = quality_score([_img(f"i{k}", quality=v) for k, v in enumerate(q)])
        assert s.raw == pytest.approx(2 * s.norm + 1, abs=1e-12)


def test_crowd_scores():
    assert crowd_inclusion_score("both") == 1.0
    assert crowd_inclusion_score("either") == 0.5
    assert crowd_inclusion_score("none") == 0.0
    with pytest.raises(ValueError):
        crowd_inclusion_score("maybe")
    assert crowd_quality_score(5, 5) == 1.0
    assert crowd_quality_score(0, 5) == 0.0
    assert crowd_quality_score(2, 5) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        crowd_quality_score(6, 5)


# -- score table ----------------------------------------------------------------------


def test_build_score_table_full_grid(paper_config, records_540):
    personas = sample_personas(paper_config, stream(paper_config.master_seed, "personas"))
    table = build_score_table(records_540, paper_config, personas)
    assert len(table.cells) == 36
    assert len(table.inclusion_marginals) == 6
    assert len(table.quality_marginals) == 6
    for (value, _), cell in table.cells.items():
        assert cell.inclusion == pytest.approx((cell.rep_attr + cell.relevance) / 2)
        assert cell.quality_norm == pytest.approx((cell.quality_raw - 1) / 2)
        assert cell.n_records == 15
    for value in paper_config.attribute.values:
        cells = [c.inclusion for (v, _), c in table.cells.items() if v == value]
        assert table.inclusion_marginals[value] == pytest.approx(sum(cells) / len(cells))


def test_build_score_table_single_cell(paper_config):
    rng = np.random.default_rng(2)
    records = make_conditioned_records(rng, values=("Asian",), queries=("baker",))
    personas = sample_personas(paper_config, stream(paper_config.master_seed, "personas"))
    table = build_score_table(records, paper_config, personas)
    assert set(table.cells) == {("Asian", "baker")}
    assert table.inclusion_marginals == {"Asian": table.cells[("Asian", "baker")].inclusion}


def test_build_score_table_deterministic(paper_config, records_540):
    personas = sample_personas(paper_config, stream(paper_config.master_seed, "personas"))
    a = build_score_table(records_540, paper_config, personas)
    b = build_score_table(records_540, paper_config, personas)
    assert a.to_dict() == b.to_dict()


def test_build_score_table_no_cells_rejected(paper_config):
    unconditioned = [_img(conditioned_value=None)]
    personas = [Persona(30, "woman")]
    with pytest.raises(ValueError, match="no .*cell"):
        build_score_table(unconditioned, paper_config, personas)


def test_score_table_round_trip(paper_config, records_540):
    from ttifair.scoring import ScoreTable

    personas = sample_personas(paper_config, stream(paper_config.master_seed, "personas"))
    table = build_score_table(records_540, paper_config, personas)
    assert ScoreTable.from_dict(table.to_dict()).to_dict() == table.to_dict()
