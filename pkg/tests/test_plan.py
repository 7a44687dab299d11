from collections import Counter

import pytest

from ttifair.config import config_from_dict
from ttifair.plan import (
    PromptTemplateError,
    build_plan,
    plan_summary,
    read_plan,
    render_prompt,
    write_plan,
)

from conftest import paper_config_dict


def test_render_unconditioned():
    assert render_prompt("A photo face of a {query}.", "baker") == "A photo face of a baker."


def test_render_conditioned():
    assert render_prompt("A {value} {query}.", "baker", "Middle Eastern") == "A Middle Eastern baker."


def test_render_simple_substitution():
    assert render_prompt("A {query}.", "doctor") == "A doctor."


def test_render_short_placeholder_spellings():
    assert render_prompt("A {a} {q}.", "baker", "Middle Eastern") == "A Middle Eastern baker."
    assert render_prompt("A photo face of a {q}.", "baker") == "A photo face of a baker."


def test_render_drops_value_placeholder_when_unconditioned():
    assert render_prompt("A photo face of a {value} {query}.", "baker") == "A photo face of a baker."


def test_render_missing_query_placeholder():
    with pytest.raises(PromptTemplateError, match="query"):
        render_prompt("A portrait.", "baker")


def test_render_missing_value_placeholder():
    with pytest.raises(PromptTemplateError, match="value"):
        render_prompt("A {query}.", "baker", "Asian")


def test_plan_counts_full_paper_run():
    # 22 occupations, 2 templates, 19 diversity seeds, 5 images per seed.
    d = paper_config_dict(queries=[f"occupation-{i}" for i in range(22)])
    cfg = config_from_dict(d)
    s = plan_summary(build_plan(cfg))
    assert s["diversity_jobs"] == 836
    assert s["diversity_images"] == 4180


def test_plan_counts_annotated_subset():
    cfg = config_from_dict(paper_config_dict(prompt_templates=["A photo face of a {value} {query}."]))
    s = plan_summary(build_plan(cfg))
    assert s["diversity_images"] == 570
    assert s["conditioned_images"] == 540


def test_plan_size_formula():
    cfg = config_from_dict(
        paper_config_dict(
            queries=["a", "b", "c"],
            prompt_templates=["A {value} {query}.", "The {value} {query}!"],
            seeds={"diversity": 4, "conditioned": 2},
            images_per_seed=3,
        )
    )
    jobs = build_plan(cfg)
    n_values = len(cfg.attribute.values)
    assert len(jobs) == 2 * 3 * (4 + n_values * 2)
    assert plan_summary(jobs)["images"] == len(jobs) * 3


def test_conditioned_seed_sets_identical_across_values():
    cfg = config_from_dict(paper_config_dict())
    jobs = build_plan(cfg)
    per_value: dict[str, Counter] = {}
    for job in jobs:
        if job.conditioned_value is not None:
            per_value.setdefault(job.conditioned_value, Counter())[job.seed] += 1
    seed_sets = list(per_value.values())
    assert len(seed_sets) == 6
    assert all(s == seed_sets[0] for s in seed_sets)


def test_job_ids_unique():
    cfg = config_from_dict(paper_config_dict())
    jobs = build_plan(cfg)
    assert len({j.job_id for j in jobs}) == len(jobs)


def test_prompt_text_matches_render():
    cfg = config_from_dict(paper_config_dict())
    for job in build_plan(cfg)[:50]:
        expected = render_prompt(
            cfg.prompt_templates[job.template_index], job.query, job.conditioned_value
        )
        assert job.prompt_text == expected


def test_plan_deterministic_and_byte_identical(tmp_path):
    cfg = config_from_dict(paper_config_dict())
    a, b = tmp_path / "a.ndjson", tmp_path / "b.ndjson"
    write_plan(build_plan(cfg), a)
    write_plan(build_plan(cfg), b)
    assert a.read_bytes() == b.read_bytes()
    assert read_plan(a) == build_plan(cfg)


def test_plan_changes_with_master_seed():
    cfg = config_from_dict(paper_config_dict())
    other = cfg.with_seed(cfg.master_seed + 1)
    assert [j.seed for j in build_plan(cfg)] != [j.seed for j in build_plan(other)]
