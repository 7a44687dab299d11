"""Expansion of an audit config into the generation-job matrix.

The engine never runs a text-to-image model itself; it emits a
line-delimited job file that an external generator consumes. Conditioned
jobs reuse one seed set across every attribute value so the seed can
never act as a confounder between groups.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .config import EvalConfig
from .seeding import draw_seeds, stream

_QUERY_RE = re.compile(r"\{(?:query|q)\}")
_VALUE_RE = re.compile(r"\{(?:value|a)\}")
_VALUE_AND_SPACE_RE = re.compile(r"\{(?:value|a)\} | \{(?:value|a)\}|\{(?:value|a)\}")


class PromptTemplateError(ValueError):
    """A template lacks a placeholder required for the requested rendering."""


@dataclass(frozen=True)
class PromptJob:
    job_id: str
    template_index: int
    query: str
    conditioned_value: str | None
    seed: int
    images_per_seed: int
    prompt_text: str

    def to_json_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "prompt_text": self.prompt_text,
            "seed": self.seed,
            "images_per_seed": self.images_per_seed,
            "template_index": self.template_index,
            "query": self.query,
            "conditioned_value": self.conditioned_value,
        }


def has_query_placeholder(template: str) -> bool:
    return bool(_QUERY_RE.search(template))


def has_value_placeholder(template: str) -> bool:
    return bool(_VALUE_RE.search(template))


def render_prompt(template: str, query: str, value: str | None = None) -> str:
    """Substitute ``{query}`` and, when present, ``{value}`` into a template.

    When ``value`` is None the value placeholder is dropped together with
    one adjacent space, so one template serves both unconditioned and
    conditioned prompts. ``{q}``/``{a}`` are accepted as short spellings.
    """
    if not has_query_placeholder(template):
        raise PromptTemplateError(f"template {template!r} is missing a {{query}} placeholder")
    if value is not None:
        if not has_value_placeholder(template):
            raise PromptTemplateError(f"template {template!r} is missing a {{value}} placeholder")
        text = _VALUE_RE.sub(lambda _: value, template)
    else:
        text = _VALUE_AND_SPACE_RE.sub("", template)
    return _QUERY_RE.sub(lambda _: query, text)


def build_plan(cfg: EvalConfig) -> list[PromptJob]:
    """Deterministic job matrix for the config.

    Per template and query: ``diversity_seeds`` unconditioned jobs plus
    ``conditioned_seeds`` jobs for every attribute value, the latter
    sharing one seed set across values.
    """
    jobs: list[PromptJob] = []
    for ti, template in enumerate(cfg.prompt_templates):
        for qi, query in enumerate(cfg.queries):
            div_seeds = draw_seeds(
                stream(cfg.master_seed, "plan", "diversity", ti, query), cfg.diversity_seeds
            )
            for si, seed in enumerate(div_seeds):
                jobs.append(
                    PromptJob(
                        job_id=f"t{ti:02d}.q{qi:02d}.div.s{si:02d}",
                        template_index=ti,
                        query=query,
                        conditioned_value=None,
                        seed=seed,
                        images_per_seed=cfg.images_per_seed,
                        prompt_text=render_prompt(template, query, None),
                    )
                )
            cond_seeds = draw_seeds(
                stream(cfg.master_seed, "plan", "conditioned", ti, query), cfg.conditioned_seeds
            )
            for ai, value in enumerate(cfg.attribute.values):
                for si, seed in enumerate(cond_seeds):
                    jobs.append(
                        PromptJob(
                            job_id=f"t{ti:02d}.q{qi:02d}.a{ai:02d}.s{si:02d}",
                            template_index=ti,
                            query=query,
                            conditioned_value=value,
                            seed=seed,
                            images_per_seed=cfg.images_per_seed,
                            prompt_text=render_prompt(template, query, value),
                        )
                    )
    return jobs


def plan_summary(jobs: Iterable[PromptJob]) -> dict:
    """Job/image counts split by unconditioned (diversity) vs conditioned."""
    div_jobs = cond_jobs = div_images = cond_images = 0
    for job in jobs:
        if job.conditioned_value is None:
            div_jobs += 1
            div_images += job.images_per_seed
        else:
            cond_jobs += 1
            cond_images += job.images_per_seed
    return {
        "jobs": div_jobs + cond_jobs,
        "images": div_images + cond_images,
        "diversity_jobs": div_jobs,
        "diversity_images": div_images,
        "conditioned_jobs": cond_jobs,
        "conditioned_images": cond_images,
    }


def write_plan(jobs: Iterable[PromptJob], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for job in jobs:
            fh.write(json.dumps(job.to_json_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def read_plan(path: str | Path) -> list[PromptJob]:
    jobs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            jobs.append(
                PromptJob(
                    job_id=d["job_id"],
                    template_index=d["template_index"],
                    query=d["query"],
                    conditioned_value=d.get("conditioned_value"),
                    seed=d["seed"],
                    images_per_seed=d["images_per_seed"],
                    prompt_text=d["prompt_text"],
                )
            )
    return jobs
