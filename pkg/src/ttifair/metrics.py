"""Distribution distances, diversity scores, parity, and rank agreement.

All operations are pure and reentrant. Distances use the natural
logarithm so that exp(-divergence) lands in [0, 1] and a point mass
against a uniform reference over n values scores exactly 1/n under both
diversity variants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class Distribution:
    """Probability vector over the sensitive attribute's value labels."""

    labels: tuple[str, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.probs):
            raise ValueError("labels and probs must have the same length")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")
        if any(p < 0 for p in self.probs):
            raise ValueError("probabilities must be non-negative")
        total = float(sum(self.probs))
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValueError(f"probabilities must sum to 1 (got {total!r})")

    @classmethod
    def uniform(cls, labels: Sequence[str]) -> "Distribution":
        labels = tuple(labels)
        return cls(labels=labels, probs=tuple(1.0 / len(labels) for _ in labels))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


def _aligned(p, q) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(p, Distribution) and isinstance(q, Distribution):
        if p.labels != q.labels:
            raise ValueError("distributions are over different value labels")
    pa = p.as_array() if isinstance(p, Distribution) else np.asarray(p, dtype=float)
    qa = q.as_array() if isinstance(q, Distribution) else np.asarray(q, dtype=float)
    if pa.shape != qa.shape:
        raise ValueError(f"dimension mismatch: {pa.shape} vs {qa.shape}")
    return pa, qa


def kl_divergence(p, q) -> float:
    """Sum of p*ln(p/q) with the 0*ln(0/q) = 0 convention; q must be positive."""
    pa, qa = _aligned(p, q)
    if np.any(qa <= 0):
        raise ValueError("reference distribution must be strictly positive")
    mask = pa > 0
    return float(np.sum(pa[mask] * np.log(pa[mask] / qa[mask])))


def tvd(p, q) -> float:
    """Half the L1 distance between two discrete distributions."""
    pa, qa = _aligned(p, q)
    return float(0.5 * np.abs(pa - qa).sum())


def diversity_score_kl(p, q, *, complement: bool = False) -> float:
    """exp(-KL(p||q)); 1 means p matches the fair reference exactly.

    ``complement=True`` returns 1 - exp(-KL) instead (the inverted
    reading some tooling expects); scores are then low for diverse
    output.
    """
    score = math.exp(-kl_divergence(p, q))
    return 1.0 - score if complement else score


def diversity_score_tvd(p, q) -> float:
    """1 - TVD(p, q); 1 means p matches the fair reference exactly."""
    return 1.0 - tvd(p, q)


@dataclass(frozen=True)
class ParityResult:
    """Multi-class statistical parity of per-value scores against their mean."""

    per_value_score: dict[str, float]
    expectation: float
    deviations: dict[str, float]
    epsilon: float
    failing_values: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failing_values

    def to_dict(self) -> dict:
        return {
            "per_value_score": dict(self.per_value_score),
            "expectation": self.expectation,
            "deviations": dict(self.deviations),
            "epsilon": self.epsilon,
            "failing_values": list(self.failing_values),
            "passed": self.passed,
        }


def parity_check(
    scores: Mapping[str, float],
    epsilon: float,
    weights: Mapping[str, float] | None = None,
) -> ParityResult:
    """Check every value's score against the expectation within epsilon.

    The expectation is the unweighted mean of per-value scores, or the
    weighted mean when an explicit fair distribution supplies weights. A
    value fails when its absolute deviation strictly exceeds epsilon.
    """
    if not scores:
        raise ValueError("parity check needs at least one per-value score")
    ordered = sorted(scores)  # fixed summation order: label permutation changes nothing
    first = scores[ordered[0]]
    if all(scores[v] == first for v in ordered):
        expectation = first  # exact: an all-equal table deviates by exactly zero
    elif weights is None:
        expectation = math.fsum(scores[v] for v in ordered) / len(scores)
    else:
        missing = set(scores) - set(weights)
        if missing:
            raise ValueError(f"weights missing for values: {sorted(missing)}")
        wsum = math.fsum(weights[v] for v in ordered)
        expectation = math.fsum(scores[v] * weights[v] for v in ordered) / wsum
    deviations = {v: abs(s - expectation) for v, s in scores.items()}
    failing = tuple(v for v, d in deviations.items() if d > epsilon)
    return ParityResult(
        per_value_score=dict(scores),
        expectation=expectation,
        deviations=deviations,
        epsilon=epsilon,
        failing_values=failing,
    )


@dataclass(frozen=True)
class AgreementResult:
    pearson: float
    spearman: float
    n: int

    def to_dict(self) -> dict:
        return {"pearson": self.pearson, "spearman": self.spearman, "n": self.n}


def _as_series(x, y) -> tuple[np.ndarray, np.ndarray]:
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.ndim != 1 or ya.ndim != 1 or len(xa) != len(ya):
        raise ValueError("series must be one-dimensional and equally long")
    if len(xa) < 2:
        raise ValueError("series need at least 2 points")
    return xa, ya


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample product-moment correlation; undefined for constant series."""
    xa, ya = _as_series(x, y)
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("correlation is undefined for a constant series")
    return float(np.sum(dx * dy) / (sx * sy))


def average_ranks(x: Sequence[float]) -> np.ndarray:
    """1-based ranks with tied values sharing the mean of their positions."""
    xa = np.asarray(x, dtype=float)
    order = np.argsort(xa, kind="mergesort")
    ranks = np.empty(len(xa), dtype=float)
    i = 0
    while i < len(xa):
        j = i
        while j + 1 < len(xa) and xa[order[j + 1]] == xa[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Rank correlation: product-moment coefficient of tie-averaged ranks."""
    xa, ya = _as_series(x, y)
    return pearson(average_ranks(xa), average_ranks(ya))


def agreement(x: Sequence[float], y: Sequence[float]) -> AgreementResult:
    xa, ya = _as_series(x, y)
    return AgreementResult(pearson=pearson(xa, ya), spearman=spearman(xa, ya), n=len(xa))
