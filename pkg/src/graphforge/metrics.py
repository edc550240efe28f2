"""Evaluation metric suite.

Set metrics (jaccard, precision/recall/f1), binary accuracy, the relative
numeric errors (mdre, msle, smape, mlre), and the step-wise trajectory
score. Undefined corners follow explicit conventions: both-empty sets score
1.0, a both-zero sMAPE pair contributes 0, and epsilon is 1e-6 wherever a
formula needs stabilizing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import DomainError, EmptyInput
from .payload import SCALAR_TOL, payload_equal
from .values import canonicalize_key

EPSILON = 1e-6

METRIC_NAMES = (
    "jaccard",
    "f1",
    "precision",
    "recall",
    "accuracy",
    "mdre",
    "msle",
    "smape",
    "mlre",
    "step_score",
)


@dataclass(frozen=True)
class SetPrediction:
    predicted: frozenset
    truth: frozenset

    @classmethod
    def from_keys(cls, predicted, truth) -> "SetPrediction":
        return cls(
            frozenset(canonicalize_key(str(k)) for k in predicted),
            frozenset(canonicalize_key(str(k)) for k in truth),
        )


@dataclass(frozen=True)
class ScalarPrediction:
    predicted: float
    truth: float

    def __post_init__(self):
        for value in (self.predicted, self.truth):
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
                raise DomainError(f"scalar predictions must be finite numbers, got {value!r}")


@dataclass
class StepTrace:
    steps: list  # of (predicted payload, truth payload)
    equality: Optional[Callable] = None

    def __post_init__(self):
        if len(self.steps) < 1:
            raise EmptyInput("a step trace needs at least one step")


def jaccard(p: SetPrediction) -> float:
    union = p.predicted | p.truth
    if not union:
        return 1.0  # both-empty convention
    return len(p.predicted & p.truth) / len(union)


def f1(p: SetPrediction) -> tuple:
    """Returns (precision, recall, f1)."""
    if not p.predicted and not p.truth:
        return 1.0, 1.0, 1.0  # both-empty convention
    hits = len(p.predicted & p.truth)
    precision = hits / len(p.predicted) if p.predicted else 0.0
    recall = hits / len(p.truth) if p.truth else 0.0
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def accuracy(labels) -> float:
    labels = list(labels)
    if not labels:
        raise EmptyInput("accuracy over an empty list")
    return sum(1 for predicted, truth in labels if bool(predicted) == bool(truth)) / len(labels)


def mdre(pairs) -> float:
    """Median absolute relative error; even-length lists take the lower middle."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyInput("mdre over an empty list")
    errors = sorted(abs(p.predicted - p.truth) / (p.truth + EPSILON) for p in pairs)
    return errors[(len(errors) - 1) // 2]


def msle(pairs) -> float:
    pairs = list(pairs)
    if not pairs:
        raise EmptyInput("msle over an empty list")
    total = 0.0
    for p in pairs:
        if p.predicted <= -1 or p.truth <= -1:
            raise DomainError(f"msle requires values > -1, got ({p.predicted}, {p.truth})")
        total += (math.log1p(p.predicted) - math.log1p(p.truth)) ** 2
    return total / len(pairs)


def smape(pairs) -> float:
    """Symmetric mean absolute percentage error on the 0..2 scale."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyInput("smape over an empty list")
    total = 0.0
    for p in pairs:
        denom = (abs(p.predicted) + abs(p.truth)) / 2.0
        if denom == 0:
            continue  # both-zero convention: perfect, contributes 0
        total += abs(p.predicted - p.truth) / denom
    return total / len(pairs)


def mlre(pairs) -> float:
    pairs = list(pairs)
    if not pairs:
        raise EmptyInput("mlre over an empty list")
    total = 0.0
    for p in pairs:
        num = p.predicted + EPSILON
        den = p.truth + EPSILON
        if num <= 0 or den <= 0:
            raise DomainError(f"mlre requires epsilon-shifted values > 0, got ({num}, {den})")
        total += abs(math.log(num / den))
    return total / len(pairs)


def step_score(trace: StepTrace) -> float:
    """Fraction of steps whose predicted answer matches ground truth."""
    equal = trace.equality or (lambda a, b: payload_equal(a, b, SCALAR_TOL))
    hits = sum(1 for predicted, truth in trace.steps if equal(predicted, truth))
    return hits / len(trace.steps)


@dataclass
class MetricAccumulator:
    """Collects per-query scores and emits the aggregate block for reports."""

    set_pairs: list = field(default_factory=list)
    bool_labels: list = field(default_factory=list)
    scalar_pairs: list = field(default_factory=list)
    step_traces: list = field(default_factory=list)
    flagged: int = 0

    def aggregate(self) -> dict:
        out: dict = {}
        if self.set_pairs:
            out["jaccard"] = sum(jaccard(p) for p in self.set_pairs) / len(self.set_pairs)
            triples = [f1(p) for p in self.set_pairs]
            out["precision"] = sum(t[0] for t in triples) / len(triples)
            out["recall"] = sum(t[1] for t in triples) / len(triples)
            out["f1"] = sum(t[2] for t in triples) / len(triples)
        if self.bool_labels:
            out["accuracy"] = accuracy(self.bool_labels)
        if self.scalar_pairs:
            out["mdre"] = mdre(self.scalar_pairs)
            out["msle"] = msle(self.scalar_pairs)
            out["smape"] = smape(self.scalar_pairs)
            out["mlre"] = mlre(self.scalar_pairs)
        if self.step_traces:
            out["step_score"] = sum(step_score(t) for t in self.step_traces) / len(self.step_traces)
        if self.flagged:
            out["flagged_pairs"] = self.flagged
        return out

    def counts(self) -> dict:
        return {
            "set_queries": len(self.set_pairs),
            "boolean_decisions": len(self.bool_labels),
            "scalar_queries": len(self.scalar_pairs),
            "step_traces": len(self.step_traces),
        }
