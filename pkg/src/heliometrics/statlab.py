"""Meta-evaluation statistics: rank agreement between metrics, multi-run
aggregation, and the observer-study analysis (exact binomial tests,
expertise correlation, histograms).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadArgs,
    DegenerateInput,
    EmptyInput,
    InvariantViolation,
    LengthMismatch,
    TooFewRuns,
)
from .metrics import MetricReport

# Relative slack when deciding which outcomes are "at most as probable" as
# the observed one; absorbs float noise between mathematically equal pmfs.
_PMF_TIE_REL = 1e-9


@dataclass
class MetricTable:
    """Rows of per-model metric values with a fixed column order."""

    rows: list[MetricReport]
    metric_names: list[str]

    def __post_init__(self):
        for row in self.rows:
            missing = [m for m in self.metric_names if m not in row.values]
            if missing:
                raise InvariantViolation(f"{row.model_id} lacks metrics {missing}")

    def column(self, name: str) -> list[float]:
        if name not in self.metric_names:
            raise BadArgs(f"unknown metric {name!r}")
        return [row.values[name] for row in self.rows]


@dataclass(frozen=True)
class StudyResponse:
    subject_id: str
    expertise: float
    correct: int
    n_questions: int = 10

    def __post_init__(self):
        if not 0 <= self.correct <= self.n_questions:
            raise InvariantViolation(
                f"{self.subject_id}: correct={self.correct} of {self.n_questions}"
            )


@dataclass(frozen=True)
class RunAggregate:
    values: tuple[float, ...]
    mean: float
    std: float

    def __str__(self) -> str:
        return f"{self.mean:.1f} ± {self.std:.1f}"


def _rank_average(xs: Sequence[float]) -> np.ndarray:
    """Ranks 1..n with ties given the mean of their rank range."""
    arr = np.asarray(xs, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr))
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Product-moment correlation; raises on degenerate (constant) input."""
    if len(xs) != len(ys):
        raise LengthMismatch(f"{len(xs)} vs {len(ys)}")
    if len(xs) < 3:
        raise LengthMismatch("need at least 3 pairs")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise DegenerateInput("zero variance input")
    return float(np.clip(xc @ yc / denom, -1.0, 1.0))


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Rank correlation: Pearson on average-ranked data."""
    if len(xs) != len(ys):
        raise LengthMismatch(f"{len(xs)} vs {len(ys)}")
    if len(xs) < 3:
        raise LengthMismatch("need at least 3 pairs")
    return pearson(_rank_average(xs), _rank_average(ys))


def spearman_matrix(table: MetricTable) -> np.ndarray:
    names = table.metric_names
    out = np.eye(len(names))
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            rho = spearman(table.column(names[i]), table.column(names[j]))
            out[i, j] = out[j, i] = rho
    return out


def aggregate_runs(values: Sequence[float]) -> RunAggregate:
    """Mean and sample standard deviation (divisor n-1) over repeated runs."""
    if len(values) < 2:
        raise TooFewRuns(f"need >= 2 runs, got {len(values)}")
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    std = math.sqrt(float(((arr - mean) ** 2).sum()) / (len(arr) - 1))
    return RunAggregate(values=tuple(float(v) for v in values), mean=mean, std=std)


def binomial_test_two_sided(k: int, n: int, p0: float = 0.5) -> float:
    """Exact two-sided binomial p-value by the small-pmf method.

    Sums Binomial(n, p0) probabilities of every outcome no more probable
    than the observed one.
    """
    if not 0 <= k <= n or n < 1:
        raise BadArgs(f"k={k}, n={n}")
    if not 0.0 < p0 < 1.0:
        raise BadArgs(f"p0={p0}")
    pmf = np.array(
        [math.comb(n, i) * p0**i * (1.0 - p0) ** (n - i) for i in range(n + 1)]
    )
    threshold = pmf[k] * (1.0 + _PMF_TIE_REL)
    return float(min(1.0, pmf[pmf <= threshold].sum()))


@dataclass
class StudyReport:
    n_subjects: int
    mean_correct: float
    std_correct: float | None
    pooled_correct: int
    pooled_questions: int
    pooled_p_value: float
    mean_expertise: float
    std_expertise: float | None
    expertise_correlation: float | None
    correct_histogram: list[int] = field(default_factory=list)
    expertise_histogram: list[int] = field(default_factory=list)


def study_report(responses: Sequence[StudyResponse], p0: float = 0.5) -> StudyReport:
    """Group statistics for a real-vs-generated discrimination study.

    The pooled exact binomial test treats all answers as one sample of
    sum(n_questions) guesses. The expertise/score correlation is reported as
    None when either variable is constant (it is undefined, not an error,
    for such a roster).
    """
    if not responses:
        raise EmptyInput("no study responses")
    correct = [r.correct for r in responses]
    expertise = [r.expertise for r in responses]
    pooled_k = sum(correct)
    pooled_n = sum(r.n_questions for r in responses)
    try:
        corr = pearson(expertise, correct)
    except (DegenerateInput, LengthMismatch):
        corr = None
    max_q = max(r.n_questions for r in responses)
    correct_hist = [correct.count(v) for v in range(max_q + 1)]
    # Self-assessment lives on a 1-5 scale; bin to the nearest point.
    exp_hist = [sum(1 for e in expertise if round(e) == v) for v in range(1, 6)]
    return StudyReport(
        n_subjects=len(responses),
        mean_correct=float(np.mean(correct)),
        std_correct=_sample_std(correct),
        pooled_correct=pooled_k,
        pooled_questions=pooled_n,
        pooled_p_value=binomial_test_two_sided(pooled_k, pooled_n, p0),
        mean_expertise=float(np.mean(expertise)),
        std_expertise=_sample_std(expertise),
        expertise_correlation=corr,
        correct_histogram=correct_hist,
        expertise_histogram=exp_hist,
    )


def _sample_std(values: Sequence[float]) -> float | None:
    if len(values) < 2:
        return None
    return aggregate_runs(values).std


def read_study_csv(path) -> list[StudyResponse]:
    """CSV layout: subject_id, expertise, correct, n_questions (header row)."""
    responses = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        wanted = {"subject_id", "expertise", "correct", "n_questions"}
        if reader.fieldnames is None or not wanted.issubset(reader.fieldnames):
            raise BadArgs(f"study CSV needs columns {sorted(wanted)}")
        for row in reader:
            responses.append(
                StudyResponse(
                    subject_id=row["subject_id"],
                    expertise=float(row["expertise"]),
                    correct=int(row["correct"]),
                    n_questions=int(row["n_questions"]),
                )
            )
    if not responses:
        raise EmptyInput(f"no rows in {path}")
    return responses


def table_from_reports(
    reports: Iterable[MetricReport], metric_names: Sequence[str] | None = None
) -> MetricTable:
    """Assemble a MetricTable, defaulting columns to the metrics every row has."""
    rows = list(reports)
    if not rows:
        raise EmptyInput("no metric reports")
    if metric_names is None:
        metric_names = [
            name for name in rows[0].values if all(name in r.values for r in rows)
        ]
    return MetricTable(rows=rows, metric_names=list(metric_names))
