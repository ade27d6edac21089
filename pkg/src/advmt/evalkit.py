"""Correlation against human scores and referenced/unreferenced score blending."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from scipy import stats as sstats


class EvalDataError(ValueError):
    pass


class UndefinedCorrelation(ValueError):
    """Raised when a correlation coefficient is not defined (n < 3 or
    zero variance in either argument)."""


@dataclass
class ScoredPair:
    """One evaluation row plus the per-metric scores computed for it."""

    query: list[str]
    generated: list[str]
    reference: list[str] | None
    human_score: float
    metric_scores: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.human_score <= 1.0:
            raise EvalDataError(
                f"human score must be in [0, 1], got {self.human_score}")


@dataclass
class MetricCorrelation:
    pearson: float
    pearson_p: float
    spearman: float
    spearman_p: float


@dataclass
class CorrelationReport:
    metrics: dict[str, MetricCorrelation] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)


def _validate_xy(x, y):
    if len(x) != len(y):
        raise UndefinedCorrelation(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise UndefinedCorrelation(f"need at least 3 samples, got {len(x)}")


def _t_pvalue(r: float, n: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * sstats.t.sf(abs(t), n - 2))


def pearson(x, y) -> tuple[float, float]:
    """Sample Pearson r with a two-sided t-approximation p-value."""
    _validate_xy(x, y)
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelation("undefined correlation: zero variance")
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    r = sxy / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    return r, _t_pvalue(r, n)


def average_ranks(x) -> list[float]:
    """Fractional ranks (1-based); ties get the mean of their positions."""
    order = sorted(range(len(x)), key=lambda i: x[i])
    ranks = [0.0] * len(x)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and x[order[j + 1]] == x[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman(x, y) -> tuple[float, float]:
    """Pearson correlation of average ranks, with the same p-value recipe."""
    _validate_xy(x, y)
    return pearson(average_ranks(x), average_ranks(y))


def minmax_normalize(scores) -> list[float]:
    """Map onto [0, 1]; a constant (or singleton) list maps to all 0.5."""
    scores = list(scores)
    if not scores:
        raise EvalDataError("cannot normalize an empty score list")
    lo, hi = min(scores), max(scores)
    if lo == hi:
        return [0.5] * len(scores)
    return [(s - lo) / (hi - lo) for s in scores]


BLEND_STRATEGIES = ("min", "max", "geometric", "arithmetic")


def blend(referenced: float, unreferenced: float, strategy: str) -> float:
    """Combine a referenced and an unreferenced score, both already in [0, 1]."""
    for name, v in (("referenced", referenced), ("unreferenced", unreferenced)):
        if not 0.0 <= v <= 1.0:
            raise EvalDataError(f"{name} score {v} outside [0, 1]; normalize first")
    if strategy == "min":
        return min(referenced, unreferenced)
    if strategy == "max":
        return max(referenced, unreferenced)
    if strategy == "geometric":
        return math.sqrt(referenced * unreferenced)
    if strategy == "arithmetic":
        return 0.5 * (referenced + unreferenced)
    raise EvalDataError(
        f"unknown blend strategy {strategy!r}; expected one of {BLEND_STRATEGIES}")


# ---------------------------------------------------------------------------
# evaluation-set I/O


def read_eval_file(path) -> list[ScoredPair]:
    """TSV rows ``query<TAB>generated<TAB>reference<TAB>human_score``.

    The reference column may be empty when only unreferenced metrics are
    requested.
    """
    rows = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise EvalDataError(f"cannot read evaluation file {path}: {e}") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 4:
            raise EvalDataError(
                f"{path}:{lineno}: expected 4 tab-separated columns, got {len(cols)}")
        query, generated, reference, human = cols
        if not query.split() or not generated.split():
            raise EvalDataError(f"{path}:{lineno}: empty query or generated reply")
        try:
            score = float(human)
        except ValueError as e:
            raise EvalDataError(f"{path}:{lineno}: bad human score: {e}") from e
        try:
            rows.append(ScoredPair(
                query=query.split(), generated=generated.split(),
                reference=reference.split() or None, human_score=score))
        except EvalDataError as e:
            raise EvalDataError(f"{path}:{lineno}: {e}") from e
    if not rows:
        raise EvalDataError(f"{path}: no evaluation rows")
    return rows


def correlate(pairs: list[ScoredPair], metric_names) -> CorrelationReport:
    """Correlate each metric column against the human scores.

    An undefined correlation for one metric is recorded in ``errors``
    without blocking the others.
    """
    human = [p.human_score for p in pairs]
    report = CorrelationReport()
    for name in metric_names:
        scores = [p.metric_scores[name] for p in pairs]
        try:
            pr, pp = pearson(scores, human)
            sr, sp = spearman(scores, human)
        except UndefinedCorrelation as e:
            report.errors[name] = str(e)
            continue
        report.metrics[name] = MetricCorrelation(pr, pp, sr, sp)
    return report


def write_report(report: CorrelationReport, path):
    """TSV: metric, pearson, pearson_p, spearman, spearman_p.

    Metrics with undefined correlations get ``nan`` fields; the reason is
    carried in ``report.errors`` and surfaced by the CLI.
    """
    lines = ["metric\tpearson\tpearson_p\tspearman\tspearman_p"]
    for name, c in report.metrics.items():
        lines.append(f"{name}\t{c.pearson:.6f}\t{c.pearson_p:.6g}"
                     f"\t{c.spearman:.6f}\t{c.spearman_p:.6g}")
    for name in report.errors:
        lines.append(f"{name}\tnan\tnan\tnan\tnan")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
