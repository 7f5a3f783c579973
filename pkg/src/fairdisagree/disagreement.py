"""Fairness Disagreement Index: value and rank disagreement between metrics.

Given N per-group metrics over K groups, each metric row is min-max
normalized, every pair of rows is compared by mean absolute difference of
normalized values (D) and of group ranks (R), and the index averages
``alpha * D + (1 - alpha) * R`` over all metric pairs.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import FairnessError, InsufficientGroupsError
from .grouping import PairGroupAssignment
from .metrics import (
    BASE_METRICS,
    DisparitySummary,
    GroupMetricsTable,
    ValidityPolicy,
    disparities,
    group_score_arrays,
    table_from_arrays,
)
from .verification import LabeledScore, ThresholdGrid

RANK_ORIENTATIONS = ("raw", "oriented")
# metrics where a larger value is the better outcome; used by "oriented" ranks
HIGHER_IS_BETTER = frozenset({"acc"})


@dataclass(frozen=True)
class MetricMatrix:
    metric_labels: tuple[str, ...]
    group_labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        object.__setattr__(self, "metric_labels", tuple(self.metric_labels))
        object.__setattr__(self, "group_labels", tuple(self.group_labels))
        if vals.ndim != 2 or vals.shape != (len(self.metric_labels), len(self.group_labels)):
            raise FairnessError(
                f"values shape {vals.shape} does not match "
                f"{len(self.metric_labels)} metrics x {len(self.group_labels)} groups"
            )
        if vals.shape[0] < 2:
            raise FairnessError(f"need at least 2 metrics, got {vals.shape[0]}")
        if vals.shape[1] < 2:
            raise InsufficientGroupsError(f"need at least 2 groups, got {vals.shape[1]}")
        if not np.all(np.isfinite(vals)):
            raise FairnessError("metric matrix has non-finite entries")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_table(cls, table: GroupMetricsTable, metrics: Sequence[str] = BASE_METRICS) -> "MetricMatrix":
        return cls(tuple(metrics), table.labels, [table.column(m) for m in metrics])


def normalize(m: MetricMatrix | np.ndarray) -> np.ndarray:
    """Min-max scale each row to [0, 1]; constant rows become zeros."""
    vals = m.values if isinstance(m, MetricMatrix) else np.asarray(m, dtype=float)
    lo = vals.min(axis=1, keepdims=True)
    span = vals.max(axis=1, keepdims=True) - lo
    out = np.zeros_like(vals)
    live = span[:, 0] > 0
    out[live] = (vals[live] - lo[live]) / span[live]
    return out


def value_disagreement(normalized: np.ndarray) -> np.ndarray:
    x = np.asarray(normalized, dtype=float)
    return np.abs(x[:, None, :] - x[None, :, :]).mean(axis=2)


def average_ranks(row: Sequence[float]) -> np.ndarray:
    """Ascending 1-based ranks; tied values share the mean of their positions."""
    row = np.asarray(row, dtype=float)
    order = np.argsort(row, kind="stable")
    ranks = np.empty(row.size)
    i = 0
    while i < row.size:
        j = i
        while j + 1 < row.size and row[order[j + 1]] == row[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def group_ranks(m: MetricMatrix, orientation: str = "raw") -> np.ndarray:
    """N x K rank matrix.

    ``raw`` ranks every metric ascending by value. ``oriented`` flips
    higher-is-better metrics so rank 1 is the best-off group everywhere.
    """
    if orientation not in RANK_ORIENTATIONS:
        raise FairnessError(f"unknown rank orientation {orientation!r}")
    rows = []
    for label, row in zip(m.metric_labels, m.values):
        if orientation == "oriented" and label in HIGHER_IS_BETTER:
            row = -row
        rows.append(average_ranks(row))
    return np.array(rows)


def rank_disagreement(m: MetricMatrix, orientation: str = "raw") -> np.ndarray:
    """Spearman footrule between every pair of metric rankings, divided by K."""
    r = group_ranks(m, orientation)
    return np.abs(r[:, None, :] - r[None, :, :]).mean(axis=2)


def rank_bound(k: int) -> float:
    """Largest possible R for K groups: the maximal footrule floor(K^2/2), over K."""
    return (k * k // 2) / k


@dataclass(frozen=True)
class DisagreementResult:
    metric_labels: tuple[str, ...]
    group_labels: tuple[str, ...]
    normalized: np.ndarray
    ranks: np.ndarray
    value_disagreement: np.ndarray
    rank_disagreement: np.ndarray
    alpha: float
    fdi: float
    orientation: str = "raw"

    def _pair_mean(self, mat: np.ndarray) -> float:
        iu = np.triu_indices(len(self.metric_labels), k=1)
        return float(mat[iu].mean())

    @property
    def mean_value_disagreement(self) -> float:
        return self._pair_mean(self.value_disagreement)

    @property
    def mean_rank_disagreement(self) -> float:
        return self._pair_mean(self.rank_disagreement)

    def pairs(self) -> list[tuple[str, str, float, float]]:
        """(metric_i, metric_j, D_ij, R_ij) for i < j."""
        labels = self.metric_labels
        return [
            (labels[i], labels[j], float(self.value_disagreement[i, j]), float(self.rank_disagreement[i, j]))
            for i, j in combinations(range(len(labels)), 2)
        ]


def fdi(m: MetricMatrix, alpha: float = 0.5, orientation: str = "raw") -> DisagreementResult:
    if not 0.0 <= alpha <= 1.0:
        raise FairnessError(f"alpha must lie in [0, 1], got {alpha}")
    norm = normalize(m)
    d = value_disagreement(norm)
    ranks = group_ranks(m, orientation)
    r = np.abs(ranks[:, None, :] - ranks[None, :, :]).mean(axis=2)
    iu = np.triu_indices(m.n, k=1)
    index = float(np.mean(alpha * d[iu] + (1.0 - alpha) * r[iu]))
    return DisagreementResult(
        m.metric_labels, m.group_labels, norm, ranks, d, r, float(alpha), index, orientation
    )


@dataclass(frozen=True)
class SweepEntry:
    tau: float
    table: GroupMetricsTable | None = None
    summary: DisparitySummary | None = None
    result: DisagreementResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class SweepSeries:
    grid: ThresholdGrid
    entries: tuple[SweepEntry, ...]
    partition_name: str
    partition_labels: tuple[str, ...]
    metrics: tuple[str, ...]
    alpha: float
    orientation: str = "raw"

    @property
    def valid_entries(self) -> list[SweepEntry]:
        return [e for e in self.entries if e.ok]

    @property
    def failed(self) -> list[SweepEntry]:
        return [e for e in self.entries if not e.ok]

    def fdi_values(self) -> list[tuple[float, float]]:
        return [(e.tau, e.result.fdi) for e in self.valid_entries]


def analyze_at(
    arrays,
    tau: float,
    alpha: float = 0.5,
    validity: ValidityPolicy | None = None,
    metrics: Sequence[str] = BASE_METRICS,
    orientation: str = "raw",
) -> SweepEntry:
    table = table_from_arrays(arrays, tau, validity)
    result = fdi(MetricMatrix.from_table(table, metrics), alpha, orientation)
    return SweepEntry(float(tau), table, disparities(table), result)


def sweep(
    scores: Sequence[LabeledScore],
    assignment: PairGroupAssignment,
    grid: ThresholdGrid,
    alpha: float = 0.5,
    validity: ValidityPolicy | None = None,
    metrics: Sequence[str] = BASE_METRICS,
    orientation: str = "raw",
) -> SweepSeries:
    """Evaluate rates, disparities and FDI at every grid threshold.

    A threshold where the analysis cannot run keeps its slot with ``error``
    set; the call fails only when no threshold succeeds.
    """
    arrays = group_score_arrays(scores, assignment)
    entries = []
    for tau in grid:
        try:
            entries.append(analyze_at(arrays, tau, alpha, validity, metrics, orientation))
        except FairnessError as exc:
            entries.append(SweepEntry(float(tau), error=str(exc)))
    if not any(e.ok for e in entries):
        raise InsufficientGroupsError(
            f"analysis failed at every threshold; first error: {entries[0].error}"
        )
    return SweepSeries(
        grid, tuple(entries), assignment.partition.name, assignment.partition.labels,
        tuple(metrics), float(alpha), orientation,
    )


@dataclass(frozen=True)
class BootstrapInterval:
    point: float
    ci_low: float
    ci_high: float
    n_resamples: int
    seed: int
    n_failed: int = 0
    n_redrawn: int = 0

    def __iter__(self):
        return iter((self.point, self.ci_low, self.ci_high))


def bootstrap_fdi(
    scores: Sequence[LabeledScore],
    assignment: PairGroupAssignment,
    tau: float,
    alpha: float = 0.5,
    n_resamples: int = 1000,
    seed: int = 0,
    validity: ValidityPolicy | None = None,
    metrics: Sequence[str] = BASE_METRICS,
    orientation: str = "raw",
    max_retries: int = 10,
) -> BootstrapInterval:
    """Percentile (2.5, 97.5) interval for FDI at one threshold.

    Pairs are resampled with replacement inside each (group, class) stratum.
    Resample ``i`` draws from its own child of ``SeedSequence(seed)``, so the
    result does not depend on evaluation order.
    """
    if n_resamples < 1:
        raise FairnessError("n_resamples must be at least 1")
    arrays = group_score_arrays(scores, assignment)
    point = analyze_at(arrays, tau, alpha, validity, metrics, orientation).result.fdi

    children = np.random.SeedSequence(seed).spawn(n_resamples)
    values = []
    n_failed = 0
    n_redrawn = 0
    for child in children:
        rng = np.random.Generator(np.random.PCG64(child))
        for attempt in range(max_retries + 1):
            boot = {
                lbl: tuple(
                    s[rng.integers(0, s.size, s.size)] if s.size else s
                    for s in (gen, imp)
                )
                for lbl, (gen, imp) in arrays.items()
            }
            try:
                values.append(analyze_at(boot, tau, alpha, validity, metrics, orientation).result.fdi)
                break
            except FairnessError:
                n_redrawn += 1
        else:
            n_failed += 1
    if not values:
        raise FairnessError(f"all {n_resamples} bootstrap resamples failed")
    lo, hi = np.percentile(np.array(values), [2.5, 97.5])
    return BootstrapInterval(point, float(lo), float(hi), n_resamples, seed, n_failed, n_redrawn)


@dataclass(frozen=True)
class ModelComparison:
    labels: tuple[str, str]
    taus: tuple[float, ...]
    fdi_a: tuple[float, ...]
    fdi_b: tuple[float, ...]
    # (max, min) per model, aligned with labels
    ranges: tuple[tuple[float, float], tuple[float, float]]

    @property
    def differences(self) -> tuple[float, ...]:
        return tuple(a - b for a, b in zip(self.fdi_a, self.fdi_b))

    def range_text(self, which: int, digits: int = 2) -> str:
        hi, lo = self.ranges[which]
        return f"{hi:.{digits}f} – {lo:.{digits}f}"


def compare_models(
    series_a: SweepSeries,
    series_b: SweepSeries,
    label_a: str = "model_a",
    label_b: str = "model_b",
) -> ModelComparison:
    """Per-threshold FDI side by side, plus each model's FDI range.

    Ranges are taken over the thresholds valid for that model and read
    highest first, as in "1.14 – 1.10".
    """
    if series_a.grid.values != series_b.grid.values:
        raise FairnessError("cannot compare sweeps over different threshold grids")
    if series_a.partition_labels != series_b.partition_labels:
        raise FairnessError(
            f"cannot compare sweeps over different partitions: "
            f"{series_a.partition_labels} vs {series_b.partition_labels}"
        )
    fa = {e.tau: e.result.fdi for e in series_a.valid_entries}
    fb = {e.tau: e.result.fdi for e in series_b.valid_entries}
    nan = float("nan")
    taus = series_a.grid.values
    ranges = tuple((max(v.values()), min(v.values())) for v in (fa, fb))
    return ModelComparison(
        (label_a, label_b),
        taus,
        tuple(fa.get(t, nan) for t in taus),
        tuple(fb.get(t, nan) for t in taus),
        ranges,
    )
