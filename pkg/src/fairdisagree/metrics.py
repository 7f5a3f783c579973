"""Per-group verification rates, disparity summaries and score divergences."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import FairnessError, InsufficientGroupsError
from .grouping import PairGroupAssignment
from .verification import LabeledScore, confusion_from_arrays, rates

BASE_METRICS = ("fpr", "fnr", "acc")
CLASS_FILTERS = ("genuine", "impostor", "all")


@dataclass(frozen=True)
class GroupRow:
    fpr: float
    fnr: float
    acc: float
    n_genuine: int
    n_impostor: int

    def metric(self, name: str) -> float:
        if name not in BASE_METRICS:
            raise FairnessError(f"unknown per-group metric {name!r}; known: {BASE_METRICS}")
        return getattr(self, name)


@dataclass(frozen=True)
class GroupMetricsTable:
    tau: float
    rows: Mapping[str, GroupRow]
    # label -> reason, for groups that failed the validity policy
    excluded: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.rows) < 2:
            raise InsufficientGroupsError(
                f"{len(self.rows)} valid group(s) at tau={self.tau}; at least 2 are needed"
            )
        object.__setattr__(self, "rows", dict(sorted(self.rows.items())))
        object.__setattr__(self, "excluded", dict(sorted(self.excluded.items())))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.rows)

    def column(self, metric: str) -> list[float]:
        return [row.metric(metric) for row in self.rows.values()]


@dataclass(frozen=True)
class DisparitySummary:
    delta_fpr: float
    delta_fnr: float
    delta_acc: float
    acc_min: float


@dataclass(frozen=True)
class ValidityPolicy:
    min_genuine: int = 1
    min_impostor: int = 1

    def __post_init__(self):
        if self.min_genuine < 1 or self.min_impostor < 1:
            raise FairnessError("validity minimums must be at least 1")


def group_score_arrays(
    scores: Sequence[LabeledScore], assignment: PairGroupAssignment
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-group (genuine, impostor) score arrays, one entry per partition group."""
    if len(scores) != len(assignment.memberships):
        raise FairnessError("assignment does not match the score list")
    buckets: dict[str, tuple[list, list]] = {lbl: ([], []) for lbl in assignment.partition.labels}
    for s, groups in zip(scores, assignment.memberships):
        for g in groups:
            buckets[g][0 if s.is_genuine else 1].append(s.score)
    return {
        lbl: (np.asarray(gen, dtype=float), np.asarray(imp, dtype=float))
        for lbl, (gen, imp) in buckets.items()
    }


def table_from_arrays(
    arrays: Mapping[str, tuple[np.ndarray, np.ndarray]],
    tau: float,
    validity: ValidityPolicy | None = None,
) -> GroupMetricsTable:
    validity = validity or ValidityPolicy()
    rows = {}
    excluded = {}
    for lbl, (gen, imp) in arrays.items():
        if gen.size < validity.min_genuine or imp.size < validity.min_impostor:
            excluded[lbl] = (
                f"{gen.size} genuine / {imp.size} impostor pairs, "
                f"needs {validity.min_genuine} / {validity.min_impostor}"
            )
            continue
        fpr, fnr, acc = rates(confusion_from_arrays(gen, imp, tau))
        rows[lbl] = GroupRow(fpr, fnr, acc, int(gen.size), int(imp.size))
    return GroupMetricsTable(float(tau), rows, excluded)


def group_metrics(
    scores: Sequence[LabeledScore],
    assignment: PairGroupAssignment,
    tau: float,
    validity: ValidityPolicy | None = None,
) -> GroupMetricsTable:
    """FPR, FNR and accuracy for every group passing the validity policy.

    Raises InsufficientGroupsError when fewer than two groups qualify.
    """
    return table_from_arrays(group_score_arrays(scores, assignment), tau, validity)


def disparities(t: GroupMetricsTable) -> DisparitySummary:
    fpr = t.column("fpr")
    fnr = t.column("fnr")
    acc = t.column("acc")
    return DisparitySummary(
        delta_fpr=max(fpr) - min(fpr),
        delta_fnr=max(fnr) - min(fnr),
        delta_acc=max(acc) - min(acc),
        acc_min=min(acc),
    )


def wasserstein_1d(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """Exact W1 distance between two empirical distributions on the line.

    Both quantile functions are step functions. Merging their breakpoints
    ``i/n`` and ``j/m`` splits (0, 1) into intervals on which both are
    constant, so the quantile-difference integral is a finite sum.
    """
    a = np.sort(np.asarray(sample_a, dtype=float))
    b = np.sort(np.asarray(sample_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise FairnessError("wasserstein_1d needs two non-empty samples")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise FairnessError("wasserstein_1d samples must be finite")
    n, m = a.size, b.size
    # breakpoints as exact integer multiples of 1/(n*m)
    cuts = np.union1d(np.arange(1, n + 1) * m, np.arange(1, m + 1) * n)
    widths = np.diff(np.concatenate(([0], cuts)))
    # quantile index in force on interval (prev, cut]: ceil(cut / step) - 1
    ia = (cuts + m - 1) // m - 1
    ib = (cuts + n - 1) // n - 1
    return float(np.sum(widths * np.abs(a[ia] - b[ib])) / (n * m))


@dataclass(frozen=True)
class DivergenceMatrix:
    labels: tuple[str, ...]
    values: np.ndarray  # K x K, NaN where a group is empty under the filter
    class_filter: str
    undefined: tuple[str, ...] = ()


def group_score_divergences(
    scores: Sequence[LabeledScore],
    assignment: PairGroupAssignment,
    class_filter: str = "impostor",
) -> DivergenceMatrix:
    """Pairwise W1 distances between group score distributions.

    Groups with no scores under ``class_filter`` get NaN rows and columns and
    are listed in ``undefined``.
    """
    if class_filter not in CLASS_FILTERS:
        raise FairnessError(f"unknown class filter {class_filter!r}")
    arrays = group_score_arrays(scores, assignment)
    labels = tuple(arrays)
    samples = []
    for lbl in labels:
        gen, imp = arrays[lbl]
        if class_filter == "genuine":
            samples.append(gen)
        elif class_filter == "impostor":
            samples.append(imp)
        else:
            samples.append(np.concatenate((gen, imp)))
    k = len(labels)
    out = np.zeros((k, k))
    undefined = tuple(lbl for lbl, s in zip(labels, samples) if s.size == 0)
    for i in range(k):
        for j in range(i + 1, k):
            if samples[i].size == 0 or samples[j].size == 0:
                d = float("nan")
            else:
                d = wasserstein_1d(samples[i], samples[j])
            out[i, j] = out[j, i] = d
    for i, s in enumerate(samples):
        if s.size == 0:
            out[i, i] = float("nan")
    return DivergenceMatrix(labels, out, class_filter, undefined)
