"""File formats: score, embedding and group-map readers; report writers.

Score file    ``identity_a,identity_b,score,is_genuine``
Embeddings    ``identity_id,d0,d1,...``
Group map     ``identity_id,group``
Plot series   ``tau,metric,scope,value`` (long form)

All files are UTF-8 CSV with a header row. Floats in reports are written
with ``repr`` (shortest exact round-trip); score files use 17 significant
digits.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .disagreement import BootstrapInterval, ModelComparison, SweepEntry, SweepSeries
from .errors import FairnessError, InputFormatError
from .grouping import GroupPartition
from .metrics import DivergenceMatrix
from .verification import Embedding, LabeledScore

SCHEMA_VERSION = "1.0"
SCORE_HEADER = ["identity_a", "identity_b", "score", "is_genuine"]
GROUP_MAP_HEADER = ["identity_id", "group"]
PLOT_HEADER = ["tau", "metric", "scope", "value"]
FORMATS = ("structured", "tabular")


def _num(x: float) -> str:
    return repr(float(x))


def _rows(path: Path):
    """Yield (line_number, row) for non-blank data rows; line 1 is the header."""
    path = Path(path)
    try:
        handle = path.open("r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputFormatError(f"cannot open: {exc.strerror}", path) from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise InputFormatError("file is empty; a header row is required", path) from None
        except UnicodeDecodeError as exc:
            raise InputFormatError(f"not UTF-8: {exc}", path, 1) from exc
        yield 1, [h.strip() for h in header]
        try:
            for row in reader:
                if not row or all(not c.strip() for c in row):
                    continue
                yield reader.line_num, [c.strip() for c in row]
        except (csv.Error, UnicodeDecodeError) as exc:
            raise InputFormatError(str(exc), path, reader.line_num) from exc


def read_scores(path) -> list[LabeledScore]:
    rows = _rows(path)
    _, header = next(rows)
    if header != SCORE_HEADER:
        raise InputFormatError(f"unknown header {header}; expected {SCORE_HEADER}", path, 1)
    out = []
    for line, row in rows:
        if len(row) != 4:
            raise InputFormatError(f"expected 4 fields, got {len(row)}", path, line)
        a, b, raw_score, raw_label = row
        try:
            score = float(raw_score)
        except ValueError:
            raise InputFormatError(f"score {raw_score!r} is not a number", path, line) from None
        if not math.isfinite(score) or not -1.0 <= score <= 1.0:
            raise InputFormatError(f"score {raw_score} outside the [-1,1] bound", path, line)
        if raw_label not in ("0", "1"):
            raise InputFormatError(f"is_genuine must be 0 or 1, got {raw_label!r}", path, line)
        try:
            out.append(LabeledScore(a, b, score, raw_label == "1"))
        except FairnessError as exc:
            raise InputFormatError(str(exc), path, line) from None
    if not out:
        raise InputFormatError("no records after the header", path)
    return out


def write_scores(scores: Iterable[LabeledScore], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(SCORE_HEADER)
        for s in scores:
            w.writerow([s.identity_a, s.identity_b, f"{s.score:.17g}", int(s.is_genuine)])


def read_embeddings(path) -> list[Embedding]:
    rows = _rows(path)
    _, header = next(rows)
    if len(header) < 2 or header[0] != "identity_id":
        raise InputFormatError("header must be identity_id,d0,d1,...", path, 1)
    dim = len(header) - 1
    out = []
    for line, row in rows:
        ident = row[0]
        if len(row) - 1 != dim:
            raise InputFormatError(
                f"dimension mismatch for {ident!r}: {len(row) - 1} components, expected {dim}",
                path, line,
            )
        try:
            vec = [float(c) for c in row[1:]]
        except ValueError as exc:
            raise InputFormatError(f"bad component for {ident!r}: {exc}", path, line) from None
        if not all(math.isfinite(v) for v in vec):
            raise InputFormatError(f"non-finite component in record {ident!r}", path, line)
        out.append(Embedding(ident, tuple(vec)))
    if not out:
        raise InputFormatError("no records after the header", path)
    return out


def write_embeddings(embeddings: Sequence[Embedding], path) -> None:
    path = Path(path)
    dim = embeddings[0].dim if embeddings else 0
    with path.open("w", encoding="utf-8", newline="") as handle:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(["identity_id"] + [f"d{i}" for i in range(dim)])
        for e in embeddings:
            w.writerow([e.identity_id] + [f"{v:.17g}" for v in e.vector])


def read_group_map(path, name: str | None = None) -> GroupPartition:
    """Explicit identity -> group mapping. Repeating a row is allowed; conflicting labels are not."""
    rows = _rows(path)
    _, header = next(rows)
    if header != GROUP_MAP_HEADER:
        raise InputFormatError(f"unknown header {header}; expected {GROUP_MAP_HEADER}", path, 1)
    mapping: dict[str, str] = {}
    for line, row in rows:
        if len(row) != 2 or not row[0] or not row[1]:
            raise InputFormatError("expected identity_id,group", path, line)
        ident, label = row
        if mapping.get(ident, label) != label:
            raise InputFormatError(
                f"identity {ident!r} mapped to both {mapping[ident]!r} and {label!r}", path, line
            )
        mapping[ident] = label
    if not mapping:
        raise InputFormatError("group map has no records", path)
    return GroupPartition.from_mapping(mapping, name or Path(path).stem)


def write_group_map(mapping: dict[str, str], path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(GROUP_MAP_HEADER)
        for ident in sorted(mapping):
            w.writerow([ident, mapping[ident]])


@dataclass
class AnalysisReport:
    """Everything one analyze or sweep run produced, plus how to rerun it."""

    metadata: dict
    entries: Sequence[SweepEntry]
    exclusions: dict = field(default_factory=dict)
    bootstrap: BootstrapInterval | None = None
    divergence: DivergenceMatrix | None = None
    kind: str = "analysis"

    def fdi_series(self) -> list[tuple[float, float]]:
        return [(e.tau, e.result.fdi) for e in self.entries if e.ok]

    def to_document(self) -> dict:
        doc = {
            "schema": "fairdisagree.report",
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "metadata": self.metadata,
            "exclusions": self.exclusions,
            "thresholds": [_entry_doc(e) for e in self.entries],
        }
        if self.bootstrap is not None:
            b = self.bootstrap
            doc["bootstrap"] = {
                "tau": self.entries[0].tau,
                "point": b.point,
                "ci_low": b.ci_low,
                "ci_high": b.ci_high,
                "percentiles": [2.5, 97.5],
                "n_resamples": b.n_resamples,
                "seed": b.seed,
                "n_failed": b.n_failed,
                "n_redrawn": b.n_redrawn,
            }
        if self.divergence is not None:
            doc["score_divergence"] = _divergence_doc(self.divergence)
        return doc


def _matrix(mat) -> list[list[float]]:
    return [[float(x) for x in row] for row in mat]


def _entry_doc(e: SweepEntry) -> dict:
    if not e.ok:
        return {"tau": e.tau, "error": e.error}
    t, s, r = e.table, e.summary, e.result
    doc = {
        "tau": e.tau,
        "group_metrics": [
            {"group": lbl, "accuracy": row.acc, "fpr": row.fpr, "fnr": row.fnr,
             "n_genuine": row.n_genuine, "n_impostor": row.n_impostor}
            for lbl, row in t.rows.items()
        ],
        "disparities": {
            "delta_fpr": s.delta_fpr, "delta_fnr": s.delta_fnr,
            "delta_acc": s.delta_acc, "acc_min": s.acc_min,
        },
        "disagreement": {
            "metrics": list(r.metric_labels),
            "groups": list(r.group_labels),
            "alpha": r.alpha,
            "rank_orientation": r.orientation,
            "normalized": _matrix(r.normalized),
            "ranks": _matrix(r.ranks),
            "value_disagreement": _matrix(r.value_disagreement),
            "rank_disagreement": _matrix(r.rank_disagreement),
            "mean_value_disagreement": r.mean_value_disagreement,
            "mean_rank_disagreement": r.mean_rank_disagreement,
            "fdi": r.fdi,
        },
    }
    if t.excluded:
        doc["excluded_groups"] = dict(t.excluded)
    return doc


def _divergence_doc(d: DivergenceMatrix) -> dict:
    doc = {
        "class_filter": d.class_filter,
        "groups": list(d.labels),
        "wasserstein": [[None if math.isnan(x) else float(x) for x in row] for row in d.values],
    }
    if d.undefined:
        doc["undefined_groups"] = list(d.undefined)
    return doc


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(x) if isinstance(x, float) else x for x in row])


def write_report(report: AnalysisReport, out_dir, fmt: str = "structured") -> list[Path]:
    """Write ``report`` under ``out_dir``; returns the files written.

    ``structured`` writes one ``report.json``. ``tabular`` writes one CSV per
    table: group metrics, disparities, FDI by threshold, pairwise
    disagreement, exclusions, run metadata and any optional sections.
    """
    if fmt not in FORMATS:
        raise FairnessError(f"unknown report format {fmt!r}; use one of {FORMATS}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FairnessError(f"cannot create output directory {out}: {exc.strerror}") from exc
    if fmt == "structured":
        path = out / "report.json"
        _write_json(path, report.to_document())
        return [path]

    ok = [e for e in report.entries if e.ok]
    written = []

    def emit(name, header, rows):
        path = out / name
        _write_csv(path, header, rows)
        written.append(path)

    emit("metadata.csv", ["key", "value"],
         [(k, json.dumps(v, ensure_ascii=False, sort_keys=True)) for k, v in report.metadata.items()])
    emit("group_metrics.csv", ["tau", "group", "accuracy", "fpr", "fnr", "n_genuine", "n_impostor"],
         [(e.tau, lbl, r.acc, r.fpr, r.fnr, r.n_genuine, r.n_impostor)
          for e in ok for lbl, r in e.table.rows.items()])
    emit("disparities.csv", ["tau", "delta_fpr", "delta_fnr", "delta_acc", "acc_min"],
         [(e.tau, e.summary.delta_fpr, e.summary.delta_fnr, e.summary.delta_acc, e.summary.acc_min)
          for e in ok])
    emit("fdi_by_threshold.csv", ["threshold", "fdi"], [(e.tau, e.result.fdi) for e in ok])
    emit("disagreement.csv", ["tau", "metric_i", "metric_j", "value_disagreement", "rank_disagreement"],
         [(e.tau, mi, mj, d, r) for e in ok for mi, mj, d, r in e.result.pairs()])
    exclusion_rows = _exclusion_rows(report)
    if exclusion_rows:
        emit("exclusions.csv", ["kind", "item", "detail"], exclusion_rows)
    if report.bootstrap is not None:
        b = report.bootstrap
        emit("bootstrap.csv", ["tau", "point", "ci_low", "ci_high", "n_resamples", "seed", "n_failed"],
             [(report.entries[0].tau, b.point, b.ci_low, b.ci_high, b.n_resamples, b.seed, b.n_failed)])
    if report.divergence is not None:
        d = report.divergence
        emit("score_divergence.csv", ["group_i", "group_j", "class_filter", "wasserstein"],
             [(d.labels[i], d.labels[j], d.class_filter,
               "" if math.isnan(d.values[i, j]) else float(d.values[i, j]))
              for i in range(len(d.labels)) for j in range(i + 1, len(d.labels))])
    return written


def _exclusion_rows(report: AnalysisReport) -> list[tuple]:
    rows = []
    for key, value in report.exclusions.items():
        if isinstance(value, dict):
            rows.extend((key, k, json.dumps(v)) for k, v in value.items())
        else:
            rows.append((key, "", json.dumps(value)))
    for e in report.entries:
        if not e.ok:
            rows.append(("failed_threshold", _num(e.tau), e.error))
        elif e.table.excluded:
            rows.extend(("excluded_group", f"{_num(e.tau)}:{lbl}", why) for lbl, why in e.table.excluded.items())
    return rows


def plot_rows(series: SweepSeries) -> list[tuple]:
    """Long-form rows: per-group rates, disparity aggregates, then FDI, per threshold."""
    rows = []
    for e in series.valid_entries:
        for metric in ("fpr", "fnr", "acc"):
            for lbl, r in e.table.rows.items():
                rows.append((e.tau, metric, lbl, r.metric(metric)))
        s = e.summary
        rows.append((e.tau, "delta_fpr", "aggregate", s.delta_fpr))
        rows.append((e.tau, "delta_fnr", "aggregate", s.delta_fnr))
        rows.append((e.tau, "delta_acc", "aggregate", s.delta_acc))
        rows.append((e.tau, "acc_min", "aggregate", s.acc_min))
        rows.append((e.tau, "fdi", "aggregate", e.result.fdi))
    return rows


def write_plot_series(series: SweepSeries, path) -> Path:
    path = Path(path)
    _write_csv(path, PLOT_HEADER, plot_rows(series))
    return path


def write_comparison(cmp: ModelComparison, out_dir) -> list[Path]:
    """Model ranges in ``comparison.csv``, per-threshold values beside it."""
    out = Path(out_dir)
    ranges = out / "comparison.csv"
    _write_csv(ranges, ["model", "fdi_range", "fdi_max", "fdi_min"],
               [(label, cmp.range_text(i), hi, lo)
                for i, (label, (hi, lo)) in enumerate(zip(cmp.labels, cmp.ranges))])
    per_tau = out / "comparison_by_threshold.csv"
    _write_csv(per_tau, ["threshold", "model_a_fdi", "model_b_fdi", "difference"],
               [(t, a, b, d) for t, a, b, d in zip(cmp.taus, cmp.fdi_a, cmp.fdi_b, cmp.differences)])
    return [ranges, per_tau]


def read_csv_table(path) -> list[dict[str, str]]:
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))
