"""Command-line entry point: analyze, sweep, compare, synth, group."""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

from . import __version__
from .disagreement import (
    RANK_ORIENTATIONS,
    SweepSeries,
    bootstrap_fdi,
    compare_models,
    sweep,
)
from .errors import ConfigError, FairnessError
from .grouping import (
    CROSS_GROUP_POLICIES,
    NON_ALPHA_POLICIES,
    GroupPartition,
    assign_pairs,
    intersect_partitions,
    proxy_partition,
)
from .io_report import (
    FORMATS,
    AnalysisReport,
    read_embeddings,
    read_group_map,
    read_scores,
    write_comparison,
    write_group_map,
    write_plot_series,
    write_report,
    write_scores,
)
from .metrics import CLASS_FILTERS, ValidityPolicy, group_score_divergences
from .synth import generate, specs_from_document
from .verification import LabeledScore, PairProtocol, ThresholdGrid, build_pairs


@dataclass
class RunConfig:
    scores: str | None = None
    embeddings: str | None = None
    pairs_protocol: str = "exhaustive"
    proxy_groups: bool = False
    group_map: str | None = None
    intersect: str | None = None
    non_alpha: str = "drop"
    tau: float = 0.5
    grid: str = "0.20:0.28:0.02"
    alpha: float = 0.5
    rank_orientation: str = "raw"
    cross_group: str = "exclude"
    min_genuine: int = 1
    min_impostor: int = 1
    bootstrap: int = 0
    seed: int = 0
    divergence_class: str = "impostor"
    label: str = "model"
    out: str = "fairdisagree-out"
    format: str = "structured"

    def validate(self) -> "RunConfig":
        if (self.scores is None) == (self.embeddings is None):
            raise ConfigError("give exactly one input: --scores or --embeddings")
        if self.proxy_groups and self.group_map is not None:
            raise ConfigError("give exactly one partition source: --proxy-groups or --group-map")
        if self.non_alpha not in NON_ALPHA_POLICIES:
            raise ConfigError(f"non_alpha must be one of {NON_ALPHA_POLICIES}")
        if self.rank_orientation not in RANK_ORIENTATIONS:
            raise ConfigError(f"rank_orientation must be one of {RANK_ORIENTATIONS}")
        if self.cross_group not in CROSS_GROUP_POLICIES:
            raise ConfigError(f"cross_group must be one of {CROSS_GROUP_POLICIES}")
        if self.divergence_class not in CLASS_FILTERS:
            raise ConfigError(f"divergence_class must be one of {CLASS_FILTERS}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.bootstrap < 0:
            raise ConfigError("bootstrap resample count cannot be negative")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        ValidityPolicy(self.min_genuine, self.min_impostor)
        ThresholdGrid.parse(self.grid)
        PairProtocol.parse(self.pairs_protocol)
        return self

    @property
    def partition_source(self) -> str:
        base = "mapping" if self.group_map is not None else "proxy"
        return f"{base}+intersect" if self.intersect else base

    def recorded(self) -> dict:
        """Config fields that affect results; output location is left out."""
        d = asdict(self)
        d.pop("out")
        return d


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, value):
    kind = _FIELD_TYPES[name]
    if value is None:
        return None
    try:
        if kind == "bool":
            if not isinstance(value, bool):
                raise ValueError(value)
            return value
        if kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if kind == "float":
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config field {name!r} has bad value {value!r}") from None
    return str(value)


def load_config_file(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    out = {}
    for key, value in doc.items():
        name = key.replace("-", "_")
        if name not in _FIELD_TYPES:
            raise ConfigError(f"unknown config field {key!r} in {path}")
        out[name] = _coerce(name, value)
    return out


def make_config(flags: dict, config_path=None) -> RunConfig:
    """Merge flag values and a config file; a field set in both is an error."""
    values = {}
    if config_path is not None:
        values = load_config_file(config_path)
    clash = sorted(set(values) & set(flags))
    if clash:
        raise ConfigError(f"set both on the command line and in {config_path}: {', '.join(clash)}")
    values.update(flags)
    return RunConfig(**values).validate()


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Prepared:
    scores: list[LabeledScore]
    partition: GroupPartition
    assignment: object
    inputs: dict
    exclusions: dict


def prepare(config: RunConfig) -> Prepared:
    """Pipeline up to group assignment: load or pair, score, partition, assign."""
    inputs = {}
    if config.scores is not None:
        scores = read_scores(config.scores)
        inputs["scores"] = {"path": config.scores, "sha256": _sha256(config.scores)}
    else:
        protocol = PairProtocol.parse(config.pairs_protocol, seed=config.seed)
        scores = build_pairs(read_embeddings(config.embeddings), protocol)
        inputs["embeddings"] = {"path": config.embeddings, "sha256": _sha256(config.embeddings)}

    identities = {s.identity_a for s in scores} | {s.identity_b for s in scores}
    if config.group_map is not None:
        partition = read_group_map(config.group_map)
        inputs["group_map"] = {"path": config.group_map, "sha256": _sha256(config.group_map)}
    else:
        partition = proxy_partition(identities, config.non_alpha)
    if config.intersect:
        partition = intersect_partitions(partition, read_group_map(config.intersect))
        inputs["intersect"] = {"path": config.intersect, "sha256": _sha256(config.intersect)}
    partition.require_k(2)

    assignment = assign_pairs(scores, partition, config.cross_group)
    ungrouped = sorted(i for i in identities if partition.group_of(i) is None)
    exclusions = {
        "partition": {
            "source": config.partition_source,
            "groups": partition.k,
            "dropped_identities": len(partition.dropped),
            "identities_without_group": len(ungrouped),
        },
        "pairs": assignment.diagnostics(),
    }
    return Prepared(scores, partition, assignment, inputs, exclusions)


def _metadata(command: str, config: RunConfig, prepared: Prepared, extra: dict | None = None) -> dict:
    meta = {
        "tool": "fairdisagree",
        "tool_version": __version__,
        "command": command,
        "config": config.recorded(),
        "inputs": prepared.inputs,
        "partition": {
            "name": prepared.partition.name,
            "groups": list(prepared.partition.labels),
            "sizes": prepared.partition.sizes(),
        },
    }
    if extra:
        meta.update(extra)
    return meta


def _validity(config: RunConfig) -> ValidityPolicy:
    return ValidityPolicy(config.min_genuine, config.min_impostor)


def run_sweep(config: RunConfig, grid: ThresholdGrid, prepared: Prepared | None = None) -> tuple[Prepared, SweepSeries]:
    prepared = prepared or prepare(config)
    series = sweep(
        prepared.scores, prepared.assignment, grid, config.alpha,
        _validity(config), orientation=config.rank_orientation,
    )
    return prepared, series


def cmd_analyze(config: RunConfig) -> list[Path]:
    config.validate()
    grid = ThresholdGrid((config.tau,))
    prepared, series = run_sweep(config, grid)
    entry = series.entries[0]
    if not entry.ok:
        raise FairnessError(f"analysis failed at tau={config.tau}: {entry.error}")
    boot = None
    if config.bootstrap > 0:
        boot = bootstrap_fdi(
            prepared.scores, prepared.assignment, config.tau, config.alpha,
            config.bootstrap, config.seed, _validity(config), orientation=config.rank_orientation,
        )
    divergence = group_score_divergences(prepared.scores, prepared.assignment, config.divergence_class)
    report = AnalysisReport(
        _metadata("analyze", config, prepared), series.entries, prepared.exclusions,
        boot, divergence, kind="analysis",
    )
    return write_report(report, config.out, config.format)


def sweep_report(config: RunConfig, prepared: Prepared, series: SweepSeries) -> AnalysisReport:
    return AnalysisReport(
        _metadata("sweep", config, prepared, {"grid": list(series.grid.values)}),
        series.entries, prepared.exclusions, kind="sweep",
    )


def cmd_sweep(config: RunConfig) -> list[Path]:
    config.validate()
    prepared, series = run_sweep(config, ThresholdGrid.parse(config.grid))
    written = write_report(sweep_report(config, prepared, series), config.out, config.format)
    written.append(write_plot_series(series, Path(config.out) / "plot_series.csv"))
    return written


# fields that must agree between two compared runs
_SHARED_FIELDS = (
    "grid", "proxy_groups", "group_map", "intersect", "non_alpha", "alpha",
    "rank_orientation", "cross_group", "min_genuine", "min_impostor",
)


def cmd_compare(config_a: RunConfig, config_b: RunConfig, out, fmt: str = "structured") -> list[Path]:
    config_a.validate()
    config_b.validate()
    diff = [f for f in _SHARED_FIELDS if getattr(config_a, f) != getattr(config_b, f)]
    if diff:
        raise ConfigError(f"compared runs must share grid and partition settings; differ in: {', '.join(diff)}")
    grid = ThresholdGrid.parse(config_a.grid)
    out = Path(out)
    written = []
    series = []
    for sub, cfg in (("model_a", config_a), ("model_b", config_b)):
        prepared, s = run_sweep(cfg, grid)
        series.append(s)
        written += write_report(sweep_report(cfg, prepared, s), out / sub, fmt)
        written.append(write_plot_series(s, out / sub / "plot_series.csv"))
    cmp = compare_models(series[0], series[1], config_a.label, config_b.label)
    written += write_comparison(cmp, out)
    return written


def cmd_synth(spec_path, seed: int | None, out, group_map_out=None) -> int:
    """Write a canonical score file from a synth spec; returns the seed used."""
    try:
        doc = json.loads(Path(spec_path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read synth spec {spec_path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"synth spec {spec_path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("synth spec must be a JSON object")
    specs, doc_seed, name = specs_from_document(doc)
    if seed is not None and doc_seed is not None and seed != doc_seed:
        raise ConfigError(f"seed {seed} on the command line conflicts with seed {doc_seed} in {spec_path}")
    used = seed if seed is not None else (doc_seed if doc_seed is not None else 0)
    ds = generate(specs, used, name=name)
    write_scores(ds.scores, out)
    if group_map_out is not None:
        write_group_map(dict(ds.group_map), group_map_out)
    return used


def cmd_group(config: RunConfig, stream=None) -> Prepared:
    stream = stream or sys.stdout
    config.validate()
    prepared = prepare(config)
    p = prepared.partition
    counts = {lbl: [0, 0] for lbl in p.labels}
    for s, groups in zip(prepared.scores, prepared.assignment.memberships):
        for g in groups:
            counts[g][0 if s.is_genuine else 1] += 1
    print(f"partition {p.name}: {p.k} groups", file=stream)
    print("group\tidentities\tgenuine_pairs\timpostor_pairs", file=stream)
    for lbl, size in p.sizes().items():
        print(f"{lbl}\t{size}\t{counts[lbl][0]}\t{counts[lbl][1]}", file=stream)
    ex = prepared.exclusions
    print(f"dropped identities: {ex['partition']['dropped_identities']}", file=stream)
    print(f"identities without group: {ex['partition']['identities_without_group']}", file=stream)
    for key, value in ex["pairs"].items():
        print(f"{key.replace('_', ' ')}: {value}", file=stream)
    return prepared


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    p.add_argument("--config", default=None, help="JSON config file; may not repeat a flag")
    p.add_argument("--scores", default=s, help="score file (identity_a,identity_b,score,is_genuine)")
    p.add_argument("--embeddings", default=s, help="embedding file (identity_id,d0,d1,...)")
    p.add_argument("--pairs-protocol", dest="pairs_protocol", default=s,
                   help="exhaustive (default) or sampled:CAP")
    p.add_argument("--proxy-groups", dest="proxy_groups", action="store_true", default=s,
                   help="first-letter proxy groups A-F/G-L/M-R/S-Z (default source)")
    p.add_argument("--group-map", dest="group_map", default=s, help="identity_id,group mapping file")
    p.add_argument("--intersect", default=s, help="second group map to intersect with the partition")
    p.add_argument("--non-alpha", dest="non_alpha", choices=NON_ALPHA_POLICIES, default=s)
    p.add_argument("--tau", type=float, default=s, help="decision threshold (default 0.5)")
    p.add_argument("--grid", default=s, help="start:end:step, inclusive (default 0.20:0.28:0.02)")
    p.add_argument("--alpha", type=float, default=s, help="value vs rank weight (default 0.5)")
    p.add_argument("--rank-orientation", dest="rank_orientation", choices=RANK_ORIENTATIONS, default=s)
    p.add_argument("--cross-group", dest="cross_group", choices=CROSS_GROUP_POLICIES, default=s)
    p.add_argument("--min-genuine", dest="min_genuine", type=int, default=s)
    p.add_argument("--min-impostor", dest="min_impostor", type=int, default=s)
    p.add_argument("--bootstrap", type=int, default=s, help="bootstrap resamples (0 = off)")
    p.add_argument("--seed", type=int, default=s)
    p.add_argument("--divergence-class", dest="divergence_class", choices=CLASS_FILTERS, default=s)
    p.add_argument("--label", default=s, help="model label used by compare")
    p.add_argument("--out", default=s, help="output directory")
    p.add_argument("--format", choices=FORMATS, default=s)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairdisagree", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("analyze", "metrics, disparities and FDI at one threshold"),
        ("sweep", "FDI and metrics over a threshold grid"),
        ("group", "show partition sizes and dropped identities"),
    ):
        _add_run_flags(sub.add_parser(name, help=help_text))
    cp = sub.add_parser("compare", help="FDI ranges of two models over one grid")
    cp.add_argument("config_a", help="JSON config of the first model")
    cp.add_argument("config_b", help="JSON config of the second model")
    cp.add_argument("--out", required=True)
    cp.add_argument("--format", choices=FORMATS, default="structured")
    sp = sub.add_parser("synth", help="write a synthetic score file")
    sp.add_argument("spec", help="JSON synth spec: {\"fixture\": name} or {\"groups\": [...]}")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True, help="score file to write")
    sp.add_argument("--group-map-out", dest="group_map_out", default=None,
                    help="also write the identity -> group map")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            used = cmd_synth(args.spec, args.seed, args.out, args.group_map_out)
            print(f"seed: {used}")
            return 0
        if args.command == "compare":
            cmd_compare(
                make_config({}, args.config_a), make_config({}, args.config_b), args.out, args.format,
            )
            return 0
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
        config = make_config(flags, args.config)
        if args.command == "analyze":
            cmd_analyze(config)
        elif args.command == "sweep":
            cmd_sweep(config)
        else:
            cmd_group(config)
        return 0
    except (FairnessError, OSError) as exc:
        print(f"fairdisagree {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
