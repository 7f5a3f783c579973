"""Seeded synthetic score datasets with controlled per-group distributions.

Generator algorithm
-------------------
``SeedSequence(seed)`` spawns one child per group spec, in spec order. Each
child seeds a PCG64 bit generator; all randomness comes from its
``random()`` doubles (53-bit, ``(next_uint64 >> 11) * 2**-53``), genuine
scores first, then impostor scores. Normals use the Box-Muller transform on
pairs of those doubles. Truncation to [-1, 1] is by rejection: candidates
are drawn in batches and out-of-range values discarded, for at most
``MAX_REJECTION_ROUNDS`` batches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Mapping, Sequence

import numpy as np

from .errors import FairnessError
from .grouping import PROXY_RANGES
from .verification import LabeledScore

FAMILIES = ("truncnormal", "uniform", "point")
MAX_REJECTION_ROUNDS = 64


@dataclass(frozen=True)
class DistSpec:
    family: str = "truncnormal"
    loc: float = 0.0
    scale: float = 0.1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise FairnessError(f"unknown distribution family {self.family!r}")
        if not (math.isfinite(self.loc) and math.isfinite(self.scale)):
            raise FairnessError("distribution parameters must be finite")
        if not -1.0 <= self.loc <= 1.0:
            raise FairnessError(f"location {self.loc} outside [-1, 1]")
        if self.scale < 0:
            raise FairnessError(f"scale must be non-negative, got {self.scale}")

    def cdf(self, x: float) -> float:
        """Distribution function after truncation to [-1, 1]."""
        if self.family == "point" or self.scale == 0:
            return 1.0 if x >= self.loc else 0.0
        if self.family == "uniform":
            lo = max(-1.0, self.loc - self.scale)
            hi = min(1.0, self.loc + self.scale)
            return min(1.0, max(0.0, (x - lo) / (hi - lo)))
        nd = NormalDist(self.loc, self.scale)
        lo, hi = nd.cdf(-1.0), nd.cdf(1.0)
        return min(1.0, max(0.0, (nd.cdf(min(max(x, -1.0), 1.0)) - lo) / (hi - lo)))

    def to_dict(self) -> dict:
        return {"family": self.family, "loc": self.loc, "scale": self.scale}


@dataclass(frozen=True)
class GroupScoreSpec:
    group_label: str
    genuine: DistSpec
    impostor: DistSpec
    n_genuine: int
    n_impostor: int
    # first letter of synthesized identity names; derived from the label when None
    initial: str | None = None

    def __post_init__(self):
        if self.n_genuine < 0 or self.n_impostor < 0:
            raise FairnessError(f"negative pair count for group {self.group_label!r}")
        if self.initial is not None and not (len(self.initial) == 1 and self.initial.isalpha()):
            raise FairnessError(f"initial must be one letter, got {self.initial!r}")

    @property
    def name_initial(self) -> str:
        if self.initial is not None:
            return self.initial.upper()
        if self.group_label in PROXY_RANGES:
            return PROXY_RANGES[self.group_label][0]
        first = self.group_label[:1].upper()
        if not ("A" <= first <= "Z"):
            raise FairnessError(
                f"cannot derive a name initial for group {self.group_label!r}; set initial"
            )
        return first

    def to_dict(self) -> dict:
        d = {
            "label": self.group_label,
            "genuine": self.genuine.to_dict(),
            "impostor": self.impostor.to_dict(),
            "n_genuine": self.n_genuine,
            "n_impostor": self.n_impostor,
        }
        if self.initial is not None:
            d["initial"] = self.initial
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroupScoreSpec":
        try:
            return cls(
                str(d["label"]),
                DistSpec(**d["genuine"]),
                DistSpec(**d["impostor"]),
                int(d["n_genuine"]),
                int(d["n_impostor"]),
                d.get("initial"),
            )
        except (KeyError, TypeError) as exc:
            raise FairnessError(f"bad group spec {dict(d)!r}: {exc}") from exc


@dataclass(frozen=True)
class SynthDataset:
    seed: int
    specs: tuple[GroupScoreSpec, ...]
    scores: tuple[LabeledScore, ...]
    name: str = "synthetic"
    # identity -> intended group label
    group_map: Mapping[str, str] = field(default_factory=dict)


def _normals(rng: np.random.Generator, n: int) -> np.ndarray:
    half = (n + 1) // 2
    u1 = rng.random(half)
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 lies in (0, 1]
    z = np.concatenate((r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)))
    return z[:n]


def _draw(rng: np.random.Generator, dist: DistSpec, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros(0)
    if dist.family == "point" or dist.scale == 0:
        return np.full(n, dist.loc)
    kept: list[np.ndarray] = []
    have = 0
    for _ in range(MAX_REJECTION_ROUNDS):
        batch = max(n - have, 16) * 2
        if dist.family == "uniform":
            x = dist.loc + dist.scale * (2.0 * rng.random(batch) - 1.0)
        else:
            x = dist.loc + dist.scale * _normals(rng, batch)
        x = x[(x >= -1.0) & (x <= 1.0)]
        kept.append(x)
        have += x.size
        if have >= n:
            return np.concatenate(kept)[:n]
    raise FairnessError(
        f"rejection sampling of {dist} kept {have} of {n} values in {MAX_REJECTION_ROUNDS} rounds"
    )


def generate(specs: Sequence[GroupScoreSpec], seed: int = 0, name: str = "synthetic") -> SynthDataset:
    """Draw every group's genuine and impostor scores from one seed.

    Identity names start with the group's initial, so the first-letter proxy
    rule puts each pair in its intended group. Genuine pair ``j`` of group
    ``X`` uses identity ``<initial>X-g<j>``; impostor pair ``j`` joins
    ``<initial>X-i<2j>`` and ``<initial>X-i<2j+1>``.
    """
    specs = tuple(specs)
    if len(specs) < 2:
        raise FairnessError("need at least two group specs")
    labels = [s.group_label for s in specs]
    if len(set(labels)) != len(labels):
        raise FairnessError("group labels must be unique")
    if sum(s.n_genuine + s.n_impostor for s in specs) == 0:
        raise FairnessError("all pair counts are zero")
    seed = int(seed)
    if seed < 0:
        raise FairnessError("seed must be non-negative")

    children = np.random.SeedSequence(seed).spawn(len(specs))
    scores: list[LabeledScore] = []
    group_map: dict[str, str] = {}
    for spec, child in zip(specs, children):
        rng = np.random.Generator(np.random.PCG64(child))
        gen = _draw(rng, spec.genuine, spec.n_genuine)
        imp = _draw(rng, spec.impostor, spec.n_impostor)
        stem = f"{spec.name_initial}{spec.group_label}"
        for j, s in enumerate(gen):
            ident = f"{stem}-g{j:06d}"
            group_map[ident] = spec.group_label
            scores.append(LabeledScore(ident, ident, float(s), True))
        for j, s in enumerate(imp):
            a, b = f"{stem}-i{2 * j:06d}", f"{stem}-i{2 * j + 1:06d}"
            group_map[a] = group_map[b] = spec.group_label
            scores.append(LabeledScore(a, b, float(s), False))
    return SynthDataset(seed, specs, tuple(scores), name, group_map)


def _solve_loc(scale: float, tau: float, target: float, upper_tail: bool) -> float:
    """Location of a truncated normal whose mass at/above (or below) tau is target."""
    lo, hi = -1.0, 1.0
    for _ in range(200):
        mid = (lo + hi) / 2
        below = DistSpec("truncnormal", mid, scale).cdf(tau)
        mass = 1.0 - below if upper_tail else below
        # upper-tail mass grows with loc, lower-tail mass shrinks
        if (mass < target) == upper_tail:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


# Target per-group rates at tau = 0.5
REFERENCE_RATES = {
    "A": {"acc": 0.90, "fpr": 0.05, "fnr": 0.03},
    "B": {"acc": 0.88, "fpr": 0.06, "fnr": 0.04},
    "C": {"acc": 0.85, "fpr": 0.08, "fnr": 0.05},
    "D": {"acc": 0.83, "fpr": 0.10, "fnr": 0.06},
}
REFERENCE_TAU = 0.5
REFERENCE_GRID = "0.40:0.50:0.02"
REFERENCE_ACCURACY_BAND = (0.83, 0.92)
REFERENCE_BAND_TOLERANCE = 0.02


def reference_specs(
    n_genuine: int = 3000,
    n_impostor: int = 12000,
    genuine_scale: float = 0.10,
    impostor_scale: float = 0.15,
) -> list[GroupScoreSpec]:
    """Per-group truncated normals whose FPR and FNR at tau=0.5 hit the table.

    Accuracy cannot be matched at the same time: with fixed FPR and FNR a
    group's accuracy is a mix of 1-FPR and 1-FNR, which for these rows
    lies above the target accuracy column.
    """
    out = []
    for label, r in REFERENCE_RATES.items():
        imp_loc = _solve_loc(impostor_scale, REFERENCE_TAU, r["fpr"], upper_tail=True)
        gen_loc = _solve_loc(genuine_scale, REFERENCE_TAU, r["fnr"], upper_tail=False)
        out.append(GroupScoreSpec(
            label,
            DistSpec("truncnormal", round(gen_loc, 6), genuine_scale),
            DistSpec("truncnormal", round(imp_loc, 6), impostor_scale),
            n_genuine, n_impostor,
        ))
    return out


def reference_fixture(seed: int = 4) -> SynthDataset:
    return generate(reference_specs(), seed, name="reference-rates")


def opposing_specs(spread: float = 0.15, gap: float = 0.05) -> list[GroupScoreSpec]:
    """Groups A..D ordered worst-to-best the same way under FPR and FNR.

    Raw ascending ranks of accuracy then run opposite to both error rates,
    and the orderings stay put over the interior thresholds.
    """
    out = []
    for i, label in enumerate("ABCD"):
        out.append(GroupScoreSpec(
            label,
            DistSpec("truncnormal", 0.80 - gap * i, spread),
            DistSpec("truncnormal", 0.20 + gap * i, spread),
            1500, 6000,
        ))
    return out


def threshold_flip_specs() -> list[GroupScoreSpec]:
    """Worst FPR group moves from B to A as tau rises; worst FNR stays C.

    A has wide, low impostor scores, B narrow ones near 0.35, so B
    dominates FPR at low thresholds and A's tail dominates at high ones.
    """
    return [
        GroupScoreSpec("A", DistSpec("truncnormal", 0.80, 0.10), DistSpec("truncnormal", 0.10, 0.25), 2000, 6000),
        GroupScoreSpec("B", DistSpec("truncnormal", 0.80, 0.10), DistSpec("truncnormal", 0.35, 0.05), 2000, 6000),
        GroupScoreSpec("C", DistSpec("truncnormal", 0.60, 0.10), DistSpec("truncnormal", 0.20, 0.10), 2000, 6000),
        GroupScoreSpec("D", DistSpec("truncnormal", 0.80, 0.10), DistSpec("truncnormal", 0.20, 0.10), 2000, 6000),
    ]


def agreement_specs() -> list[GroupScoreSpec]:
    """Four identical groups of point masses: every metric ties everywhere."""
    return [
        GroupScoreSpec(label, DistSpec("point", 0.8, 0.0), DistSpec("point", 0.2, 0.0), 200, 800)
        for label in "ABCD"
    ]


# threshold ranges over which each fixture's construction holds
FIXTURE_GRIDS = {
    "opposing-conclusions": "0.40:0.60:0.05",
    "threshold-flip": "0.30:0.60:0.05",
    "agreement": "0.25:0.75:0.05",
    "reference-rates": REFERENCE_GRID,
}

NAMED_FIXTURES = {
    "opposing-conclusions": opposing_specs,
    "threshold-flip": threshold_flip_specs,
    "agreement": agreement_specs,
    "reference-rates": reference_specs,
}


def phenomena_suite(seed: int = 0) -> dict[str, SynthDataset]:
    """The three qualitative fixtures, keyed by name."""
    return {
        name: generate(NAMED_FIXTURES[name](), seed, name=name)
        for name in ("opposing-conclusions", "threshold-flip", "agreement")
    }


def specs_from_document(doc: Mapping) -> tuple[list[GroupScoreSpec], int | None, str]:
    """Parse a synth spec document: either ``{"fixture": name}`` or ``{"groups": [...]}``.

    Returns (specs, seed or None, dataset name).
    """
    seed = doc.get("seed")
    if seed is not None:
        seed = int(seed)
    if "fixture" in doc:
        name = doc["fixture"]
        if name not in NAMED_FIXTURES:
            raise FairnessError(f"unknown fixture {name!r}; known: {sorted(NAMED_FIXTURES)}")
        if "groups" in doc:
            raise FairnessError("give either fixture or groups, not both")
        return NAMED_FIXTURES[name](), seed, name
    if "groups" not in doc:
        raise FairnessError("synth spec needs a 'fixture' or 'groups' entry")
    groups = doc["groups"]
    if not isinstance(groups, list):
        raise FairnessError("'groups' must be a list")
    return [GroupScoreSpec.from_dict(g) for g in groups], seed, str(doc.get("name", "synthetic"))
