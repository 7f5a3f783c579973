"""Verification pairs, cosine scores, thresholding and confusion counts."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import FairnessError, UndefinedRateError


@dataclass(frozen=True)
class Embedding:
    identity_id: str
    vector: tuple[float, ...]
    # per-identity image index; assigned by occurrence order when omitted
    index: int | None = None

    def __post_init__(self):
        vec = tuple(float(x) for x in self.vector)
        if not vec:
            raise FairnessError(f"empty embedding vector for {self.identity_id!r}")
        if not all(math.isfinite(x) for x in vec):
            raise FairnessError(f"non-finite component in embedding for {self.identity_id!r}")
        object.__setattr__(self, "vector", vec)

    @property
    def dim(self) -> int:
        return len(self.vector)


@dataclass(frozen=True)
class LabeledScore:
    identity_a: str
    identity_b: str
    score: float
    is_genuine: bool

    def __post_init__(self):
        s = float(self.score)
        if not math.isfinite(s):
            raise FairnessError(f"non-finite score for pair ({self.identity_a}, {self.identity_b})")
        if self.is_genuine and self.identity_a != self.identity_b:
            raise FairnessError(
                f"genuine pair must share one identity, got {self.identity_a!r} and {self.identity_b!r}"
            )
        object.__setattr__(self, "score", s)
        object.__setattr__(self, "is_genuine", bool(self.is_genuine))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def n_genuine(self) -> int:
        return self.tp + self.fn

    @property
    def n_impostor(self) -> int:
        return self.fp + self.tn

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ThresholdGrid:
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise FairnessError("threshold grid is empty")
        if not all(math.isfinite(v) for v in vals):
            raise FairnessError("threshold grid contains non-finite values")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise FairnessError("threshold grid must be strictly increasing")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @classmethod
    def parse(cls, text: str) -> "ThresholdGrid":
        """Parse ``start:end:step`` (endpoints inclusive) or a comma list.

        The end point is kept when it lies within half a step of the last
        generated value, so ``0.20:0.28:0.02`` yields five thresholds.
        """
        text = text.strip()
        if ":" not in text:
            try:
                return cls(tuple(float(p) for p in text.split(",") if p.strip()))
            except ValueError as exc:
                raise FairnessError(f"bad threshold list {text!r}") from exc
        parts = text.split(":")
        if len(parts) != 3:
            raise FairnessError(f"grid must be start:end:step, got {text!r}")
        try:
            start, end, step = (float(p) for p in parts)
        except ValueError as exc:
            raise FairnessError(f"bad grid {text!r}") from exc
        if not (math.isfinite(start) and math.isfinite(end) and math.isfinite(step)):
            raise FairnessError(f"bad grid {text!r}")
        if step <= 0:
            raise FairnessError(f"grid step must be positive, got {step}")
        if end < start:
            raise FairnessError(f"grid end {end} is below start {start}")
        n = int(math.floor((end - start) / step + 0.5))
        # round away representation noise so 0.2 + 2*0.02 prints as 0.24
        values = tuple(round(start + i * step, 12) for i in range(n + 1))
        return cls(values)


@dataclass(frozen=True)
class PairProtocol:
    """How verification pairs are enumerated from embeddings.

    ``exhaustive`` forms every unordered pair. ``sampled`` keeps every
    genuine pair but draws at most ``impostor_cap`` impostor pairs per
    identity, using ``seed``.
    """

    mode: str = "exhaustive"
    impostor_cap: int = 100
    seed: int = 0
    require_genuine: bool = False

    def __post_init__(self):
        if self.mode not in ("exhaustive", "sampled"):
            raise FairnessError(f"unknown pair protocol {self.mode!r}")
        if self.impostor_cap < 1:
            raise FairnessError("impostor_cap must be at least 1")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "PairProtocol":
        """``exhaustive`` or ``sampled:CAP``."""
        head, _, tail = text.partition(":")
        if head == "exhaustive" and not tail:
            return cls("exhaustive", seed=seed)
        if head == "sampled":
            try:
                cap = int(tail) if tail else 100
            except ValueError as exc:
                raise FairnessError(f"bad impostor cap in {text!r}") from exc
            return cls("sampled", impostor_cap=cap, seed=seed)
        raise FairnessError(f"unknown pair protocol {text!r}")


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    va = np.asarray(a.vector if isinstance(a, Embedding) else a, dtype=float)
    vb = np.asarray(b.vector if isinstance(b, Embedding) else b, dtype=float)
    if va.shape != vb.shape:
        raise FairnessError(f"dimension mismatch: {va.size} vs {vb.size}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise FairnessError("cosine similarity undefined for a zero vector")
    s = float(np.dot(va, vb)) / (na * nb)
    return min(1.0, max(-1.0, s))


def _indexed(embeddings: Sequence[Embedding]) -> list[tuple[str, int]]:
    seen: dict[str, int] = {}
    keys = set()
    out = []
    for e in embeddings:
        if e.index is None:
            idx = seen.get(e.identity_id, 0)
        else:
            idx = e.index
        seen[e.identity_id] = max(seen.get(e.identity_id, 0), idx + 1)
        key = (e.identity_id, idx)
        if key in keys:
            raise FairnessError(f"duplicate embedding record {key}")
        keys.add(key)
        out.append(key)
    return out


def build_pairs(embeddings: Sequence[Embedding], protocol: PairProtocol | None = None) -> list[LabeledScore]:
    """Score genuine and impostor pairs drawn from ``embeddings``.

    Output is ordered by the (i, j) positions of the pair in the input list,
    i < j, which makes it deterministic for a fixed protocol seed.
    """
    protocol = protocol or PairProtocol()
    embeddings = list(embeddings)
    if len(embeddings) < 2:
        raise FairnessError("need at least two embeddings to form pairs")
    _indexed(embeddings)
    dims = {e.dim for e in embeddings}
    if len(dims) != 1:
        raise FairnessError(f"embeddings have mixed dimensions {sorted(dims)}")

    mat = np.array([e.vector for e in embeddings], dtype=float)
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0):
        bad = embeddings[int(np.argmax(norms == 0))].identity_id
        raise FairnessError(f"zero-norm embedding for {bad!r}")
    ids = [e.identity_id for e in embeddings]
    m = len(ids)

    by_identity: dict[str, list[int]] = {}
    for i, ident in enumerate(ids):
        by_identity.setdefault(ident, []).append(i)

    pairs: list[tuple[int, int]] = []
    for members in by_identity.values():
        pairs.extend((a, b) for ai, a in enumerate(members) for b in members[ai + 1:])
    if protocol.require_genuine and not pairs:
        raise FairnessError("no genuine pairs can be built: every identity has one embedding")

    if protocol.mode == "exhaustive":
        pairs.extend((i, j) for i in range(m) for j in range(i + 1, m) if ids[i] != ids[j])
    else:
        rng = np.random.Generator(np.random.PCG64(protocol.seed))
        chosen: set[tuple[int, int]] = set()
        for ident in sorted(by_identity):
            own = by_identity[ident]
            others = [j for j in range(m) if ids[j] != ident]
            total = len(own) * len(others)
            if total == 0:
                continue
            draw = rng.choice(total, size=min(protocol.impostor_cap, total), replace=False)
            for flat in np.sort(draw):
                a = own[int(flat) // len(others)]
                b = others[int(flat) % len(others)]
                chosen.add((min(a, b), max(a, b)))
        pairs.extend(chosen)

    pairs.sort()
    ia = np.array([p[0] for p in pairs], dtype=np.intp)
    ib = np.array([p[1] for p in pairs], dtype=np.intp)
    dots = np.einsum("ij,ij->i", mat[ia], mat[ib]) if pairs else np.zeros(0)
    sims = np.clip(dots / (norms[ia] * norms[ib]), -1.0, 1.0)
    return [
        LabeledScore(ids[a], ids[b], float(s), ids[a] == ids[b])
        for (a, b), s in zip(pairs, sims)
    ]


def split_scores(scores: Iterable[LabeledScore]) -> tuple[np.ndarray, np.ndarray]:
    """Return (genuine, impostor) score arrays."""
    gen, imp = [], []
    for s in scores:
        (gen if s.is_genuine else imp).append(s.score)
    return np.asarray(gen, dtype=float), np.asarray(imp, dtype=float)


def confusion_from_arrays(genuine: np.ndarray, impostor: np.ndarray, tau: float) -> ConfusionCounts:
    # accept iff score >= tau
    tp = int(np.count_nonzero(genuine >= tau))
    fp = int(np.count_nonzero(impostor >= tau))
    return ConfusionCounts(tp=tp, fp=fp, tn=int(impostor.size) - fp, fn=int(genuine.size) - tp)


def confusion_at(scores: Sequence[LabeledScore], tau: float) -> ConfusionCounts:
    if not scores:
        raise FairnessError("confusion_at needs at least one score")
    gen, imp = split_scores(scores)
    return confusion_from_arrays(gen, imp, float(tau))


def rates(c: ConfusionCounts) -> tuple[float, float, float]:
    """(fpr, fnr, acc) for one confusion table.

    Raises UndefinedRateError when either class is absent.
    """
    if c.n_genuine == 0 or c.n_impostor == 0:
        raise UndefinedRateError(
            f"rates undefined: {c.n_genuine} genuine and {c.n_impostor} impostor pairs"
        )
    fpr = c.fp / c.n_impostor
    fnr = c.fn / c.n_genuine
    acc = (c.tp + c.tn) / c.total
    return fpr, fnr, acc
