"""Group partitions over identities and pair-to-group assignment."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import PartitionError
from .verification import LabeledScore

# first-letter ranges of the proxy rule, keyed by group label
PROXY_RANGES = {"A": ("A", "F"), "B": ("G", "L"), "C": ("M", "R"), "D": ("S", "Z")}
OTHER_LABEL = "OTHER"
NON_ALPHA_POLICIES = ("drop", "reject", "other")
CROSS_GROUP_POLICIES = ("exclude", "duplicate")


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint groups of identities, ordered lexicographically by label.

    ``dropped`` holds identities that were offered to the partition builder
    but left out of every group, so reports can account for them.
    """

    name: str
    groups: tuple[tuple[str, frozenset], ...]
    dropped: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        groups = tuple(sorted((str(lbl), frozenset(ids)) for lbl, ids in self.groups))
        labels = [g[0] for g in groups]
        if len(set(labels)) != len(labels):
            raise PartitionError(f"duplicate group labels in partition {self.name!r}")
        seen: dict[str, str] = {}
        for lbl, ids in groups:
            for ident in ids:
                if ident in seen:
                    raise PartitionError(
                        f"identity {ident!r} is in both {seen[ident]!r} and {lbl!r}"
                    )
                seen[ident] = lbl
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "dropped", frozenset(self.dropped))
        object.__setattr__(self, "_lookup", seen)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(g[0] for g in self.groups)

    @property
    def k(self) -> int:
        return len(self.groups)

    def group_of(self, identity: str) -> str | None:
        return self._lookup.get(identity)

    def sizes(self) -> dict[str, int]:
        return {lbl: len(ids) for lbl, ids in self.groups}

    def require_k(self, minimum: int = 2) -> "GroupPartition":
        if self.k < minimum:
            raise PartitionError(
                f"partition {self.name!r} has {self.k} group(s); at least {minimum} are needed"
            )
        return self

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str], name: str = "mapping") -> "GroupPartition":
        buckets: dict[str, set] = {}
        for ident, lbl in mapping.items():
            buckets.setdefault(lbl, set()).add(ident)
        return cls(name, tuple(buckets.items()))


def _proxy_label(identity: str) -> str | None:
    if not identity:
        return None
    c = identity[0].upper()
    if not ("A" <= c <= "Z"):
        return None
    for lbl, (lo, hi) in PROXY_RANGES.items():
        if lo <= c <= hi:
            return lbl
    return None


def proxy_partition(identities: Iterable[str], non_alpha: str = "drop") -> GroupPartition:
    """First-letter proxy grouping: A-F, G-L, M-R and S-Z become groups A to D.

    Identities whose first character is not an ASCII letter are handled by
    ``non_alpha``: ``drop`` (kept in ``dropped``), ``reject`` (raise) or
    ``other`` (an extra ``OTHER`` group).
    """
    if non_alpha not in NON_ALPHA_POLICIES:
        raise PartitionError(f"unknown non-alphabetic policy {non_alpha!r}")
    identities = set(identities)
    if not identities:
        raise PartitionError("cannot partition an empty identity set")
    buckets: dict[str, set] = {}
    dropped = set()
    for ident in identities:
        lbl = _proxy_label(ident)
        if lbl is None:
            if non_alpha == "reject":
                raise PartitionError(f"identity {ident!r} does not start with a letter A-Z")
            if non_alpha == "drop":
                dropped.add(ident)
                continue
            lbl = OTHER_LABEL
        buckets.setdefault(lbl, set()).add(ident)
    return GroupPartition("proxy", tuple(buckets.items()), frozenset(dropped))


def intersect_partitions(p: GroupPartition, q: GroupPartition) -> GroupPartition:
    """Cells of the product partition that contain at least one identity.

    Labels read ``p_label×q_label``. Identities present in only one input
    are recorded as dropped.
    """
    cells = []
    for lp, ip in p.groups:
        for lq, iq in q.groups:
            common = ip & iq
            if common:
                cells.append((f"{lp}×{lq}", common))
    in_p = set().union(*(ids for _, ids in p.groups)) if p.groups else set()
    in_q = set().union(*(ids for _, ids in q.groups)) if q.groups else set()
    dropped = (in_p ^ in_q) | p.dropped | q.dropped
    out = GroupPartition(f"{p.name}×{q.name}", tuple(cells), frozenset(dropped))
    if out.k < 2:
        raise PartitionError(f"intersection {out.name!r} has {out.k} non-empty group(s)")
    return out


@dataclass(frozen=True)
class PairGroupAssignment:
    """Group memberships of each pair, aligned with the score list.

    ``memberships[i]`` is a tuple of group labels: empty when the pair is
    unassigned, two labels only under the ``duplicate`` policy.
    """

    partition: GroupPartition
    policy: str
    memberships: tuple[tuple[str, ...], ...]
    n_cross_group: int = 0
    n_unknown_identity: int = 0

    @property
    def n_unassigned(self) -> int:
        return sum(1 for m in self.memberships if not m)

    def indices(self, label: str) -> list[int]:
        return [i for i, m in enumerate(self.memberships) if label in m]

    def diagnostics(self) -> dict[str, int]:
        return {
            "pairs_total": len(self.memberships),
            "pairs_unassigned": self.n_unassigned,
            "cross_group_pairs": self.n_cross_group,
            "pairs_with_ungrouped_identity": self.n_unknown_identity,
        }


def assign_pairs(
    scores: Sequence[LabeledScore],
    partition: GroupPartition,
    policy: str = "exclude",
) -> PairGroupAssignment:
    """Assign each pair to the group holding both of its identities.

    Cross-group impostor pairs are dropped under ``exclude`` and counted in
    both groups under ``duplicate``. Pairs touching an identity outside the
    partition stay unassigned.
    """
    if policy not in CROSS_GROUP_POLICIES:
        raise PartitionError(f"unknown cross-group policy {policy!r}")
    memberships = []
    n_cross = 0
    n_unknown = 0
    for s in scores:
        ga = partition.group_of(s.identity_a)
        gb = partition.group_of(s.identity_b)
        if ga is None or gb is None:
            n_unknown += 1
            memberships.append(())
        elif ga == gb:
            memberships.append((ga,))
        else:
            n_cross += 1
            memberships.append(tuple(sorted((ga, gb))) if policy == "duplicate" else ())
    return PairGroupAssignment(partition, policy, tuple(memberships), n_cross, n_unknown)
