"""Problem instances: the box x community count matrix."""

import enum
import json
from dataclasses import dataclass, field

import numpy as np


class InstanceError(ValueError):
    """Raised for malformed instance data."""


class Setting(enum.Enum):
    MIXED = "Mixed"
    SEPARATED = "Separated"
    DISJOINT_BOX = "DisjointBox"
    GENERAL = "General"


@dataclass(frozen=True, eq=False)
class Instance:
    """A validated ``b x m`` matrix of non-negative individual counts.

    Row ``i`` is box ``i``, column ``j`` is community ``j``; entry ``[i, j]``
    is the number of individuals of community ``j`` living in box ``i``.
    """

    counts: np.ndarray
    box_labels: tuple
    community_labels: tuple

    def __post_init__(self):
        self.counts.setflags(write=False)

    @property
    def b(self):
        return self.counts.shape[0]

    @property
    def m(self):
        return self.counts.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.box_labels == other.box_labels
            and self.community_labels == other.community_labels
            and np.array_equal(self.counts, other.counts)
        )

    def __hash__(self):
        return hash((self.box_labels, self.community_labels, self.counts.tobytes()))

    def to_json(self):
        return {
            "boxes": list(self.box_labels),
            "communities": list(self.community_labels),
            "counts": self.counts.tolist(),
        }


@dataclass(frozen=True)
class InstanceSummary:
    box_sizes: tuple
    community_sizes: tuple
    total: int
    mode_set: frozenset = field(default_factory=frozenset)

    @property
    def unique_mode(self):
        return len(self.mode_set) == 1


def _labels(labels, n, default_prefix):
    if labels is None:
        return tuple(f"{default_prefix}{k}" for k in range(n))
    labels = tuple(str(x) for x in labels)
    if len(labels) != n:
        raise InstanceError(f"expected {n} {default_prefix} labels, got {len(labels)}")
    if len(set(labels)) != n:
        raise InstanceError(f"duplicate {default_prefix} labels")
    return labels


def build_instance(counts, box_labels=None, community_labels=None):
    """Validate ``counts`` and wrap it as an :class:`Instance`.

    Labels default to ``box0, box1, ...`` and ``c0, c1, ...``.
    """
    rows = [list(r) for r in counts]
    if not rows or not rows[0]:
        raise InstanceError("instance needs at least one box and one community")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InstanceError("count matrix is not rectangular")
    for r in rows:
        for v in r:
            if isinstance(v, bool) or int(v) != v:
                raise InstanceError(f"non-integer entry {v!r}")
    arr = np.array(rows, dtype=np.int64)
    if (arr < 0).any():
        raise InstanceError("negative entry in count matrix")
    if not arr.any():
        raise InstanceError("all-zero count matrix")
    if arr.sum(axis=1).max() > 1 << 32:
        raise InstanceError("box larger than 2**32 individuals")
    return Instance(
        counts=arr,
        box_labels=_labels(box_labels, arr.shape[0], "box"),
        community_labels=_labels(community_labels, arr.shape[1], "c"),
    )


def summarize(inst):
    box_sizes = inst.counts.sum(axis=1)
    comm_sizes = inst.counts.sum(axis=0)
    top = comm_sizes.max()
    return InstanceSummary(
        box_sizes=tuple(int(x) for x in box_sizes),
        community_sizes=tuple(int(x) for x in comm_sizes),
        total=int(box_sizes.sum()),
        mode_set=frozenset(int(j) for j in np.flatnonzero(comm_sizes == top)),
    )


def is_disjoint(inst):
    """True when every non-empty community lives in exactly one box."""
    nz = (inst.counts > 0).sum(axis=0)
    return bool((nz <= 1).all())


def classify_setting(inst):
    """Mixed, then Separated, then DisjointBox, else General."""
    if inst.b == 1:
        return Setting.MIXED
    nz = inst.counts > 0
    rows = nz.any(axis=1)
    cols = nz.any(axis=0)
    core = nz[rows][:, cols]
    if (core.sum(axis=0) <= 1).all() and (core.sum(axis=1) <= 1).all() and core.shape[0] == core.shape[1]:
        return Setting.SEPARATED
    if (nz.sum(axis=0) == 1).all():
        return Setting.DISJOINT_BOX
    return Setting.GENERAL


def write_instance(inst, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(inst.to_json(), fh, indent=1)
        fh.write("\n")


def instance_from_json(doc):
    try:
        return build_instance(doc["counts"], doc["boxes"], doc["communities"])
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"bad instance document: {exc}") from exc


def read_instance(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{path}: {exc}") from exc
    return instance_from_json(doc)
