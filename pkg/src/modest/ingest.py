"""Build an instance from a delimited record file.

Each well-formed row is one individual, counted under its (box, community)
label pair. Labels are sorted lexicographically so the same file always gives
the same matrix. A row is malformed when it is too short for the requested
columns or either label is empty after normalization.
"""

import csv
import enum
from collections import Counter
from dataclasses import dataclass
from typing import Union

import numpy as np

from .instance import InstanceError, build_instance

MAX_MALFORMED_FRACTION = 0.10


class IngestError(ValueError):
    pass


class Normalization(enum.Enum):
    NONE = "none"
    TRIM = "trim"
    TRIM_CASEFOLD = "trim+casefold"

    def apply(self, label):
        if self is Normalization.NONE:
            return label
        label = label.strip()
        if self is Normalization.TRIM_CASEFOLD:
            label = label.casefold()
        return label


@dataclass(frozen=True)
class IngestSpec:
    path: str
    box_column: Union[str, int]
    community_column: Union[str, int]
    delimiter: str = ","
    has_header: bool = True
    label_normalization: Normalization = Normalization.NONE

    def __post_init__(self):
        if self.box_column == self.community_column:
            raise IngestError("box and community columns must differ")
        object.__setattr__(self, "label_normalization", Normalization(self.label_normalization))


@dataclass(frozen=True)
class IngestReport:
    rows: int
    malformed: int


def _resolve(col, header):
    """Column index from a name or an index (ints, or digit strings without a header match)."""
    if isinstance(col, int):
        return col
    if header is not None and col in header:
        return header.index(col)
    if str(col).isdigit():
        return int(col)
    raise IngestError(f"column {col!r} not found" + (f" in header {header}" if header else ""))


def ingest_csv(spec, report=None):
    """Read ``spec.path`` into an :class:`~modest.instance.Instance`.

    ``report``, if a list, receives one :class:`IngestReport`.
    """
    norm = spec.label_normalization
    pairs = Counter()
    rows = malformed = 0
    try:
        fh = open(spec.path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read {spec.path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh, delimiter=spec.delimiter)
        header = next(reader, None) if spec.has_header else None
        bi = _resolve(spec.box_column, header)
        ci = _resolve(spec.community_column, header)
        if bi == ci:
            raise IngestError("box and community columns resolve to the same index")
        if header is not None and max(bi, ci) >= len(header):
            raise IngestError(f"column index {max(bi, ci)} out of range for header of {len(header)}")
        for rec in reader:
            if not rec:
                continue
            rows += 1
            if max(bi, ci) >= len(rec):
                malformed += 1
                continue
            box, comm = norm.apply(rec[bi]), norm.apply(rec[ci])
            if not box or not comm:
                malformed += 1
                continue
            pairs[box, comm] += 1
    if rows and malformed / rows > MAX_MALFORMED_FRACTION:
        raise IngestError(f"{malformed} of {rows} rows malformed (limit {MAX_MALFORMED_FRACTION:.0%})")
    if report is not None:
        report.append(IngestReport(rows, malformed))
    boxes = sorted({b for b, _ in pairs})
    comms = sorted({c for _, c in pairs})
    if not pairs:
        raise IngestError("no well-formed rows: the instance would be all zero")
    bpos = {b: i for i, b in enumerate(boxes)}
    cpos = {c: j for j, c in enumerate(comms)}
    counts = np.zeros((len(boxes), len(comms)), dtype=np.int64)
    for (b, c), n in pairs.items():
        counts[bpos[b], cpos[c]] = n
    try:
        return build_instance(counts, boxes, comms)
    except InstanceError as exc:
        raise IngestError(str(exc)) from exc
