"""Reading interlaboratory study files and building balanced datasets.

Input files are CSV with a ``lab,dose,response`` header.  Doses must already
be on the design scale the analysis should use (for example a control group
encoded as a positive value on a geometric grid); the only dose operations
performed here are an optional log10 transform and centering.
"""

from __future__ import annotations

import csv
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DOSE_TRANSFORMS = ("log10", "identity")
RESPONSE_TRANSFORMS = ("natural_log", "log10", "identity")
REQUIRED_COLUMNS = ("lab", "dose", "response")

DOSE_TOL = 1e-9
CENTER_TOL = 1e-9


class IngestError(Exception):
    """Base class for problems with study input."""


class ParseError(IngestError):
    """A file could not be read or a row could not be parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class TransformError(IngestError):
    """A transform cannot be applied to the supplied values."""


class BalanceError(IngestError):
    """The data do not form a fully balanced design."""

    def __init__(self, report: "BalanceReport"):
        self.report = report
        super().__init__("unbalanced design:\n" + "\n".join("  " + v for v in report.violations))


@dataclass(frozen=True)
class TransformSpec:
    dose_transform: str = "log10"
    center_doses: bool = True
    response_transform: str = "natural_log"

    def __post_init__(self):
        if self.dose_transform not in DOSE_TRANSFORMS:
            raise ValueError(f"unknown dose transform {self.dose_transform!r}")
        if self.response_transform not in RESPONSE_TRANSFORMS:
            raise ValueError(f"unknown response transform {self.response_transform!r}")

    def as_dict(self) -> dict:
        return {
            "dose_transform": self.dose_transform,
            "center_doses": self.center_doses,
            "response_transform": self.response_transform,
        }


IDENTITY = TransformSpec("identity", False, "identity")


@dataclass(frozen=True)
class RawRow:
    lab: str
    dose: float
    response: float
    line: int | None = None


@dataclass(frozen=True)
class RawTable:
    rows: tuple[RawRow, ...]
    source: str | None = None

    def __len__(self):
        return len(self.rows)

    @property
    def labs(self) -> list[str]:
        return list(OrderedDict.fromkeys(r.lab for r in self.rows))

    @property
    def doses(self) -> list[float]:
        return sorted(set(r.dose for r in self.rows))


@dataclass(frozen=True)
class Dataset:
    """Balanced study data ready for analysis.

    Attributes
    ----------
    labs : tuple of str
        Laboratory ids, in order of first appearance.
    x : ndarray, shape (n,)
        Common dose vector (sorted, replicates repeated).
    y : ndarray, shape (m, n)
        Responses; ``y[i, j]`` pairs with ``x[j]``.
    """

    labs: tuple[str, ...]
    x: np.ndarray
    y: np.ndarray

    @property
    def m(self) -> int:
        return len(self.labs)

    @property
    def n(self) -> int:
        return len(self.x)


@dataclass
class BalanceReport:
    violations: list[str] = field(default_factory=list)

    def __bool__(self):
        return bool(self.violations)


def _parse_float(text, what, path, line):
    try:
        val = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"cannot parse {what} {text!r}", path, line) from None
    if not math.isfinite(val):
        raise ParseError(f"{what} must be finite, got {text!r}", path, line)
    return val


def parse_csv(path, spec: TransformSpec | None = None) -> RawTable:
    """Read a ``lab,dose,response`` CSV file.

    Rows are returned in file order without any transform.  If ``spec`` is
    given, values that a log transform could not handle are rejected here
    so the error can name the offending line.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open file ({exc.strerror})", path) from None
    rows = []
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty", path, 1) from None
        header = [h.strip().lower() for h in header]
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"missing column(s): {', '.join(missing)}", path, 1)
        idx = {c: header.index(c) for c in REQUIRED_COLUMNS}
        for record in reader:
            line = reader.line_num
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, found {len(record)}", path, line
                )
            lab = record[idx["lab"]].strip()
            if not lab:
                raise ParseError("empty lab id", path, line)
            dose = _parse_float(record[idx["dose"]].strip(), "dose", path, line)
            resp = _parse_float(record[idx["response"]].strip(), "response", path, line)
            if spec is not None:
                if spec.dose_transform == "log10" and dose <= 0:
                    raise TransformError(f"{path}:{line}: log10 dose transform needs doses > 0")
                if spec.response_transform != "identity" and resp <= 0:
                    raise TransformError(
                        f"{path}:{line}: {spec.response_transform} response transform "
                        "needs responses > 0"
                    )
            rows.append(RawRow(lab, dose, resp, line))
    if not rows:
        raise ParseError("no data rows", path)
    return RawTable(tuple(rows), str(path))


def table_from_records(records: Iterable[Sequence]) -> RawTable:
    """Build a RawTable from in-memory ``(lab, dose, response)`` triples."""
    rows = tuple(RawRow(str(lab), float(d), float(r)) for lab, d, r in records)
    return RawTable(rows)


def _transform_dose(value: float, how: str) -> float:
    if how == "identity":
        return value
    if value <= 0:
        raise TransformError(f"log10 dose transform needs doses > 0, got {value}")
    return math.log10(value)


def _transform_response(value: float, how: str) -> float:
    if how == "identity":
        return value
    if value <= 0:
        raise TransformError(f"{how} response transform needs responses > 0, got {value}")
    return math.log(value) if how == "natural_log" else math.log10(value)


def validate_balanced(groups, require_centered: bool = True):
    """Check that grouped observations form a fully balanced design.

    Parameters
    ----------
    groups : mapping of lab id -> sequence of (x, y) pairs
        Observations already on the analysis scale.
    require_centered : bool
        Also require the common dose vector to have zero mean.

    Returns
    -------
    Dataset or BalanceReport
        A Dataset when every check passes, otherwise a report listing every
        violation found.  Never raises for data problems.
    """
    report = BalanceReport()
    labs = list(groups)
    if len(labs) < 2:
        report.violations.append(f"need at least 2 labs, found {len(labs)}")
    if not labs:
        return report

    sorted_groups = {lab: sorted(groups[lab], key=lambda p: p[0]) for lab in labs}
    counts = {lab: len(v) for lab, v in sorted_groups.items()}
    ref_lab = labs[0]
    ref_x = np.array([p[0] for p in sorted_groups[ref_lab]], dtype=float)
    n = len(ref_x)

    if len(set(counts.values())) > 1:
        expected = max(set(counts.values()), key=list(counts.values()).count)
        for lab, c in counts.items():
            if c != expected:
                report.violations.append(
                    f"lab {lab!r} has {c} observations, others have {expected}"
                )
    else:
        for lab in labs[1:]:
            xs = np.array([p[0] for p in sorted_groups[lab]], dtype=float)
            if np.any(np.abs(xs - ref_x) > DOSE_TOL):
                missing = _multiset_diff(ref_x, xs)
                extra = _multiset_diff(xs, ref_x)
                parts = []
                if missing:
                    parts.append("missing dose(s) " + ", ".join(f"{v:g}" for v in missing))
                if extra:
                    parts.append("extra dose(s) " + ", ".join(f"{v:g}" for v in extra))
                detail = "; ".join(parts) or "dose values differ"
                report.violations.append(
                    f"lab {lab!r} dose levels differ from lab {ref_lab!r}: {detail}"
                )

    if n < 3:
        report.violations.append(f"need at least 3 observations per lab, found {n}")
    if n and len(np.unique(ref_x)) < 2:
        report.violations.append("need at least 2 distinct dose values")
    if require_centered and n:
        mean = math.fsum(ref_x) / n
        if abs(mean) > CENTER_TOL:
            report.violations.append(
                f"dose vector is not centered: mean {mean:.6g} exceeds tolerance {CENTER_TOL:g}"
            )

    if report:
        return report
    y = np.array([[p[1] for p in sorted_groups[lab]] for lab in labs], dtype=float)
    ref_x.setflags(write=False)
    y.setflags(write=False)
    return Dataset(tuple(labs), ref_x, y)


def _multiset_diff(a, b):
    # values of a with no match (within DOSE_TOL) in b, multiplicity aware
    pool = list(b)
    out = []
    for v in a:
        for k, w in enumerate(pool):
            if abs(v - w) <= DOSE_TOL:
                del pool[k]
                break
        else:
            out.append(float(v))
    return out


def apply_transforms(raw: RawTable, spec: TransformSpec) -> Dataset:
    """Transform, group by lab, center and validate a raw table.

    Raises
    ------
    TransformError
        A value is outside the domain of a log transform.
    BalanceError
        The design is not fully balanced.
    """
    groups: dict[str, list] = OrderedDict()
    for row in raw.rows:
        try:
            x = _transform_dose(row.dose, spec.dose_transform)
            y = _transform_response(row.response, spec.response_transform)
        except TransformError as exc:
            if row.line is not None and raw.source is not None:
                raise TransformError(f"{raw.source}:{row.line}: {exc}") from None
            raise
        groups.setdefault(row.lab, []).append((x, y))

    result = validate_balanced(groups, require_centered=not spec.center_doses)
    if isinstance(result, BalanceReport):
        raise BalanceError(result)
    if not spec.center_doses:
        return result

    shift = math.fsum(result.x) / result.n
    x = result.x - shift
    x.setflags(write=False)
    return Dataset(result.labs, x, result.y)


def load_dataset(path, spec: TransformSpec) -> Dataset:
    return apply_transforms(parse_csv(path, spec), spec)


def example_path(name: str) -> Path:
    """Path of a bundled example study (``"ldh"`` or ``"tp"``)."""
    ref = resources.files("interlab") / "data" / f"{name}.csv"
    with resources.as_file(ref) as p:
        return Path(p)
