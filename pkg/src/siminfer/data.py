"""Sample and hypothesis representations, CSV ingestion, and manifest validation.

The universal input everywhere else is :class:`TwoGroupSample`: one column of
quantitative outcomes and one binary assignment vector. Group membership may be
encoded with any two labels in the source file; the caller names the treated one.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Base class for ingestion and validation failures."""


class SchemaError(DataError):
    """A required column is missing from the CSV header."""


class ParseError(DataError):
    """A cell could not be parsed; the message names the offending row."""


class ValidationError(DataError):
    """Structurally valid input that violates a sample invariant."""


@dataclass(frozen=True)
class TwoGroupSample:
    """Observed outcomes with binary group assignments.

    Attributes:
        outcomes: outcome values Y_i, one per unit, original row order.
        assignments: W_i in {0, 1}, same length; 1 marks the treated group.
    """

    outcomes: np.ndarray
    assignments: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.outcomes, dtype=np.float64)
        w = np.asarray(self.assignments, dtype=np.int64)
        if y.ndim != 1 or w.ndim != 1 or y.size != w.size:
            raise ValidationError("outcomes and assignments must be equal-length vectors")
        if y.size < 4:
            raise ValidationError(f"need at least 4 units, got {y.size}")
        if not np.all(np.isfinite(y)):
            raise ValidationError("all outcome values must be finite")
        if not np.all((w == 0) | (w == 1)):
            raise ValidationError("assignments must be 0 or 1")
        n1 = int(w.sum())
        if n1 < 2 or y.size - n1 < 2:
            raise ValidationError(
                f"each group needs at least 2 units, got n1={n1}, n0={y.size - n1}"
            )
        # freeze so samples can be shared across workers without copying
        y.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "assignments", w)

    @property
    def n(self) -> int:
        return self.outcomes.size

    @property
    def n1(self) -> int:
        return int(self.assignments.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def p(self) -> float:
        return self.n1 / self.n

    def group(self, w: int) -> np.ndarray:
        """Outcomes of group ``w`` (0 or 1), in original order."""
        return self.outcomes[self.assignments == w]


@dataclass(frozen=True)
class SharpNull:
    """No difference whatsoever: both potential outcomes equal for every unit."""


@dataclass(frozen=True)
class AdditiveShift:
    """Y(1) = Y(0) + a for every unit."""

    a: float

    def __post_init__(self):
        if not math.isfinite(self.a):
            raise ValidationError("additive shift a must be finite")


@dataclass(frozen=True)
class EqualMeans:
    """Only the group means are hypothesized equal; shapes may differ.

    The common target mean b is irrelevant to the difference in means and is
    kept only because the shifted-outcome construction mentions one.
    """

    b: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.b):
            raise ValidationError("equal-means b must be finite")


Hypothesis = SharpNull | AdditiveShift | EqualMeans


def shift_amount(hypothesis: SharpNull | AdditiveShift) -> float:
    """Additive shift a implied by a reallocation-compatible hypothesis.

    SharpNull and AdditiveShift(0) are the same hypothesis as far as any
    operation here is concerned; both map to 0.
    """
    if isinstance(hypothesis, SharpNull):
        return 0.0
    if isinstance(hypothesis, AdditiveShift):
        return hypothesis.a
    raise ValidationError(f"no additive shift for {type(hypothesis).__name__}")


@dataclass(frozen=True)
class DatasetManifest:
    """Published summary statistics a fixture must reproduce before use.

    All expected_* statistics are compared at 3 decimal places, half-even.
    """

    name: str
    expected_n1: int
    expected_n0: int
    expected_mean1: float
    expected_mean0: float
    expected_sd_grand: float
    expected_sd1: float
    expected_sd0: float

    @classmethod
    def from_json_text(cls, text: str) -> "DatasetManifest":
        raw = json.loads(text)
        try:
            return cls(
                name=str(raw["name"]),
                expected_n1=int(raw["expected_n1"]),
                expected_n0=int(raw["expected_n0"]),
                expected_mean1=float(raw["expected_mean1"]),
                expected_mean0=float(raw["expected_mean0"]),
                expected_sd_grand=float(raw["expected_sd_grand"]),
                expected_sd1=float(raw["expected_sd1"]),
                expected_sd0=float(raw["expected_sd0"]),
            )
        except KeyError as missing:
            raise SchemaError(f"manifest missing field {missing}") from None


@dataclass(frozen=True)
class ManifestCheck:
    """Truthy iff the sample matched; mismatches lists every failed field."""

    ok: bool
    mismatches: tuple[str, ...] = field(default_factory=tuple)

    def __bool__(self) -> bool:
        return self.ok


def load_two_group_sample(
    csv_text: str,
    outcome_column: str,
    group_column: str,
    treated_label: str,
) -> TwoGroupSample:
    """Parse CSV text into a sample, preserving row order.

    Rows whose group column equals ``treated_label`` get W=1, all others W=0.
    The group column must contain exactly two distinct values, one of which is
    the treated label.
    """
    reader = csv.DictReader(io.StringIO(csv_text))
    if reader.fieldnames is None:
        raise SchemaError("CSV has no header row")
    for col in (outcome_column, group_column):
        if col not in reader.fieldnames:
            raise SchemaError(f"column {col!r} not in header {reader.fieldnames}")
    outcomes: list[float] = []
    labels: list[str] = []
    for i, row in enumerate(reader, start=2):  # row 1 is the header
        raw = row[outcome_column]
        try:
            value = float(raw)
        except (TypeError, ValueError):
            raise ParseError(f"row {i}: non-numeric outcome {raw!r}") from None
        if not math.isfinite(value):
            raise ParseError(f"row {i}: non-finite outcome {raw!r}")
        outcomes.append(value)
        labels.append(row[group_column])
    distinct = sorted(set(labels))
    if len(distinct) != 2:
        raise ValidationError(f"group column must have exactly 2 labels, got {distinct}")
    if treated_label not in distinct:
        raise ValidationError(f"treated label {treated_label!r} not among {distinct}")
    w = np.fromiter((1 if lab == treated_label else 0 for lab in labels), dtype=np.int64)
    return TwoGroupSample(np.asarray(outcomes), w)


def sample_to_csv(
    sample: TwoGroupSample,
    outcome_column: str,
    group_column: str,
    treated_label: str,
    control_label: str,
) -> str:
    """Inverse of load_two_group_sample; outcomes rendered with repr precision."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([outcome_column, group_column])
    for y, w in zip(sample.outcomes, sample.assignments):
        writer.writerow([repr(float(y)), treated_label if w == 1 else control_label])
    return out.getvalue()


def _round3(x: float) -> float:
    # Python's round is half-even, the convention used for all manifest fields.
    return round(float(x), 3)


def validate_manifest(sample: TwoGroupSample, manifest: DatasetManifest) -> ManifestCheck:
    """Check counts exactly and summary statistics to 3 decimals (half-even)."""
    y1 = sample.group(1)
    y0 = sample.group(0)
    observed = {
        "expected_n1": sample.n1,
        "expected_n0": sample.n0,
        "expected_mean1": _round3(y1.mean()),
        "expected_mean0": _round3(y0.mean()),
        "expected_sd_grand": _round3(sample.outcomes.std(ddof=1)),
        "expected_sd1": _round3(y1.std(ddof=1)),
        "expected_sd0": _round3(y0.std(ddof=1)),
    }
    mismatches = []
    for fname, got in observed.items():
        want = getattr(manifest, fname)
        want = want if fname.startswith("expected_n") else _round3(want)
        if got != want:
            mismatches.append(f"{fname}: expected {want}, sample has {got}")
    return ManifestCheck(ok=not mismatches, mismatches=tuple(mismatches))


def fixture_path(name: str) -> Path:
    """Filesystem path of a packaged fixture file, e.g. 'sleep_caffeine.csv'."""
    path = resources.files("siminfer").joinpath("fixtures", name)
    return Path(str(path))


def load_fixture(stem: str, outcome_column: str, group_column: str, treated_label: str):
    """Load a packaged fixture and its manifest; returns (sample, manifest)."""
    csv_text = fixture_path(f"{stem}.csv").read_text(encoding="utf-8")
    manifest = DatasetManifest.from_json_text(
        fixture_path(f"{stem}.manifest.json").read_text(encoding="utf-8")
    )
    return load_two_group_sample(csv_text, outcome_column, group_column, treated_label), manifest
