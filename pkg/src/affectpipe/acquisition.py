"""Dataset scanning and CSV signal loading.

Datasets follow the standard layout::

    {source_folder}/
        {subject}/
            {subject}_{phase}_{modality}.csv
            {subject}_reports.csv          (optional self-reports)

Each signal CSV has a header row ``timestamp,<MODALITY>`` with numeric
cells.  Phase names may not contain underscores (the filename grammar would
otherwise be ambiguous) and subject ids may not contain ``/``.
"""

from __future__ import annotations

import csv
import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateSignalFile,
    EmptyDataset,
    IOFailure,
    MissingHeader,
    MissingReport,
    NonNumericCell,
    ValidationFailed,
)
from .types import Modality, SubjectBundle, TimeSeries


@dataclass(frozen=True)
class SignalRegistry:
    """Known modalities, keyed by upper-cased name."""

    modalities: dict[str, Modality]

    def __post_init__(self):
        object.__setattr__(
            self, "modalities", {m.name.upper(): m for m in self.modalities.values()}
        )

    @classmethod
    def from_file(cls, path) -> "SignalRegistry":
        """Load line-oriented ``name,unit,default_sample_rate_hz`` records."""
        modalities = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, unit, rate = (part.strip() for part in line.split(","))
            rate_hz = None if rate.lower() in ("", "unspecified") else float(rate)
            modalities[name.upper()] = Modality(name.upper(), unit, rate_hz)
        return cls(modalities)

    @classmethod
    def default(cls) -> "SignalRegistry":
        ref = importlib.resources.files("affectpipe") / "modalities.csv"
        with importlib.resources.as_file(ref) as path:
            return cls.from_file(path)

    def lookup(self, name: str) -> Modality | None:
        return self.modalities.get(name.upper())

    def names(self) -> list[str]:
        return sorted(self.modalities)


@dataclass(frozen=True)
class DatasetIndex:
    root: Path
    #: subject -> list of (phase, Modality, file path)
    subjects: dict[str, tuple[tuple[str, Modality, Path], ...]]
    skipped_files: tuple[Path, ...] = ()
    #: per-subject self-report CSVs found during the scan
    report_files: dict[str, Path] = field(default_factory=dict)


def _parse_signal_filename(filename: str, subject: str):
    """Return (phase, modality_name) or None when the name is not a signal file."""
    if not filename.endswith(".csv"):
        return None
    stem = filename[:-4]
    prefix = subject + "_"
    if not stem.startswith(prefix):
        return None
    parts = stem[len(prefix):].split("_")
    if len(parts) != 2:
        return None
    return parts[0], parts[1]


def scan_dataset(root, registry: SignalRegistry | None = None) -> DatasetIndex:
    """Index every conforming signal file under ``root``.

    Files with unregistered modalities land in the skipped-files report
    rather than raising.  Duplicate (phase, modality) files for a subject
    are rejected: the layout gives no precedence rule.
    """
    registry = registry or SignalRegistry.default()
    root = Path(root)
    if not root.is_dir():
        raise IOFailure(f"dataset root {root} is not a directory")
    subjects = {}
    skipped = []
    report_files = {}
    for subject_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        subject = subject_dir.name
        entries = []
        seen = set()
        for f in sorted(subject_dir.iterdir()):
            if not f.is_file():
                continue
            if f.name == f"{subject}_reports.csv":
                report_files[subject] = f
                continue
            parsed = _parse_signal_filename(f.name, subject)
            if parsed is None:
                skipped.append(f)
                continue
            phase, modality_name = parsed
            modality = registry.lookup(modality_name)
            if modality is None:
                skipped.append(f)
                continue
            key = (phase, modality.name)
            if key in seen:
                raise DuplicateSignalFile(f"duplicate {key} for subject {subject!r}")
            seen.add(key)
            entries.append((phase, modality, f))
        if entries:
            subjects[subject] = tuple(entries)
    if not subjects:
        raise EmptyDataset(f"no subject folders with signal files under {root}")
    return DatasetIndex(root, subjects, tuple(skipped), report_files)


def load_csv_signal(path, modality: Modality, subject: str, phase: str) -> TimeSeries:
    """Parse one ``timestamp,<MODALITY>`` CSV into a validated TimeSeries."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise MissingHeader("timestamp") from None
            header = [h.strip() for h in header]
            lowered = [h.lower() for h in header]
            if "timestamp" not in lowered:
                raise MissingHeader("timestamp")
            if modality.name.lower() not in lowered:
                raise MissingHeader(modality.name)
            t_col = lowered.index("timestamp")
            v_col = lowered.index(modality.name.lower())
            timestamps, values = [], []
            for i, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    timestamps.append(float(row[t_col]))
                    values.append(float(row[v_col]))
                except (ValueError, IndexError):
                    raise NonNumericCell(i) from None
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    if len(timestamps) < 2:
        raise ValidationFailed(["fewer than 2 samples"])
    deltas = np.diff(timestamps)
    fs = 1.0 / float(np.median(deltas)) if np.all(deltas > 0) else 1.0
    # TimeSeries construction re-runs validate_time_series and raises
    # ValidationFailed with every violation
    return TimeSeries(subject, phase, modality, timestamps, values, fs)


def write_csv_signal(series: TimeSeries, path, precision: int = 12):
    """Serialize back to the CSV contract (inverse of load, up to formatting)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", series.modality.name])
        for t, v in zip(series.timestamps, series.values):
            writer.writerow([f"{t:.{precision}g}", f"{v:.{precision}g}"])


@dataclass(frozen=True)
class AcquisitionResult:
    bundle: SubjectBundle
    #: subjects dropped because a requested modality was missing in some phase
    excluded_subjects: tuple[str, ...] = ()
    skipped_files: tuple[Path, ...] = ()


def acquire(index: DatasetIndex, signal_types, strict: bool = False) -> AcquisitionResult:
    """Load every indexed series whose modality was requested.

    A subject missing any requested modality in any of its phases is
    excluded and reported (or escalated to an error in strict mode),
    mirroring how incomplete subjects are dropped from study datasets.
    """
    wanted = [m.name.upper() if isinstance(m, Modality) else str(m).upper()
              for m in signal_types]
    if not wanted:
        raise EmptyDataset("no signal types requested")
    entries = {}
    excluded = []
    for subject, files in sorted(index.subjects.items()):
        phases = sorted({phase for phase, _, _ in files})
        have = {(phase, mod.name) for phase, mod, _ in files}
        complete = all((phase, m) in have for phase in phases for m in wanted)
        if not complete:
            excluded.append(subject)
            continue
        series = [
            load_csv_signal(path, modality, subject, phase)
            for phase, modality, path in files
            if modality.name in wanted
        ]
        entries[subject] = tuple(series)
    if strict and excluded:
        raise MissingReport(f"subjects missing requested modalities: {excluded}")
    if not entries:
        raise EmptyDataset("no subject has all requested modalities")
    return AcquisitionResult(SubjectBundle(entries), tuple(excluded), index.skipped_files)
