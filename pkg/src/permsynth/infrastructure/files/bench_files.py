"""Benchmark CSV files: records, ratio summary and histogram data."""

from pathlib import Path
from typing import Any, TypeVar

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from permsynth.core.exceptions import FileFormatError
from permsynth.domain.entities.benchmark import BenchRecord, HistogramBin, RatioRow

RECORD_COLUMNS = ["topology", "instance", "method", "gates", "depth", "time_ns", "verified", "attempts"]
SUMMARY_COLUMNS = [
    "topology",
    "method",
    "frac_lt_095_gates",
    "frac_gt_105_gates",
    "frac_lt_095_depth",
    "frac_gt_105_depth",
    "mean_time_ratio",
    "failures",
    "compared",
    "excluded_identity",
]
HISTOGRAM_COLUMNS = ["topology", "method", "metric", "bin_low", "bin_high", "count"]

RATIO_NOTE = "# ratio = method / generic; values above 1 mean the generic model wins\n"

ModelT = TypeVar("ModelT", bound=BaseModel)


def _write(rows: list[BaseModel], columns: list[str], path: Path, note: str = "") -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame([row.model_dump(mode="json") for row in rows], columns=columns)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(note)
            frame.to_csv(f, index=False, lineterminator="\n")
    except OSError as e:
        raise FileFormatError(f"cannot write file: {e}", path) from e
    return path


def _native(value: Any) -> Any:
    """NaN becomes None and numpy scalars become Python scalars."""
    if pd.isna(value):
        return None
    return value.item() if isinstance(value, np.generic) else value


def _read(path: Path, columns: list[str], model: type[ModelT]) -> list[ModelT]:
    path = Path(path)
    try:
        frame = pd.read_csv(path, comment="#", dtype={"topology": str, "method": str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FileFormatError(f"cannot parse CSV: {e}", path) from e
    if list(frame.columns) != columns:
        raise FileFormatError(f"unexpected columns {list(frame.columns)}", path)

    rows: list[ModelT] = []
    for number, record in enumerate(frame.to_dict(orient="records"), start=2):
        values: dict[str, Any] = {k: _native(v) for k, v in record.items()}
        try:
            rows.append(model.model_validate(values))
        except ValidationError as e:
            raise FileFormatError(f"invalid row: {e}", path, number) from e
    return rows


def write_records(records: list[BenchRecord], path: Path) -> Path:
    """One row per (instance, method); ``verified`` False marks a failure."""
    return _write(list(records), RECORD_COLUMNS, path)


def read_records(path: Path) -> list[BenchRecord]:
    return _read(path, RECORD_COLUMNS, BenchRecord)


def write_summary(rows: list[RatioRow], path: Path) -> Path:
    """Ratio table; the first line states the ratio orientation."""
    return _write(list(rows), SUMMARY_COLUMNS, path, note=RATIO_NOTE)


def read_summary(path: Path) -> list[RatioRow]:
    return _read(path, SUMMARY_COLUMNS, RatioRow)


def write_histograms(bins: list[HistogramBin], path: Path) -> Path:
    """Histogram counts; open bins (underflow/overflow) leave one bound empty."""
    return _write(list(bins), HISTOGRAM_COLUMNS, path, note=RATIO_NOTE)


def read_histograms(path: Path) -> list[HistogramBin]:
    return _read(path, HISTOGRAM_COLUMNS, HistogramBin)
