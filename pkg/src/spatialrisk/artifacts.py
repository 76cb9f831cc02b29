import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from types import TracebackType
from typing import Optional, Type

from deepdiff import DeepDiff

from .errors import ConfigError, SpatialRiskError
from .risk import RiskCurve

"""Curve, table and report artifacts.

Writers collect everything in memory and write the file once, when the `with` block ends without error;
an interrupted run leaves no partial artifact behind.
"""

CURVE_HEADER = ("lambda", "value", "err", "limit")
THETA_HEADER = ("h", "theta")


def format_number(value: float | None) -> str:
    return "" if value is None else f"{value:.17g}"


def _parse_cell(cell: str) -> float | str | None:
    if cell == "":
        return None
    try:
        return float(cell)
    except ValueError:
        return cell


class Artifact:
    def __init__(self, path: Path | None, name: str) -> None:
        self.path: Path | None = path
        self.name: str = name

    def render(self) -> str:
        raise NotImplementedError

    def __enter__(self) -> "Artifact":
        return self

    def __exit__(self, exc_type: Optional[Type[BaseException]], exc_value: Optional[BaseException],
                 exc_traceback: Optional[TracebackType]) -> None:
        if exc_value:
            if isinstance(exc_value, SpatialRiskError):
                return
            message = f"an unexpected error occurred while producing {self}"
            logging.error(message, exc_info=exc_value)
            raise SpatialRiskError(message) from exc_value

        content = self.render()
        if self.path is None:
            sys.stdout.write(content)
            return

        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("w", encoding="utf-8", newline="") as f:
            f.write(content)
        logging.info(f"wrote {self} to {self.path}")

    def __repr__(self) -> str:
        return self.name


class TableArtifact(Artifact):
    """Rows of numbers under a fixed header, as CSV or as a JSON list of records."""

    def __init__(self, path: Path | None, header: tuple[str, ...] = CURVE_HEADER, json_format: bool = False,
                 name: str = "curve") -> None:
        super().__init__(path, name)
        self.header: tuple[str, ...] = header
        self.json_format: bool = json_format
        self.rows: list[tuple] = []

    def add(self, *values: float | None) -> None:
        if len(values) != len(self.header):
            msg = f"{self} expects {len(self.header)} columns ({', '.join(self.header)}), got {len(values)}"
            raise SpatialRiskError(msg)
        self.rows.append(values)

    def add_curve(self, curve: RiskCurve) -> None:
        for lambda_, value, err in zip(curve.lambdas, curve.values, curve.err_estimate, strict=True):
            self.add(lambda_, value, None if math.isnan(err) else err, curve.limit)

    def render(self) -> str:
        if self.json_format:
            records = [dict(zip(self.header, row, strict=True)) for row in self.rows]
            return json.dumps(records, indent=2, sort_keys=True) + "\n"

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow([format_number(value) for value in row])
        return buffer.getvalue()


class JsonArtifact(Artifact):
    def __init__(self, path: Path | None, name: str = "report") -> None:
        super().__init__(path, name)
        self.data: dict = {}

    def render(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"


def read_table(path: Path) -> list[dict]:
    """Records of a CSV or JSON table artifact; empty CSV cells become None."""
    path = Path(path)
    with path.open(encoding="utf-8") as f:
        if path.suffix == ".json":
            return json.load(f)
        return [{key: _parse_cell(cell) for key, cell in row.items()} for row in csv.DictReader(f)]


def read_json(path: Path) -> dict | list:
    with Path(path).open(encoding="utf-8") as f:
        return json.load(f)


def load_artifact(path: Path) -> dict | list:
    path = Path(path)
    if not path.is_file():
        msg = f"no artifact at {path}"
        raise ConfigError(msg)
    return read_table(path) if path.suffix == ".csv" else read_json(path)


def diff_artifacts(first: Path, second: Path, significant_digits: int | None = 10) -> DeepDiff:
    """Differences between two artifacts, ignoring numeric noise beyond `significant_digits`."""
    diff = DeepDiff(load_artifact(first), load_artifact(second), significant_digits=significant_digits,
                    number_format_notation="e", verbose_level=2)
    if diff:
        logging.info(f"{first} and {second} differ")
    else:
        logging.info(f"{first} and {second} match")
    return diff
