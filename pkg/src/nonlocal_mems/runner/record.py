"""Self-describing result records and their on-disk form."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

SCHEMA = "nonlocal-mems/result-record@1"
PASS, FAIL, SKIPPED = "pass", "fail", "skipped"
SERIES_COLUMNS = ("t", "sup_u", "E", "dirichlet", "dissipation_cum", "nonlocal_pot")


def _clean(x):
    """Plain JSON-compatible value; non-finite floats become None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


@dataclass
class ResultRecord:
    experiment: str
    config: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    schema: str = SCHEMA

    def scalar(self, name: str, value, unit: str = "", ref: str = "") -> None:
        self.scalars[name] = {"value": _clean(value), "unit": unit, "ref": ref}

    def add_series(self, name: str, columns: dict, ref: str = "") -> None:
        self.series[name] = {"columns": {k: _clean(v) for k, v in columns.items()}, "ref": ref}

    def verdict(self, name: str, ok: bool, detail: str = "") -> None:
        self.verdicts[name] = {"status": PASS if ok else FAIL, "detail": detail}

    def skip(self, name: str, reason: str) -> None:
        self.verdicts[name] = {"status": SKIPPED, "detail": reason}

    def fail(self, name: str, reason: str) -> None:
        self.verdicts[name] = {"status": FAIL, "detail": reason}

    def value(self, name: str):
        return self.scalars[name]["value"]

    @property
    def failed(self) -> list[str]:
        return sorted(k for k, v in self.verdicts.items() if v["status"] == FAIL)

    @property
    def ok(self) -> bool:
        return not self.failed

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "experiment": self.experiment,
            "config": _clean(self.config),
            "scalars": self.scalars,
            "series": self.series,
            "verdicts": self.verdicts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ResultRecord":
        if data.get("schema") != SCHEMA:
            raise ValueError(f"unsupported record schema {data.get('schema')!r}")
        return cls(data["experiment"], data["config"], data["scalars"], data["series"],
                   data["verdicts"], data["schema"])

    @classmethod
    def read(cls, path) -> "ResultRecord":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __eq__(self, other):
        return isinstance(other, ResultRecord) and self.to_dict() == other.to_dict()


def write_series_csv(path, columns: dict) -> None:
    """Write the time-series table; missing columns are left empty."""
    n = len(columns["t"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for i in range(n):
            row = []
            for c in SERIES_COLUMNS:
                col = columns.get(c)
                v = None if col is None else col[i]
                row.append("" if v is None else repr(float(v)))
            w.writerow(row)


def write_record(record: ResultRecord, out_dir, series: Optional[dict] = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "record.json"
    path.write_text(record.to_json())
    if series is not None:
        write_series_csv(out_dir / "series.csv", series)
    return path
